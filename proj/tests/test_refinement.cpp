#include "synood/errors.hpp"
#include "synood/image.hpp"
#include "synood/refinement.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <atomic>
#include <functional>

using namespace synood;

namespace {

constexpr int kW = 80, kH = 60;

class FixedSegment final : public SegmentBackend {
 public:
  explicit FixedSegment(std::function<SegmentResponse(const SegmentRequest&)> fn) : fn_(std::move(fn)) {}
  SegmentResponse segment(const SegmentRequest& req) override {
    ++calls;
    last_prompt = req.box_prompt;
    return fn_(req);
  }
  std::atomic<int> calls{0};
  Box last_prompt;

 private:
  std::function<SegmentResponse(const SegmentRequest&)> fn_;
};

FixedSegment returning(Box b, double score = 0.9) {
  return FixedSegment([=](const SegmentRequest&) {
    SegmentResponse r;
    r.masks.push_back({box_to_mask(b, kW, kH), score});
    return r;
  });
}

EditRecord edit(const testing::TempDir& dir, Box box) {
  write_png(dir / "e.png", Image(kW, kH));
  EditRecord r;
  r.job.source.image_width = kW;
  r.job.source.image_height = kH;
  r.job.source.box = box;
  r.edit_mask_box = box;
  r.edited_image_path = "e.png";
  r.status = EditStatus::synthesized;
  return r;
}

}  // namespace

TEST_SUITE("refinement") {
  const Box kBox{20, 10, 30, 20};

  TEST_CASE("a mask matching the edit box is accepted with iou 1") {
    testing::TempDir dir;
    auto seg = returning(kBox);
    const auto out = refine_boxes(std::vector{edit(dir, kBox)}, seg, {}, dir.path());
    CHECK(out[0].status == EditStatus::refined);
    CHECK(out[0].refined_box == kBox);
    CHECK(*out[0].refine_iou == 1.0);
    CHECK(seg.last_prompt == pad_box(kBox, 0.1, kW, kH));
  }

  TEST_CASE("a tenth-area mask fails the default gate but passes gamma 0") {
    testing::TempDir dir;
    auto seg = returning({20, 10, 6, 10});  // 60 of 600 pixels
    auto out = refine_boxes(std::vector{edit(dir, kBox)}, seg, {}, dir.path());
    CHECK(out[0].status == EditStatus::iou_rejected);
    CHECK(out[0].reason == "iou_below_threshold");
    CHECK(*out[0].refine_iou == doctest::Approx(0.1));
    RefineConfig open;
    open.iou_threshold_gamma = 0.0;
    out = refine_boxes(std::vector{edit(dir, kBox)}, seg, open, dir.path());
    CHECK(out[0].status == EditStatus::refined);
  }

  TEST_CASE("no masks means rejection") {
    testing::TempDir dir;
    FixedSegment seg([](const SegmentRequest&) { return SegmentResponse{}; });
    const auto out = refine_boxes(std::vector{edit(dir, kBox)}, seg, {}, dir.path());
    CHECK(out[0].status == EditStatus::iou_rejected);
    CHECK(out[0].reason == "empty_mask");
  }

  TEST_CASE("disabled refinement keeps the edit box without calling the backend") {
    testing::TempDir dir;
    auto seg = returning({0, 0, 1, 1});
    RefineConfig cfg;
    cfg.enabled = false;
    const auto out = refine_boxes(std::vector{edit(dir, kBox)}, seg, cfg, dir.path());
    CHECK(out[0].status == EditStatus::refined);
    CHECK(out[0].refined_box == kBox);
    CHECK(seg.calls == 0);
  }

  TEST_CASE("only synthesized records are touched") {
    testing::TempDir dir;
    auto seg = returning(kBox);
    auto failed = edit(dir, kBox);
    failed.status = EditStatus::failed;
    failed.reason = "transport";
    const auto out = refine_boxes(std::vector{failed}, seg, {}, dir.path());
    CHECK(out[0] == failed);
    CHECK(seg.calls == 0);
  }

  TEST_CASE("wrong-sized masks and missing images fail the record") {
    testing::TempDir dir;
    FixedSegment seg([](const SegmentRequest&) {
      SegmentResponse r;
      r.masks.push_back({box_to_mask({0, 0, 5, 5}, 10, 10), 1.0});
      return r;
    });
    auto out = refine_boxes(std::vector{edit(dir, kBox)}, seg, {}, dir.path());
    CHECK(out[0].status == EditStatus::failed);
    auto missing = edit(dir, kBox);
    missing.edited_image_path = "gone.png";
    auto ok = returning(kBox);
    out = refine_boxes(std::vector{missing}, ok, {}, dir.path());
    CHECK(out[0].status == EditStatus::failed);
  }

  TEST_CASE("best mask selection") {
    const std::vector<ScoredMask> masks{{box_to_mask({0, 0, 2, 2}, 10, 10), 0.5},
                                        {box_to_mask({0, 0, 4, 4}, 10, 10), 0.5},
                                        {box_to_mask({0, 0, 1, 1}, 10, 10), 0.4}};
    CHECK(foreground_area(select_best_mask(masks)->mask) == 16);
    CHECK_FALSE(select_best_mask({}));
  }

  TEST_CASE("config validation") {
    RefineConfig cfg;
    cfg.iou_threshold_gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = {};
    cfg.padding_e = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  }
}
