#include "synood/errors.hpp"
#include "synood/image.hpp"
#include "synood/io.hpp"
#include "synood/mock_backends.hpp"
#include "synood/synthesis.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <memory>
#include <mutex>

using namespace synood;

namespace {

IdObjectRecord make_source(const testing::TempDir& dir, std::uint64_t id, std::uint32_t label, Box box) {
  Image img(64, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      auto* p = img.pixel(x, y);
      p[0] = std::uint8_t(3 * x + id);
      p[1] = std::uint8_t(5 * y);
      p[2] = std::uint8_t(x ^ y);
    }
  }
  const auto path = dir / ("src_" + std::to_string(id) + ".png");
  write_png(path, img);
  IdObjectRecord r;
  r.record_id = id;
  r.image_id = id;
  r.image_path = path.string();
  r.image_width = 64;
  r.image_height = 48;
  r.box = box;
  r.label_id = label;
  return r;
}

// Fails the first `failures` calls for each distinct box with a transport error.
class FlakyInpaint final : public InpaintBackend {
 public:
  FlakyInpaint(int failures, bool protocol = false)
      : inner_(MockWorld::with_defaults(1)), failures_(failures), protocol_(protocol) {}
  InpaintResponse inpaint(const InpaintRequest& req) override {
    {
      std::lock_guard lock(mu_);
      seeds.push_back(req.seed);
      if (calls_[req.box.x]++ < failures_) {
        if (protocol_) throw ProtocolError("rejected");
        throw TransportError("busy");
      }
    }
    return inner_.inpaint(req);
  }
  std::vector<std::uint64_t> seeds;

 private:
  MockInpaintBackend inner_;
  int failures_;
  bool protocol_;
  std::mutex mu_;
  std::map<float, int> calls_;
};

}  // namespace

TEST_SUITE("synthesis") {
  TEST_CASE("jobs are planned round-robin over concepts") {
    testing::TempDir dir;
    const std::vector<IdObjectRecord> cands{make_source(dir, 1, 0, {0, 0, 10, 10}),
                                            make_source(dir, 2, 1, {0, 0, 10, 10})};
    ConceptMap map{{{"x", "y", "z"}, {"u"}}};
    auto jobs = plan_jobs(cands, map, 10, 42);
    std::vector<std::string> got;
    for (const auto& j : jobs) got.push_back(std::to_string(j.source.record_id) + j.concept_name);
    CHECK(got == std::vector<std::string>{"1x", "2u", "1y", "1z"});
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      CHECK(jobs[i].job_id == i);
      CHECK(jobs[i].seed == derive_job_seed(42, jobs[i].source.record_id, jobs[i].concept_index, 1));
    }
    CHECK(plan_jobs(cands, map, 2, 42).size() == 2);
    CHECK_THROWS_AS(plan_jobs(cands, map, 0, 42), PlanningError);
    CHECK_THROWS_AS(plan_jobs({}, map, 5, 42), PlanningError);
    ConceptMap missing{{{"x"}}};
    CHECK_THROWS_AS(plan_jobs(cands, missing, 5, 42), PlanningError);
  }

  TEST_CASE("job seeds and hashes") {
    CHECK(derive_job_seed(1, 2, 3, 1) != derive_job_seed(1, 2, 3, 2));
    CHECK(derive_job_seed(1, 2, 3, 1) == derive_job_seed(1, 2, 3, 1));
    SynthesisJob a;
    a.concept_name = "doll";
    SynthesisJob b = a;
    b.attempt = 3;
    b.seed = 99;
    CHECK(a.job_hash() == b.job_hash());
    b.concept_name = "robot";
    CHECK(a.job_hash() != b.job_hash());
    CHECK(render_prompt("a {concept} near a {concept}", "toy {concept}") == "a toy {concept} near a toy {concept}");
  }

  TEST_CASE("transport failures retry with fresh seeds") {
    testing::TempDir dir;
    const std::vector<IdObjectRecord> cands{make_source(dir, 1, 0, {4, 4, 20, 20})};
    const auto jobs = plan_jobs(cands, ConceptMap{{{"doll"}}}, 1, 7);
    FlakyInpaint backend(2);
    const auto recs = run_synthesis(jobs, backend, dir / "out");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].status == EditStatus::synthesized);
    CHECK(recs[0].job.attempt == 3);
    CHECK(recs[0].job.seed == derive_job_seed(7, 1, 0, 3));
    CHECK(backend.seeds == std::vector<std::uint64_t>{derive_job_seed(7, 1, 0, 1), derive_job_seed(7, 1, 0, 2),
                                                      derive_job_seed(7, 1, 0, 3)});
    CHECK(std::filesystem::exists(dir / "out" / recs[0].edited_image_path));

    FlakyInpaint exhausted(5);
    SynthesisOptions opts;
    opts.max_attempts = 2;
    const auto failed = run_synthesis(jobs, exhausted, dir / "out2", opts);
    CHECK(failed[0].status == EditStatus::failed);
    CHECK(failed[0].reason.rfind("transport", 0) == 0);
    CHECK(exhausted.seeds.size() == 2);

    FlakyInpaint rejecting(5, true);
    const auto rejected = run_synthesis(jobs, rejecting, dir / "out3");
    CHECK(rejected[0].status == EditStatus::failed);
    CHECK(rejecting.seeds.size() == 1);
  }

  TEST_CASE("missing source image fails only that record") {
    testing::TempDir dir;
    auto good = make_source(dir, 1, 0, {4, 4, 20, 20});
    auto bad = make_source(dir, 2, 0, {4, 4, 20, 20});
    bad.image_path = (dir / "nope.png").string();
    const std::vector<IdObjectRecord> cands{good, bad};
    MockInpaintBackend backend(MockWorld::with_defaults(1));
    const auto recs = run_synthesis(plan_jobs(cands, ConceptMap{{{"doll"}}}, 2, 7), backend, dir / "out");
    CHECK(recs[0].status == EditStatus::synthesized);
    CHECK(recs[1].status == EditStatus::failed);
  }

  TEST_CASE("unwritable output directory") {
    testing::TempDir dir;
    std::ofstream(dir / "file") << "x";
    const std::vector<IdObjectRecord> cands{make_source(dir, 1, 0, {4, 4, 20, 20})};
    MockInpaintBackend backend(MockWorld::with_defaults(1));
    CHECK_THROWS_AS(run_synthesis(plan_jobs(cands, ConceptMap{{{"doll"}}}, 1, 7), backend, dir / "file" / "out"),
                    IoError);
  }

  TEST_CASE("pixels outside the box are restored exactly") {
    testing::TempDir dir;
    const Box box{10.5f, 7, 21.25f, 15};
    const std::vector<IdObjectRecord> cands{make_source(dir, 1, 0, box)};
    MockInpaintBackend backend(MockWorld::with_defaults(1));  // drifts context pixels by default
    const auto recs = run_synthesis(plan_jobs(cands, ConceptMap{{{"doll"}}}, 1, 7), backend, dir / "out");
    const auto src = read_png(cands[0].image_path);
    const auto out = read_png(dir / "out" / recs[0].edited_image_path);
    std::size_t changed_inside = 0;
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        const bool inside = x >= 10 && x < 32 && y >= 7 && y < 22;
        const bool same = std::equal(src.pixel(x, y), src.pixel(x, y) + 3, out.pixel(x, y));
        if (!inside) CHECK(same);
        if (inside && !same) ++changed_inside;
      }
    }
    CHECK(changed_inside > 0);
  }

  TEST_CASE("results do not depend on concurrency") {
    testing::TempDir dir;
    std::vector<IdObjectRecord> cands;
    for (std::uint64_t i = 0; i < 12; ++i) cands.push_back(make_source(dir, i, 0, {float(i), 3, 20, 20}));
    const auto jobs = plan_jobs(cands, ConceptMap{{{"doll", "robot"}}}, 24, 11);
    auto world = MockWorld::with_defaults(2);
    world.inpaint_failure_rate = 0.3;
    MockInpaintBackend b1(world), b8(world);
    SynthesisOptions o1, o8;
    o1.concurrency = 1;
    o8.concurrency = 8;
    const auto r1 = run_synthesis(jobs, b1, dir / "c1", o1);
    const auto r8 = run_synthesis(jobs, b8, dir / "c8", o8);
    CHECK(r1 == r8);
    for (const auto& r : r1) {
      if (r.status == EditStatus::synthesized) {
        CHECK(file_digest(dir / "c1" / r.edited_image_path) == file_digest(dir / "c8" / r.edited_image_path));
      }
    }
    write_edit_manifest(dir / "e.jsonl", r1);
    CHECK(read_edit_manifest(dir / "e.jsonl") == r1);
  }

  TEST_CASE("four thousand jobs come back in job order at any concurrency") {
    testing::TempDir dir;
    std::vector<IdObjectRecord> cands;
    for (std::uint64_t i = 0; i < 800; ++i) cands.push_back(make_source(dir, i, 0, {float(i % 30), 3, 20, 20}));
    const auto jobs = plan_jobs(cands, ConceptMap{{{"doll", "robot", "statue", "puppet", "scarecrow"}}}, 4000, 1);
    REQUIRE(jobs.size() == 4000);
    MockInpaintBackend b1(MockWorld::with_defaults(2)), b8(MockWorld::with_defaults(2));
    SynthesisOptions o1, o8;
    o1.concurrency = 1;
    o8.concurrency = 8;
    const auto r8 = run_synthesis(jobs, b8, dir / "c8", o8);
    REQUIRE(r8.size() == 4000);
    for (std::size_t i = 0; i < r8.size(); ++i) CHECK(r8[i].job.job_id == i);
    CHECK(run_synthesis(jobs, b1, dir / "c1", o1) == r8);
  }

  TEST_CASE("the seed changes the inside of the box only") {
    testing::TempDir dir;
    const auto src = make_source(dir, 1, 0, {10, 10, 20, 16});
    const auto a = run_synthesis(plan_jobs(std::vector{src}, ConceptMap{{{"doll"}}}, 1, 1),
                                 *std::make_unique<MockInpaintBackend>(MockWorld::with_defaults(0)), dir / "a");
    const auto b = run_synthesis(plan_jobs(std::vector{src}, ConceptMap{{{"doll"}}}, 1, 2),
                                 *std::make_unique<MockInpaintBackend>(MockWorld::with_defaults(0)), dir / "b");
    const auto ia = read_png(dir / "a" / a[0].edited_image_path), ib = read_png(dir / "b" / b[0].edited_image_path);
    bool inside_differs = false, outside_same = true;
    for (int y = 0; y < ia.height; ++y) {
      for (int x = 0; x < ia.width; ++x) {
        const bool same = std::equal(ia.pixel(x, y), ia.pixel(x, y) + 3, ib.pixel(x, y));
        if (x >= 10 && x < 30 && y >= 10 && y < 26) {
          inside_differs = inside_differs || !same;
        } else {
          outside_same = outside_same && same;
        }
      }
    }
    CHECK(inside_differs);
    CHECK(outside_same);
  }

  TEST_CASE("edit status names") {
    for (auto s : {EditStatus::synthesized, EditStatus::failed, EditStatus::refined, EditStatus::iou_rejected,
                   EditStatus::sim_rejected, EditStatus::accepted}) {
      CHECK(edit_status_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(edit_status_from_string("done"), ArgumentError);
  }
}
