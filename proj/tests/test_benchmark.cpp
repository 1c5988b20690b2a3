#include "synood/benchmark.hpp"
#include "synood/dataset.hpp"
#include "synood/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace synood;

TEST_SUITE("benchmark") {
  TEST_CASE("clean pairs sit inside the filter band") {
    SyntheticSpec spec;
    spec.seed = 3;
    const auto world = generate_feature_world(spec);
    const auto pairs = pair_features(world.id_records, world.ood_records, world.links);
    REQUIRE(pairs.size() == spec.n_ood);
    double mean = 0.0;
    for (const auto& p : pairs) mean += p.similarity;
    mean /= double(pairs.size());
    CHECK(mean > 0.5);
    CHECK(mean < 0.8);
    CHECK(filter_by_similarity(pairs, {}).size() == pairs.size());
  }

  TEST_CASE("full contamination is filtered out entirely") {
    SyntheticSpec spec;
    spec.contamination = 1.0;
    const auto world = generate_feature_world(spec);
    const auto pairs = pair_features(world.id_records, world.ood_records, world.links);
    CHECK(filter_by_similarity(pairs, {}).empty());
  }

  TEST_CASE("the filter rejects exactly the contaminated pairs") {
    SyntheticSpec spec;
    spec.contamination = 0.3;
    spec.seed = 5;
    const auto world = generate_feature_world(spec);
    const auto kept = filter_by_similarity(pair_features(world.id_records, world.ood_records, world.links), {});
    CHECK(kept.size() == 350);
    for (const auto& p : kept) CHECK_FALSE(world.contaminated[p.edit_feature.record_id]);
  }

  TEST_CASE("feature worlds are seeded") {
    testing::TempDir a, b;
    SyntheticSpec spec;
    spec.n_id = 50;
    spec.n_ood = 40;
    write_feature_world(a.path(), generate_feature_world(spec));
    write_feature_world(b.path(), generate_feature_world(spec));
    for (const char* f : {"id.synf", "ood.synf", "pairs.jsonl"}) CHECK(file_digest(a / f) == file_digest(b / f));
    CHECK(read_pair_links(a / "pairs.jsonl").size() == 40);
    spec.seed = 1;
    write_feature_world(b.path(), generate_feature_world(spec));
    CHECK(file_digest(a / "id.synf") != file_digest(b / "id.synf"));
  }

  TEST_CASE("spec validation") {
    SyntheticSpec spec;
    spec.contamination = 1.5;
    CHECK_THROWS(generate_feature_world(spec));
    spec.contamination = 0;
    spec.separation = -1;
    CHECK_THROWS(generate_feature_world(spec));
  }

  TEST_CASE("a one-image world loads through ingest") {
    testing::TempDir dir;
    generate_image_world(1, 4, dir.path());
    const auto ds = load_annotations(dir / "train/annotations.json");
    REQUIRE(ds.records.size() == 1);
    CHECK(ds.vocabulary.size() == image_world_id_labels().size());
    const auto& r = ds.records[0];
    CHECK(r.box.w >= 32);
    CHECK(r.box.h >= 32);
    CHECK(fits_within(r.box, r.image_width, r.image_height));
    const auto img = read_png(r.image_path);
    CHECK(img.width == r.image_width);
    CHECK(load_annotations(dir / "eval/ood.json").vocabulary.labels() == image_world_ood_labels());
  }

  TEST_CASE("image worlds are seeded") {
    testing::TempDir a, b;
    generate_image_world(5, 2, a.path());
    generate_image_world(5, 2, b.path());
    for (const char* f : {"train/annotations.json", "train/images/train_000004.png", "eval/ood.json"}) {
      CHECK(file_digest(a / f) == file_digest(b / f));
    }
  }

  TEST_CASE("crop descriptor is deterministic and sensitive to content") {
    Image img(40, 30);
    for (int y = 0; y < 30; ++y) {
      for (int x = 0; x < 40; ++x) img.pixel(x, y)[0] = std::uint8_t(x * 6);
    }
    const auto a = crop_descriptor(img, {0, 0, 20, 20});
    CHECK(a.size() == kDescriptorDim);
    CHECK(a == crop_descriptor(img, {0, 0, 20, 20}));
    CHECK(a != crop_descriptor(img, {20, 5, 20, 20}));
    CHECK_THROWS(crop_descriptor(img, {100, 100, 5, 5}));
  }
}
