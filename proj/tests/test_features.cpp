#include "synood/errors.hpp"
#include "synood/features.hpp"
#include "synood/io.hpp"
#include "synood/random.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace synood;

namespace {

FeatureRecord record(std::uint64_t id, FeatureKind kind, std::vector<float> v) {
  return {id, id + 100, {1, 2, 3, 4}, 7, kind, std::move(v)};
}

// Byte layout written out by hand, independent of the encoder.
std::vector<std::uint8_t> handmade_archive(std::uint64_t header_count, std::size_t records_present) {
  std::vector<std::uint8_t> b;
  auto put = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    b.insert(b.end(), c, c + n);  // host is little-endian (x86-64 / aarch64)
  };
  b.insert(b.end(), {'S', 'Y', 'N', 'F'});
  const std::uint32_t version = 1, dim = 4;
  put(&version, 4);
  put(&dim, 4);
  put(&header_count, 8);
  for (std::size_t i = 0; i < records_present; ++i) {
    const std::uint64_t rid = 5 + i, img = 9;
    const float box[4] = {1.f, 2.f, 3.f, 4.f};
    const std::uint32_t label = 2;
    const std::uint8_t kind = 1, pad[3] = {0, 0, 0};
    const float v[4] = {0.5f, -1.f, 2.f, 0.f};
    put(&rid, 8);
    put(&img, 8);
    put(box, 16);
    put(&label, 4);
    put(&kind, 1);
    put(pad, 3);
    put(v, 16);
  }
  return b;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("minimal archive decodes field by field") {
    std::uint32_t dim = 0;
    const auto recs = decode_feature_archive(handmade_archive(1, 1), &dim);
    CHECK(dim == 4);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].record_id == 5);
    CHECK(recs[0].image_id == 9);
    CHECK(recs[0].box == Box{1, 2, 3, 4});
    CHECK(recs[0].label_id == 2);
    CHECK(recs[0].kind == FeatureKind::edit);
    CHECK(recs[0].vector == std::vector<float>{0.5f, -1.f, 2.f, 0.f});
  }

  TEST_CASE("encoder produces the documented bytes") {
    const auto rec = record(5, FeatureKind::edit, {0.5f, -1.f, 2.f, 0.f});
    FeatureRecord r = rec;
    r.image_id = 9;
    r.label_id = 2;
    CHECK(encode_feature_archive(4, std::vector{r}) == handmade_archive(1, 1));
  }

  TEST_CASE("truncated archive reports the missing record") {
    try {
      decode_feature_archive(handmade_archive(2, 1));
      FAIL("expected corruption error");
    } catch (const CorruptionError& e) {
      CHECK(e.record_index() == 1);
    }
  }

  TEST_CASE("bad magic and version are format errors") {
    auto bytes = handmade_archive(1, 1);
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_feature_archive(bytes), FormatError);
    bytes = handmade_archive(1, 1);
    bytes[4] = 2;
    CHECK_THROWS_AS(decode_feature_archive(bytes), FormatError);
  }

  TEST_CASE("non-finite values are rejected") {
    auto bytes = handmade_archive(1, 1);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
    CHECK_THROWS_AS(decode_feature_archive(bytes), ValidationError);
  }

  TEST_CASE("write/read round-trip is bit exact") {
    testing::TempDir dir;
    Rng rng(1);
    std::vector<FeatureRecord> recs;
    for (std::uint64_t i = 0; i < 50; ++i) {
      std::vector<float> v(7);
      for (auto& x : v) x = float(rng.normal() * 1e3);
      recs.push_back(record(i, i % 2 ? FeatureKind::edit : FeatureKind::id, v));
    }
    write_feature_archive(dir / "a.synf", 7, recs);
    std::uint32_t dim = 0;
    CHECK(read_feature_archive(dir / "a.synf", &dim) == recs);
    CHECK(dim == 7);
    write_feature_archive(dir / "b.synf", 7, read_feature_archive(dir / "a.synf"));
    CHECK(read_binary_file(dir / "a.synf") == read_binary_file(dir / "b.synf"));
  }

  TEST_CASE("cosine similarity examples") {
    const std::vector<double> a{1, 2, 3};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
          doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}), DegenerateVectorError);
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1}, std::vector<double>{1, 0}), ArgumentError);
  }

  TEST_CASE("cosine is symmetric and scale invariant") {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> a(6), b(6), sa(6);
      const double alpha = rng.uniform(0.01, 100.0);
      for (int k = 0; k < 6; ++k) {
        a[k] = rng.normal();
        b[k] = rng.normal();
        sa[k] = alpha * a[k];
      }
      CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
      CHECK(std::abs(cosine_similarity(sa, b) - cosine_similarity(a, b)) < 1e-9);
    }
  }

  TEST_CASE("pairing joins by lineage") {
    const std::vector<FeatureRecord> ids{record(1, FeatureKind::id, {1, 0}), record(2, FeatureKind::id, {0, 1}),
                                         record(3, FeatureKind::id, {1, 1})};
    const std::vector<FeatureRecord> edits{record(10, FeatureKind::edit, {1, 0}),
                                           record(11, FeatureKind::edit, {1, 0}),
                                           record(12, FeatureKind::edit, {1, 1})};
    const std::vector<PairLink> links{{10, 1}, {11, 2}, {12, 3}};
    const auto pairs = pair_features(ids, edits, links);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].similarity == doctest::Approx(1.0));
    CHECK(pairs[1].similarity == 0.0);
    CHECK(pairs[2].similarity == doctest::Approx(1.0));
    for (const auto& p : pairs) {
      CHECK(std::abs(p.similarity - cosine_similarity(std::span<const float>(p.edit_feature.vector),
                                                      std::span<const float>(p.id_feature.vector))) < 1e-6);
    }
  }

  TEST_CASE("pairing names edits without an id-side feature") {
    const std::vector<FeatureRecord> ids{record(1, FeatureKind::id, {1, 0})};
    const std::vector<FeatureRecord> edits{record(10, FeatureKind::edit, {1, 0}),
                                           record(11, FeatureKind::edit, {0, 1})};
    const std::vector<PairLink> links{{10, 1}, {11, 2}};
    try {
      pair_features(ids, edits, links);
      FAIL("expected pairing error");
    } catch (const PairingError& e) {
      CHECK(e.lineage_ids() == std::vector<std::uint64_t>{11});
    }
  }

  TEST_CASE("filter keeps the open interval only") {
    std::vector<FeaturePair> pairs(3);
    pairs[0].similarity = 0.95;
    pairs[1].similarity = 0.7;
    pairs[2].similarity = 0.3;
    const auto kept = filter_by_similarity(pairs, {});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].similarity == 0.7);

    std::vector<FeaturePair> edges(2);
    edges[0].similarity = 0.9;
    edges[1].similarity = 0.4;
    CHECK(filter_by_similarity(edges, {}).empty());

    std::vector<FeaturePair> extremes(3);
    extremes[0].similarity = 1.0;
    extremes[1].similarity = -1.0;
    extremes[2].similarity = 0.99;
    CHECK(filter_by_similarity(extremes, {-1.0, 1.0}).size() == 1);
  }

  TEST_CASE("widening the interval never drops a kept pair") {
    Rng rng(6);
    std::vector<FeaturePair> pairs(300);
    for (auto& p : pairs) p.similarity = rng.uniform(-1, 1);
    for (int i = 0; i < 50; ++i) {
      const double lo = rng.uniform(-1, 0.5), hi = rng.uniform(lo + 0.01, 1.0);
      const auto narrow = filter_by_similarity(pairs, {lo, hi});
      const auto wide = filter_by_similarity(pairs, {std::max(-1.0, lo - 0.1), std::min(1.0, hi + 0.1)});
      CHECK(narrow.size() <= wide.size());
      for (const auto& p : narrow) {
        CHECK(std::any_of(wide.begin(), wide.end(), [&](const FeaturePair& q) { return q.similarity == p.similarity; }));
      }
    }
    CHECK_THROWS_AS(filter_by_similarity(pairs, {0.5, 0.5}), ArgumentError);
  }
}
