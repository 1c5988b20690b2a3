#include "synood/benchmark.hpp"
#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/pipeline.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace synood;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_world(const testing::TempDir& dir, std::size_t n = 16) {
  generate_image_world(n, 5, dir / "world");
  auto c = image_world_config(n);
  c.base_dir = dir / "world";
  c.seed = 3;
  c.train.epochs = 3;
  c.train.hidden = {16, 8};
  c.train.learning_rate = 0.01;
  return c;
}

std::map<std::string, std::string> output_digests(const Pipeline& p, Stage s) {
  std::map<std::string, std::string> out;
  for (const auto& f : stage_outputs(s)) {
    const auto path = p.stage_dir(s) / f;
    if (fs::is_regular_file(path)) out[f] = file_digest(path);
  }
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("stage names") {
    for (auto s : kStages) CHECK(stage_from_name(stage_name(s)) == s);
    CHECK(stage_from_name("pair-filter") == Stage::pair_filter);
    CHECK_THROWS_AS(stage_from_name("export"), ArgumentError);
  }

  TEST_CASE("a stage refuses to run without its upstream artifacts") {
    testing::TempDir dir;
    Pipeline p(small_world(dir));
    for (auto s : {Stage::ingest, Stage::imagine, Stage::synthesize, Stage::refine, Stage::extract}) p.run_stage(s);
    try {
      p.run_stage(Stage::train);
      FAIL("expected dependency error");
    } catch (const DependencyError& e) {
      CHECK(e.stage() == "pair_filter");
      CHECK(exit_code_for(e) == 2);
    }
  }

  TEST_CASE("reruns are no-ops and staged runs match a full run") {
    testing::TempDir a, b;
    auto cfg = small_world(a);
    Pipeline full(cfg);
    const auto report = full.run_all();
    CHECK(report.n_id > 0);
    CHECK(report.n_ood > 0);
    for (auto s : kStages) {
      const auto again = full.run_stage(s);
      CHECK(again.up_to_date);
    }

    auto cfg_b = cfg;
    cfg_b.output_root = (b / "runs").string();
    set_concurrency(cfg_b, 1);
    Pipeline staged(cfg_b);
    for (auto s : kStages) {
      const auto out = staged.run_stage(s);
      CHECK_FALSE(out.up_to_date);
      CHECK(out.fingerprint == full.fingerprint(s));
      CHECK(output_digests(staged, s) == output_digests(full, s));
    }
  }

  TEST_CASE("tampered artifacts are detected downstream") {
    testing::TempDir dir;
    Pipeline p(small_world(dir));
    for (auto s : {Stage::ingest, Stage::imagine}) p.run_stage(s);
    std::ofstream(p.stage_dir(Stage::imagine) / "concepts.json", std::ios::app) << " ";
    CHECK_THROWS_AS(p.run_stage(Stage::synthesize), DependencyError);
    CHECK_FALSE(p.run_stage(Stage::imagine).up_to_date);
    CHECK(p.run_stage(Stage::synthesize).fingerprint == p.fingerprint(Stage::synthesize));
  }

  TEST_CASE("fingerprints follow the config slices") {
    testing::TempDir dir;
    const auto base = small_world(dir);
    auto other = base;
    other.train.learning_rate = 0.02;
    Pipeline p(base), q(other);
    for (auto s : {Stage::ingest, Stage::imagine, Stage::synthesize, Stage::refine, Stage::extract, Stage::pair_filter}) {
      CHECK(p.fingerprint(s) == q.fingerprint(s));
    }
    CHECK(p.fingerprint(Stage::train) != q.fingerprint(Stage::train));
    CHECK(p.fingerprint(Stage::evaluate) != q.fingerprint(Stage::evaluate));

    auto threaded = base;
    set_concurrency(threaded, 9);
    threaded.output_root = "elsewhere";
    Pipeline r(threaded);
    for (auto s : kStages) CHECK(p.fingerprint(s) == r.fingerprint(s));

    auto reseeded = base;
    reseeded.seed = 4;
    Pipeline t(reseeded);
    CHECK(p.fingerprint(Stage::ingest) != t.fingerprint(Stage::ingest));
  }

  TEST_CASE("a zero budget is a planning error") {
    testing::TempDir dir;
    auto cfg = small_world(dir);
    cfg.synthesis.budget = 0;
    Pipeline p(cfg);
    p.run_stage(Stage::ingest);
    p.run_stage(Stage::imagine);
    try {
      p.run_stage(Stage::synthesize);
      FAIL("expected planning error");
    } catch (const PlanningError& e) {
      CHECK(exit_code_for(e) == 1);
    }
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("a", "b")) == 1);
    CHECK(exit_code_for(CorruptionError("x", 0)) == 1);
    CHECK(exit_code_for(DependencyError("ingest", "x")) == 2);
    CHECK(exit_code_for(TransportError("x")) == 3);
    CHECK(exit_code_for(PartialResultError({"dog"})) == 3);
    CHECK(exit_code_for(std::runtime_error("x")) == 4);
  }
}
