#include "synood/config.hpp"
#include "synood/errors.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

using namespace synood;
using nlohmann::json;

namespace {

std::string failing_field(const json& j) {
  try {
    config_from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("json round trip preserves every field") {
    PipelineConfig c;
    c.seed = 9;
    c.synthesis.budget = 17;
    c.train.hidden = {8, 4};
    c.filter.thresholds = {0.3, 0.8};
    c.concepts.concepts.forbidden_terms = {"giraffe"};
    c.backend.mock.segment_jitter = 0.25;
    c.ablation.grid = {"1", "2"};
    const auto j = config_to_json(c);
    CHECK(config_to_json(config_from_json(j)) == j);
    const auto back = config_from_json(j);
    CHECK(back.train.seed == 9);
    CHECK(back.benchmark.world.seed == 9);
  }

  TEST_CASE("unknown and mistyped keys name their path") {
    CHECK(failing_field(json{{"train", {{"learning_rat", 0.1}}}}) == "train.learning_rat");
    CHECK(failing_field(json{{"seed", "zero"}}) == "seed");
    CHECK(failing_field(json{{"synthesis", {{"budget", -3}}}}) == "synthesis.budget");
    CHECK(failing_field(json{{"train", {{"hidden", {1, 2, 3}}}}}) == "train.hidden");
  }

  TEST_CASE("validation names the first bad field") {
    CHECK(failing_field(json{{"train", {{"learning_rate", -1.0}}}}) == "train.learning_rate");
    CHECK(failing_field(json{{"train", {{"momentum", 1.0}}}}) == "train.momentum");
    CHECK(failing_field(json{{"refine", {{"iou_threshold_gamma", 1.0}}}}) == "refine.iou_threshold_gamma");
    CHECK(failing_field(json{{"filter", {{"eps_low", 0.9}, {"eps_up", 0.4}}}}) == "filter.eps_low");
    CHECK(failing_field(json{{"backend", {{"kind", "http"}}}}) == "backend.concepts.base_url");
    CHECK(failing_field(json{{"backend", {{"kind", "grpc"}}}}) == "backend.kind");
    CHECK(failing_field(json{{"features", {{"source", "archives"}}}}) == "features.id_archive");
    CHECK(failing_field(json{{"ablation", {{"axis", "depth"}}}}) == "ablation.axis");
    CHECK(failing_field(json{{"synthesis", {{"prompt_template", "a thing"}}}}) == "synthesis.prompt_template");
    CHECK(failing_field(json::object()) == "");
  }

  TEST_CASE("overrides") {
    json doc = config_to_json(PipelineConfig{});
    apply_override(doc, "train.learning_rate=0.5");
    apply_override(doc, "output_root=out dir");
    apply_override(doc, "filter.enabled=false");
    const auto c = config_from_json(doc);
    CHECK(c.train.learning_rate == 0.5);
    CHECK(c.output_root == "out dir");
    CHECK_FALSE(c.filter.enabled);
    CHECK_THROWS_AS(apply_override(doc, "novalue"), ArgumentError);
    CHECK_THROWS_AS(apply_override(doc, "seed.x=1"), ConfigError);
    json unknown = config_to_json(PipelineConfig{});
    apply_override(unknown, "train.bogus=1");
    CHECK_THROWS_AS(config_from_json(unknown), ConfigError);
  }

  TEST_CASE("files resolve relative paths against their directory") {
    testing::TempDir dir;
    PipelineConfig c;
    c.dataset.train_annotations = "data/train.json";
    save_config(dir / "c.json", c);
    const auto loaded = load_config(dir / "c.json");
    CHECK(loaded.resolve(loaded.dataset.train_annotations) == dir / "data/train.json");
    CHECK(loaded.resolve("/abs/x") == "/abs/x");
    std::ofstream(dir / "bad.json") << "{ \"seed\": ";
    CHECK_THROWS_AS(load_config(dir / "bad.json"), FormatError);
  }

  TEST_CASE("concurrency setter touches every stage") {
    PipelineConfig c;
    set_concurrency(c, 7);
    CHECK(c.concepts.concepts.concurrency == 7);
    CHECK(c.synthesis.options.concurrency == 7);
    CHECK(c.refine.concurrency == 7);
    CHECK(c.features.concurrency == 7);
  }
}
