#pragma once

#include "synood/backends.hpp"
#include "synood/benchmark.hpp"
#include "synood/concepts.hpp"
#include "synood/dataset.hpp"
#include "synood/features.hpp"
#include "synood/mlp.hpp"
#include "synood/refinement.hpp"
#include "synood/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace synood {

struct DatasetConfig {
  std::string train_annotations;
  std::string eval_id_annotations;
  std::string eval_ood_annotations;
  /// Images resolve against this directory, or each annotation file's directory when empty.
  std::string image_root;
};

struct MockBackendConfig {
  std::uint64_t world_seed = 0;
  double concept_failure_rate = 0.0;
  double inpaint_failure_rate = 0.0;
  double segment_jitter = 0.0;
  double segment_failure_rate = 0.0;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  MockBackendConfig mock;
  BackendEndpointConfig concepts;
  BackendEndpointConfig inpaint;
  BackendEndpointConfig segment;
};

struct ConceptStageConfig {
  ConceptConfig concepts;
  /// Extra blocklist file, one term per line.
  std::string forbidden_terms_file;
};

struct SynthesisStageConfig {
  std::size_t budget = 4000;
  SynthesisOptions options;
};

struct FeatureSourceConfig {
  /// "mock" computes crop descriptors; "archives" ingests externally extracted features.
  std::string source = "mock";
  std::string id_archive;
  std::string edit_archive;
  std::string eval_id_archive;
  std::string eval_ood_archive;
  std::size_t concurrency = 4;
};

struct FilterStageConfig {
  bool enabled = true;
  FilterConfig thresholds;
};

struct AblationConfig {
  std::string axis = "sample_count";
  std::vector<std::string> grid;
  std::size_t concurrency = 1;
};

struct BenchmarkConfig {
  SyntheticSpec world;
  std::size_t eval_n_id = 200;
  std::size_t eval_n_ood = 200;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string output_root = "runs";
  DatasetConfig dataset;
  BackendConfig backend;
  ConceptStageConfig concepts;
  CandidatePolicy candidates;
  SynthesisStageConfig synthesis;
  RefineConfig refine;
  FeatureSourceConfig features;
  FilterStageConfig filter;
  TrainConfig train;
  AblationConfig ablation;
  BenchmarkConfig benchmark;

  /// Relative paths resolve against this directory (the config file's). Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& config);
/// Strict: unknown keys and mistyped values raise ConfigError with the field path.
/// Missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

/// Applies "a.b.c=value". The value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Sets every stage's worker count.
void set_concurrency(PipelineConfig& config, std::size_t n);

}  // namespace synood
