#pragma once

#include "synood/backends.hpp"
#include "synood/config.hpp"
#include "synood/evaluation.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace synood {

enum class Stage { ingest, imagine, synthesize, refine, extract, pair_filter, train, evaluate };

inline constexpr std::array<Stage, 8> kStages{Stage::ingest,  Stage::imagine,     Stage::synthesize,
                                              Stage::refine,  Stage::extract,     Stage::pair_filter,
                                              Stage::train,   Stage::evaluate};

std::string_view stage_name(Stage stage);
Stage stage_from_name(std::string_view name);

/// Structured log events, one JSON object each.
using EventSink = std::function<void(const nlohmann::json&)>;

struct StageOutcome {
  Stage stage = Stage::ingest;
  /// True when a completed run with the same fingerprint was found.
  bool up_to_date = false;
  std::string fingerprint;
  std::filesystem::path dir;
  /// Stage-specific tallies, also stored in stage.json.
  nlohmann::json counts = nlohmann::json::object();
};

struct BackendSet {
  std::shared_ptr<ConceptBackend> concepts;
  std::shared_ptr<InpaintBackend> inpaint;
  std::shared_ptr<SegmentBackend> segment;
};

/// Mock or HTTP backends as the config selects.
BackendSet make_backends(const PipelineConfig& config);

/*
 * Stage artifacts live in <output_root>/<stage>/<fingerprint>/. A fingerprint
 * hashes the stage's config slice, the pipeline seed, the digests of any
 * external inputs it reads and the fingerprints of its upstream stages, so a
 * directory can only ever hold outputs of one configuration. Worker counts and
 * the output root are not part of any fingerprint.
 */
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, EventSink sink = {});

  /// Replaces the config-selected backends (tests, embedding).
  void set_backends(BackendSet backends);

  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path output_root() const;
  std::string fingerprint(Stage stage) const;
  std::filesystem::path stage_dir(Stage stage) const;

  /// Throws DependencyError naming the upstream stage when its artifacts are
  /// missing, incomplete or modified.
  StageOutcome run_stage(Stage stage, bool force = false);

  /// All stages in order; returns the evaluation report.
  EvalReport run_all(bool force = false);

 private:
  std::string compute_fingerprint(Stage stage) const;
  nlohmann::json stage_slice(Stage stage) const;
  void require(Stage upstream) const;
  bool completed(Stage stage) const;
  void emit(nlohmann::json event) const;
  BackendSet& backends();

  nlohmann::json run_ingest(const std::filesystem::path& dir);
  nlohmann::json run_imagine(const std::filesystem::path& dir);
  nlohmann::json run_synthesize(const std::filesystem::path& dir);
  nlohmann::json run_refine(const std::filesystem::path& dir);
  nlohmann::json run_extract(const std::filesystem::path& dir);
  nlohmann::json run_pair_filter(const std::filesystem::path& dir);
  nlohmann::json run_train(const std::filesystem::path& dir);
  nlohmann::json run_evaluate(const std::filesystem::path& dir);

  PipelineConfig config_;
  EventSink sink_;
  std::optional<BackendSet> backends_;
  mutable std::array<std::optional<std::string>, kStages.size()> fingerprints_;
};

/// Output files each stage declares; stage.json records their digests.
std::vector<std::string> stage_outputs(Stage stage);

/// One full pipeline run per grid value of config.ablation.axis; stages that the
/// swept knob does not touch are shared between grid points.
std::vector<AblationRow> run_pipeline_ablation(const PipelineConfig& config, EventSink sink = {});

/// Feature-world sweep (sample_count sets benchmark.n_ood; filter_on_off toggles the filter).
std::vector<AblationRow> run_benchmark_ablation(const PipelineConfig& config);

/// 0 ok, 1 config/argument/input data, 2 missing dependency, 3 backend, 4 internal.
int exit_code_for(const std::exception& e);

/// Default config for a generated image world rooted at `world_dir`.
PipelineConfig image_world_config(std::size_t n_images);

}  // namespace synood
