#pragma once

#include "synood/evaluation.hpp"
#include "synood/features.hpp"
#include "synood/image.hpp"
#include "synood/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace synood {

/*
 * Gaussian stand-in for detector latents. Both classes share a large common
 * component `base_norm * b` (b a seeded unit direction), which keeps ID/OOD
 * cosine similarity in the filter's band; they differ along a unit direction
 * u orthogonal to b:
 *
 *   ID  ~ N(base + (s/2) scale u, scale^2 I)
 *   OOD ~ N(base - (s/2) scale u, scale^2 I)
 *
 * A contaminated OOD sample imitates a failed edit: it is a shrunken copy
 * a * z_id + small noise of its paired ID feature, a in [0.4, 0.7], with
 * cosine similarity above 0.95.
 */
struct SyntheticSpec {
  std::uint32_t feature_dim = 16;
  std::size_t n_id = 500;
  std::size_t n_ood = 500;
  double separation = 6.0;
  double scale = 1.0;
  double base_norm = 8.5;
  double contamination = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FeatureWorld {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> id_records;
  /// kind = edit; record_id doubles as the edit id.
  std::vector<FeatureRecord> ood_records;
  std::vector<PairLink> links;
  /// Parallel to ood_records.
  std::vector<bool> contaminated;
};

/// Clean pairs have similarity in [0.45, 0.85]; contaminated ones above 0.95.
FeatureWorld generate_feature_world(const SyntheticSpec& spec);

/// Writes id.synf, ood.synf and pairs.jsonl ({"edit_id", "source_record_id"} per line).
void write_feature_world(const std::filesystem::path& dir, const FeatureWorld& world);
std::vector<PairLink> read_pair_links(const std::filesystem::path& path);

struct EvalSplit {
  FeatureMatrix id;
  FeatureMatrix ood;
};

/// Fresh clean samples from the same clusters, on a stream disjoint from training.
EvalSplit sample_eval_split(const SyntheticSpec& spec, std::size_t n_id, std::size_t n_ood);

struct FeatureExperiment {
  SyntheticSpec world;
  TrainConfig train;
  std::optional<FilterConfig> filter = FilterConfig{};
  std::size_t eval_n_id = 200;
  std::size_t eval_n_ood = 200;
};

/// Generate, pair, optionally filter, train and evaluate on a held-out split.
/// The model and its sampling use world.seed; train.seed is overridden.
EvalReport run_feature_experiment(const FeatureExperiment& experiment);

/// Category names used by the image world; the OOD list never overlaps the ID list.
const std::vector<std::string>& image_world_id_labels();
const std::vector<std::string>& image_world_ood_labels();

/*
 * Writes a procedurally drawn detection dataset:
 *   train/annotations.json + train/images/   (n_images, ID categories)
 *   eval/id.json, eval/ood.json + eval/images/     (held-out scenes)
 * Each scene has one labeled rectangle object of at least 32x32 pixels.
 */
void generate_image_world(std::size_t n_images, std::uint64_t seed, const std::filesystem::path& dir,
                          std::size_t n_eval = 0);

/// Deterministic crop descriptor used in place of a detector's ROI features.
inline constexpr std::uint32_t kDescriptorDim = 16;
std::vector<float> crop_descriptor(const Image& image, const Box& box);

}  // namespace synood
