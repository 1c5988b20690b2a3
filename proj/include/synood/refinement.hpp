#pragma once

#include "synood/backends.hpp"
#include "synood/synthesis.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace synood {

struct RefineConfig {
  /// Padding per side as a fraction of box width/height.
  double padding_e = 0.1;
  /// Refined boxes need IoU strictly above this against the edit box.
  double iou_threshold_gamma = 0.5;
  /// When false the edit box itself is used as the refined box and no gate applies.
  bool enabled = true;
  std::size_t concurrency = 4;

  void validate() const;
};

/// Highest-scoring mask; ties go to the larger foreground. Empty input gives nullopt.
std::optional<ScoredMask> select_best_mask(std::span<const ScoredMask> masks);

/// Refines every `synthesized` edit; other records pass through unchanged.
/// `image_dir` is the directory edited_image_path is relative to.
std::vector<EditRecord> refine_boxes(std::span<const EditRecord> edits, SegmentBackend& backend,
                                     const RefineConfig& config, const std::filesystem::path& image_dir);

}  // namespace synood
