#pragma once

#include "synood/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synood {

/// One annotated in-distribution object.
struct IdObjectRecord {
  std::uint64_t record_id = 0;
  std::uint64_t image_id = 0;
  std::string image_path;
  int image_width = 0;
  int image_height = 0;
  Box box;
  std::uint32_t label_id = 0;

  friend bool operator==(const IdObjectRecord&, const IdObjectRecord&) = default;
};

/// Ordered closed-set label list. Labels are unique under case-folding.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& at(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::optional<std::size_t> find(std::string_view label) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> labels_;
};

struct CandidatePolicy {
  double min_box_area = 1024.0;
  std::size_t max_edits_per_image = 2;
  double max_relative_area = 0.8;

  void validate() const;
};

struct Dataset {
  Vocabulary vocabulary;
  std::vector<IdObjectRecord> records;
};

enum class AnnotationFormat { coco_json };

/// Loads a COCO-style detection file. Image paths are resolved against
/// `image_root`, or the annotation file's directory when empty.
Dataset load_annotations(const std::filesystem::path& path,
                         AnnotationFormat format = AnnotationFormat::coco_json,
                         const std::filesystem::path& image_root = {});

Dataset parse_coco_json(std::string_view text, const std::filesystem::path& image_root);

/// Deterministic subset of `records`: sorted by record_id, area filters applied,
/// then the first max_edits_per_image survivors of each image are kept.
std::vector<IdObjectRecord> select_edit_candidates(std::span<const IdObjectRecord> records,
                                                   const CandidatePolicy& policy);

// Line-delimited JSON manifest, one record per line.
void write_record_manifest(const std::filesystem::path& path, std::span<const IdObjectRecord> records);
std::vector<IdObjectRecord> read_record_manifest(const std::filesystem::path& path);

}  // namespace synood
