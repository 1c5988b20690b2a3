#pragma once

#include "synood/geometry.hpp"
#include "synood/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace synood {

enum class FeatureKind : std::uint8_t { id = 0, edit = 1 };

struct FeatureRecord {
  std::uint64_t record_id = 0;
  std::uint64_t image_id = 0;
  Box box;
  std::uint32_t label_id = 0;
  FeatureKind kind = FeatureKind::id;
  std::vector<float> vector;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/*
 * Feature archive layout (little-endian):
 *
 *   "SYNF"  magic, 4 bytes
 *   u32     version (1)
 *   u32     dim
 *   u64     count
 *   count x { u64 record_id, u64 image_id, f32 x, f32 y, f32 w, f32 h,
 *             u32 label_id, u8 kind, 3 zero bytes, dim x f32 }
 */
inline constexpr std::uint32_t kFeatureArchiveVersion = 1;

std::vector<std::uint8_t> encode_feature_archive(std::uint32_t dim, std::span<const FeatureRecord> records);
std::vector<FeatureRecord> decode_feature_archive(std::span<const std::uint8_t> bytes, std::uint32_t* dim = nullptr);

void write_feature_archive(const std::filesystem::path& path, std::uint32_t dim,
                           std::span<const FeatureRecord> records);
std::vector<FeatureRecord> read_feature_archive(const std::filesystem::path& path, std::uint32_t* dim = nullptr);

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DegenerateVectorError for a
/// zero-norm input and ArgumentError for mismatched dimensions.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Edit feature `edit_id` came from ID object `source_record_id`.
struct PairLink {
  std::uint64_t edit_id = 0;
  std::uint64_t source_record_id = 0;
};

struct FeaturePair {
  FeatureRecord id_feature;
  FeatureRecord edit_feature;
  double similarity = 0.0;
};

/// One pair per link, in link order. Throws PairingError listing every edit id
/// whose edit-side or id-side feature is missing, or whose edit id occurs twice.
std::vector<FeaturePair> pair_features(std::span<const FeatureRecord> id_records,
                                       std::span<const FeatureRecord> edit_records, std::span<const PairLink> links);

/// Links for the `refined` edits: edit id = job_id, source = the edited ID record.
std::vector<PairLink> refined_links(std::span<const EditRecord> edits);

std::vector<FeaturePair> pair_features(std::span<const FeatureRecord> id_records,
                                       std::span<const FeatureRecord> edit_records,
                                       std::span<const EditRecord> edits);

struct FilterConfig {
  double eps_low = 0.4;
  double eps_up = 0.9;

  void validate() const;
};

/// Keeps pairs with eps_low < similarity < eps_up, preserving order.
std::vector<FeaturePair> filter_by_similarity(std::span<const FeaturePair> pairs, const FilterConfig& config);

/// Marks refined edits `accepted` when their job id is among `kept`, else `sim_rejected`.
void mark_similarity_status(std::vector<EditRecord>& edits, std::span<const FeaturePair> kept);

/// Rows are samples.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FeatureMatrix to_matrix(std::span<const FeatureRecord> records);

}  // namespace synood
