#pragma once

#include "synood/backends.hpp"
#include "synood/concepts.hpp"
#include "synood/dataset.hpp"
#include "synood/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synood {

struct SynthesisJob {
  /// Position in the plan; also the lineage key of the edit-side feature.
  std::uint64_t job_id = 0;
  IdObjectRecord source;
  std::string concept_name;
  std::uint32_t concept_index = 0;
  std::uint64_t pipeline_seed = 0;
  std::uint64_t seed = 0;
  /// 1-based attempt that produced the current seed.
  std::uint32_t attempt = 1;

  /// Stable name for the job's artifacts; independent of the attempt.
  std::string job_hash() const;

  friend bool operator==(const SynthesisJob&, const SynthesisJob&) = default;
};

enum class EditStatus { synthesized, failed, refined, iou_rejected, sim_rejected, accepted };

const char* to_string(EditStatus s) noexcept;
EditStatus edit_status_from_string(std::string_view s);

/// Wall-clock data kept out of the manifests so those stay reproducible.
struct EditTiming {
  double latency_ms = 0.0;
  std::int64_t started_unix_ms = 0;
  std::int64_t finished_unix_ms = 0;
};

struct EditRecord {
  SynthesisJob job;
  /// Relative to the synthesis output directory.
  std::string edited_image_path;
  Box edit_mask_box;
  std::optional<Box> refined_box;
  std::optional<double> refine_iou;
  EditStatus status = EditStatus::synthesized;
  /// Why a record failed or was rejected; empty otherwise.
  std::string reason;
  EditTiming timing;

  friend bool operator==(const EditRecord& a, const EditRecord& b) {
    return a.job == b.job && a.edited_image_path == b.edited_image_path && a.edit_mask_box == b.edit_mask_box &&
           a.refined_box == b.refined_box && a.refine_iou == b.refine_iou && a.status == b.status &&
           a.reason == b.reason;
  }
};

/// splitmix-folded seed of (pipeline seed, record id, concept index, attempt).
std::uint64_t derive_job_seed(std::uint64_t pipeline_seed, std::uint64_t record_id, std::uint32_t concept_index,
                              std::uint32_t attempt);

/// Round-robin over concepts: every candidate's first concept, then every
/// candidate's second, and so on, truncated to `budget`.
std::vector<SynthesisJob> plan_jobs(std::span<const IdObjectRecord> candidates, const ConceptMap& concepts,
                                    std::size_t budget, std::uint64_t pipeline_seed);

struct SynthesisOptions {
  std::size_t concurrency = 4;
  /// Total attempts per job; transport failures retry with a fresh seed.
  std::uint32_t max_attempts = 3;
  /// "{concept}" is replaced with the concept name.
  std::string prompt_template = "a {concept}";
};

std::string render_prompt(const std::string& prompt_template, const std::string& concept_name);

/// Runs every job against the backend, writes out_dir/<job_hash>.png and returns
/// one record per job in job order. Pixels outside each edit box are restored
/// from the source before writing. Throws IoError when out_dir is not writable.
std::vector<EditRecord> run_synthesis(std::span<const SynthesisJob> jobs, InpaintBackend& backend,
                                      const std::filesystem::path& out_dir, const SynthesisOptions& options = {});

/// Copies source pixels outside `box` into `edited`. Both images must match in size.
void clamp_to_box(const Image& source, Image& edited, const Box& box);

void write_edit_manifest(const std::filesystem::path& path, std::span<const EditRecord> edits);
std::vector<EditRecord> read_edit_manifest(const std::filesystem::path& path);
void write_edit_timings(const std::filesystem::path& path, std::span<const EditRecord> edits);

}  // namespace synood
