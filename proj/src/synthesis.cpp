#include "synood/synthesis.hpp"

#include "synood/errors.hpp"
#include "synood/hashing.hpp"
#include "synood/io.hpp"
#include "synood/json_io.hpp"
#include "synood/parallel.hpp"
#include "synood/text.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace synood {

std::string SynthesisJob::job_hash() const {
  return to_hex(derive_seed({pipeline_seed, source.record_id, concept_index, fnv1a(concept_name)}));
}

const char* to_string(EditStatus s) noexcept {
  switch (s) {
    case EditStatus::synthesized: return "synthesized";
    case EditStatus::failed: return "failed";
    case EditStatus::refined: return "refined";
    case EditStatus::iou_rejected: return "iou_rejected";
    case EditStatus::sim_rejected: return "sim_rejected";
    case EditStatus::accepted: return "accepted";
  }
  return "?";
}

EditStatus edit_status_from_string(std::string_view s) {
  for (auto st : {EditStatus::synthesized, EditStatus::failed, EditStatus::refined, EditStatus::iou_rejected,
                  EditStatus::sim_rejected, EditStatus::accepted}) {
    if (s == to_string(st)) return st;
  }
  throw ArgumentError("unknown edit status '" + std::string(s) + "'");
}

std::uint64_t derive_job_seed(std::uint64_t pipeline_seed, std::uint64_t record_id, std::uint32_t concept_index,
                              std::uint32_t attempt) {
  return derive_seed({pipeline_seed, record_id, concept_index, attempt});
}

std::vector<SynthesisJob> plan_jobs(std::span<const IdObjectRecord> candidates, const ConceptMap& concepts,
                                    std::size_t budget, std::uint64_t pipeline_seed) {
  if (budget < 1) throw PlanningError("synthesis budget must be >= 1");
  if (candidates.empty()) throw PlanningError("no edit candidates to plan jobs for");
  std::size_t rounds = 0;
  for (const auto& c : candidates) {
    if (c.label_id >= concepts.per_label.size() || concepts.per_label[c.label_id].empty()) {
      throw PlanningError("no concepts for label id " + std::to_string(c.label_id) + " (record " +
                          std::to_string(c.record_id) + ")");
    }
    rounds = std::max(rounds, concepts.per_label[c.label_id].size());
  }
  std::vector<SynthesisJob> jobs;
  for (std::size_t k = 0; k < rounds && jobs.size() < budget; ++k) {
    for (const auto& c : candidates) {
      if (jobs.size() >= budget) break;
      const auto& list = concepts.per_label[c.label_id];
      if (k >= list.size()) continue;
      SynthesisJob job;
      job.job_id = jobs.size();
      job.source = c;
      job.concept_name = list[k];
      job.concept_index = static_cast<std::uint32_t>(k);
      job.pipeline_seed = pipeline_seed;
      job.attempt = 1;
      job.seed = derive_job_seed(pipeline_seed, c.record_id, job.concept_index, 1);
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

std::string render_prompt(const std::string& prompt_template, const std::string& concept_name) {
  static constexpr std::string_view kSlot = "{concept}";
  std::string out = prompt_template;
  for (auto pos = out.find(kSlot); pos != std::string::npos; pos = out.find(kSlot, pos + concept_name.size())) {
    out.replace(pos, kSlot.size(), concept_name);
  }
  return out;
}

void clamp_to_box(const Image& source, Image& edited, const Box& box) {
  if (source.width != edited.width || source.height != edited.height) {
    throw ArgumentError("clamp_to_box: image sizes differ");
  }
  const auto cols = pixel_columns(box, source.width);
  const auto rows = pixel_rows(box, source.height);
  for (int y = 0; y < source.height; ++y) {
    const bool row_inside = y >= rows.begin && y < rows.end;
    for (int x = 0; x < source.width; ++x) {
      if (row_inside && x >= cols.begin && x < cols.end) continue;
      const auto* s = source.pixel(x, y);
      auto* d = edited.pixel(x, y);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
  }
}

namespace {

std::int64_t unix_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("output directory " + dir.string() + " is not writable: " + ec.message());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace

std::vector<EditRecord> run_synthesis(std::span<const SynthesisJob> jobs, InpaintBackend& backend,
                                      const fs::path& out_dir, const SynthesisOptions& options) {
  if (options.max_attempts < 1) throw ArgumentError("max_attempts must be >= 1");
  ensure_writable(out_dir);
  std::vector<EditRecord> results(jobs.size());

  parallel_for(jobs.size(), options.concurrency, [&](std::size_t i) {
    EditRecord rec;
    rec.job = jobs[i];
    rec.edit_mask_box = rec.job.source.box;
    const auto started = std::chrono::steady_clock::now();
    rec.timing.started_unix_ms = unix_ms();

    std::vector<std::uint8_t> source_png;
    Image source;
    try {
      source_png = read_binary_file(rec.job.source.image_path);
      source = decode_png(source_png);
    } catch (const Error& e) {
      rec.status = EditStatus::failed;
      rec.reason = std::string("source image unreadable: ") + e.what();
    }

    for (std::uint32_t attempt = 1; rec.reason.empty() && attempt <= options.max_attempts; ++attempt) {
      rec.job.attempt = attempt;
      rec.job.seed = derive_job_seed(rec.job.pipeline_seed, rec.job.source.record_id, rec.job.concept_index, attempt);
      try {
        InpaintRequest req{source_png, rec.edit_mask_box, render_prompt(options.prompt_template, rec.job.concept_name),
                           rec.job.seed};
        const auto resp = backend.inpaint(req);
        Image edited;
        try {
          edited = decode_png(resp.image_png);
        } catch (const FormatError& e) {
          throw ProtocolError(std::string("inpaint response is not a PNG: ") + e.what());
        }
        if (edited.width != source.width || edited.height != source.height) {
          throw ProtocolError("inpaint response is " + std::to_string(edited.width) + "x" +
                              std::to_string(edited.height) + ", source is " + std::to_string(source.width) + "x" +
                              std::to_string(source.height));
        }
        clamp_to_box(source, edited, rec.edit_mask_box);
        rec.edited_image_path = rec.job.job_hash() + ".png";
        write_png(out_dir / rec.edited_image_path, edited);
        rec.status = EditStatus::synthesized;
        break;
      } catch (const TransportError& e) {
        if (attempt == options.max_attempts) {
          rec.status = EditStatus::failed;
          rec.reason = std::string("transport: ") + e.what();
        }
      } catch (const ProtocolError& e) {
        rec.status = EditStatus::failed;
        rec.reason = std::string("protocol: ") + e.what();
      }
    }
    rec.timing.finished_unix_ms = unix_ms();
    rec.timing.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    results[i] = std::move(rec);
  });
  return results;
}

void write_edit_manifest(const fs::path& path, std::span<const EditRecord> edits) {
  std::string text;
  for (const auto& e : edits) {
    text += json(e).dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

std::vector<EditRecord> read_edit_manifest(const fs::path& path) {
  std::vector<EditRecord> out;
  std::size_t offset = 0;
  for (const auto& line : read_lines(path)) {
    if (!trim(line).empty()) {
      try {
        out.push_back(json::parse(line).get<EditRecord>());
      } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), offset + e.byte);
      } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what(), offset);
      }
    }
    offset += line.size() + 1;
  }
  return out;
}

void write_edit_timings(const fs::path& path, std::span<const EditRecord> edits) {
  std::string text;
  for (const auto& e : edits) {
    text += json{{"job_id", e.job.job_id},
                 {"latency_ms", e.timing.latency_ms},
                 {"started_unix_ms", e.timing.started_unix_ms},
                 {"finished_unix_ms", e.timing.finished_unix_ms}}
                .dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

}  // namespace synood
