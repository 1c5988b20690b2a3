#include "synood/refinement.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/parallel.hpp"

namespace synood {

void RefineConfig::validate() const {
  if (!(padding_e >= 0.0)) throw ArgumentError("padding_e must be >= 0");
  if (!(iou_threshold_gamma >= 0.0 && iou_threshold_gamma <= 1.0)) {
    throw ArgumentError("iou_threshold_gamma must be in [0, 1]");
  }
}

std::optional<ScoredMask> select_best_mask(std::span<const ScoredMask> masks) {
  const ScoredMask* best = nullptr;
  std::size_t best_area = 0;
  for (const auto& m : masks) {
    const auto area = foreground_area(m.mask);
    if (!best || m.score > best->score || (m.score == best->score && area > best_area)) {
      best = &m;
      best_area = area;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

std::vector<EditRecord> refine_boxes(std::span<const EditRecord> edits, SegmentBackend& backend,
                                     const RefineConfig& config, const std::filesystem::path& image_dir) {
  config.validate();
  std::vector<EditRecord> out(edits.begin(), edits.end());
  parallel_for(out.size(), config.concurrency, [&](std::size_t i) {
    auto& rec = out[i];
    if (rec.status != EditStatus::synthesized) return;
    if (!config.enabled) {
      rec.refined_box = rec.edit_mask_box;
      rec.refine_iou = 1.0;
      rec.status = EditStatus::refined;
      rec.reason = "refiner_disabled";
      return;
    }
    const int w = rec.job.source.image_width;
    const int h = rec.job.source.image_height;
    try {
      SegmentRequest req{read_binary_file(image_dir / rec.edited_image_path),
                         pad_box(rec.edit_mask_box, config.padding_e, w, h)};
      const auto resp = backend.segment(req);
      for (const auto& m : resp.masks) {
        if (m.mask.width != w || m.mask.height != h) throw ProtocolError("mask size does not match the image");
      }
      const auto best = select_best_mask(resp.masks);
      if (!best || foreground_area(best->mask) == 0) {
        rec.status = EditStatus::iou_rejected;
        rec.reason = "empty_mask";
        return;
      }
      const Box measured = mask_to_box(best->mask);
      const double overlap = iou(measured, rec.edit_mask_box);
      rec.refined_box = measured;
      rec.refine_iou = overlap;
      if (overlap > config.iou_threshold_gamma) {
        rec.status = EditStatus::refined;
      } else {
        rec.status = EditStatus::iou_rejected;
        rec.reason = "iou_below_threshold";
      }
    } catch (const BackendError& e) {
      rec.status = EditStatus::failed;
      rec.reason = std::string("segment: ") + e.what();
    } catch (const IoError& e) {
      rec.status = EditStatus::failed;
      rec.reason = e.what();
    }
  });
  return out;
}

}  // namespace synood
