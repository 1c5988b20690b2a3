#include "synood/json_io.hpp"

#include "synood/errors.hpp"

using nlohmann::json;

namespace synood {

void to_json(json& j, const Box& b) { j = json::array({b.x, b.y, b.w, b.h}); }

void from_json(const json& j, Box& b) {
  if (!j.is_array() || j.size() != 4) throw ArgumentError("box must be [x, y, w, h]");
  b = Box{j[0].get<float>(), j[1].get<float>(), j[2].get<float>(), j[3].get<float>()};
}

void to_json(json& j, const IdObjectRecord& r) {
  j = json{{"record_id", r.record_id},       {"image_id", r.image_id},
           {"image_path", r.image_path},     {"image_width", r.image_width},
           {"image_height", r.image_height}, {"bbox", r.box},
           {"label_id", r.label_id}};
}

void from_json(const json& j, IdObjectRecord& r) {
  j.at("record_id").get_to(r.record_id);
  j.at("image_id").get_to(r.image_id);
  j.at("image_path").get_to(r.image_path);
  j.at("image_width").get_to(r.image_width);
  j.at("image_height").get_to(r.image_height);
  j.at("bbox").get_to(r.box);
  j.at("label_id").get_to(r.label_id);
}

void to_json(json& j, const SynthesisJob& job) {
  j = json{{"job_id", job.job_id},
           {"source", job.source},
           {"concept", job.concept_name},
           {"concept_index", job.concept_index},
           {"pipeline_seed", job.pipeline_seed},
           {"seed", job.seed},
           {"attempt", job.attempt}};
}

void from_json(const json& j, SynthesisJob& job) {
  j.at("job_id").get_to(job.job_id);
  j.at("source").get_to(job.source);
  j.at("concept").get_to(job.concept_name);
  j.at("concept_index").get_to(job.concept_index);
  j.at("pipeline_seed").get_to(job.pipeline_seed);
  j.at("seed").get_to(job.seed);
  j.at("attempt").get_to(job.attempt);
}

void to_json(json& j, const EditRecord& e) {
  j = json{{"job", e.job},
           {"edited_image_path", e.edited_image_path},
           {"edit_mask_box", e.edit_mask_box},
           {"status", to_string(e.status)},
           {"reason", e.reason}};
  j["refined_box"] = e.refined_box ? json(*e.refined_box) : json(nullptr);
  j["refine_iou"] = e.refine_iou ? json(*e.refine_iou) : json(nullptr);
}

void from_json(const json& j, EditRecord& e) {
  j.at("job").get_to(e.job);
  j.at("edited_image_path").get_to(e.edited_image_path);
  j.at("edit_mask_box").get_to(e.edit_mask_box);
  e.status = edit_status_from_string(j.at("status").get<std::string>());
  j.at("reason").get_to(e.reason);
  const auto& rb = j.at("refined_box");
  e.refined_box = rb.is_null() ? std::nullopt : std::optional<Box>(rb.get<Box>());
  const auto& ri = j.at("refine_iou");
  e.refine_iou = ri.is_null() ? std::nullopt : std::optional<double>(ri.get<double>());
}

json concept_map_to_json(const ConceptMap& map, const Vocabulary& vocab) {
  json labels = json::array();
  for (std::size_t i = 0; i < map.per_label.size(); ++i) {
    labels.push_back({{"label_id", i}, {"label", vocab.at(i)}, {"concepts", map.per_label[i]}});
  }
  return {{"labels", labels}};
}

ConceptMap concept_map_from_json(const json& j, const Vocabulary& vocab) {
  ConceptMap map;
  map.per_label.resize(vocab.size());
  for (const auto& entry : j.at("labels")) {
    const auto id = entry.at("label_id").get<std::size_t>();
    if (id >= vocab.size() || entry.at("label").get<std::string>() != vocab.at(id)) {
      throw ValidationError("concept map does not match the vocabulary");
    }
    map.per_label[id] = entry.at("concepts").get<std::vector<std::string>>();
  }
  return map;
}

}  // namespace synood
