#pragma once

// nlohmann::json conversions for manifest records. Field names are the
// documented manifest schema.

#include "synood/concepts.hpp"
#include "synood/dataset.hpp"
#include "synood/geometry.hpp"
#include "synood/synthesis.hpp"

#include <json.hpp>

namespace synood {

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

void to_json(nlohmann::json& j, const IdObjectRecord& r);
void from_json(const nlohmann::json& j, IdObjectRecord& r);

void to_json(nlohmann::json& j, const SynthesisJob& job);
void from_json(const nlohmann::json& j, SynthesisJob& job);

void to_json(nlohmann::json& j, const EditRecord& e);
void from_json(const nlohmann::json& j, EditRecord& e);

nlohmann::json concept_map_to_json(const ConceptMap& map, const Vocabulary& vocab);
ConceptMap concept_map_from_json(const nlohmann::json& j, const Vocabulary& vocab);

}  // namespace synood
