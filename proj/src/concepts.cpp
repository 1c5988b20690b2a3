#include "synood/concepts.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/parallel.hpp"
#include "synood/text.hpp"

#include <cctype>

namespace synood {

void ConceptConfig::validate() const {
  if (concepts_per_label < 1) throw ArgumentError("concepts_per_label must be >= 1");
  if (retry_budget < 1) throw ArgumentError("concept retry_budget must be >= 1");
  for (const auto& t : forbidden_terms) {
    if (t != normalize_concept(t)) throw ArgumentError("forbidden term '" + t + "' is not normalized");
  }
}

std::string normalize_concept(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (out.size() > 2 && out.back() == 's' && out[out.size() - 2] != 's') out.pop_back();
  return out;
}

std::string build_prompt(const Vocabulary& vocab, std::string_view query_label) {
  if (query_label.empty()) throw ArgumentError("query label must be non-empty");
  if (!vocab.find(query_label)) {
    throw ArgumentError("query label '" + std::string(query_label) + "' is not in the vocabulary");
  }
  std::string prompt = "Here is a list containing several objects [";
  prompt += render_concepts(vocab.labels());
  prompt +=
      "]. Now, if I provide you an object name, you should return to me objects that are similar to the "
      "usage scenario and volume of the provided object but are not in the previous object list. For "
      "example, if I give you the word: person, you should respond and only respond: `mannequin', "
      "`sculpture', `scarecrows', `doll', `puppet'.\nThe word is: ";
  prompt += query_label;
  return prompt;
}

std::vector<std::string> parse_concepts(std::string_view response) {
  std::vector<std::string> out;
  for (const auto& token : split(response, ',')) {
    auto t = trim(token, " \t\r\n'\"`");
    if (!t.empty()) out.emplace_back(t);
  }
  if (out.empty()) throw EmptyResponseError(std::string(response));
  return out;
}

std::string render_concepts(std::span<const std::string> concepts) {
  std::string out;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (i) out += ", ";
    out += '`';
    out += concepts[i];
    out += '\'';
  }
  return out;
}

std::vector<std::string> sanitize_concepts(std::span<const std::string> concepts, const Vocabulary& vocab,
                                           const ConceptConfig& config) {
  std::set<std::string> blocked = config.forbidden_terms;
  for (const auto& l : vocab.labels()) blocked.insert(normalize_concept(l));
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& c : concepts) {
    if (out.size() >= config.concepts_per_label) break;
    const auto key = normalize_concept(c);
    if (key.empty() || blocked.count(key) || !seen.insert(key).second) continue;
    out.push_back(c);
  }
  return out;
}

ConceptMap imagine_concepts(ConceptBackend& backend, const Vocabulary& vocab, const ConceptConfig& config) {
  config.validate();
  ConceptMap map;
  map.per_label.resize(vocab.size());
  parallel_for(vocab.size(), config.concurrency, [&](std::size_t label_id) {
    const auto& label = vocab.at(label_id);
    std::vector<std::string> gathered;
    for (std::size_t attempt = 0; attempt < config.retry_budget; ++attempt) {
      ConceptRequest req;
      req.id_labels = vocab.labels();
      req.query_label = label;
      req.num = static_cast<std::uint32_t>(config.concepts_per_label);
      req.attempt = static_cast<std::uint32_t>(attempt);
      req.prompt = build_prompt(vocab, label);
      ConceptResponse resp;
      try {
        resp = backend.concepts(req);
      } catch (const TransportError& e) {
        throw TransportError("concepts for '" + label + "': " + e.what());
      } catch (const ProtocolError& e) {
        throw ProtocolError("concepts for '" + label + "': " + e.what());
      }
      // Elements may be single concepts or raw comma-separated replies.
      try {
        for (auto& c : parse_concepts(join(resp.concepts, ", "))) gathered.push_back(std::move(c));
      } catch (const EmptyResponseError&) {
      }
      gathered = sanitize_concepts(gathered, vocab, config);
      if (gathered.size() >= config.concepts_per_label) break;
    }
    map.per_label[label_id] = std::move(gathered);
  });

  std::vector<std::string> short_labels;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (map.per_label[i].size() < config.concepts_per_label) short_labels.push_back(vocab.at(i));
  }
  if (!short_labels.empty()) throw PartialResultError(std::move(short_labels));
  return map;
}

std::set<std::string> load_forbidden_terms(const std::filesystem::path& path) {
  std::set<std::string> terms;
  for (const auto& line : read_lines(path)) {
    auto content = std::string_view(line);
    if (auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    auto t = normalize_concept(content);
    if (!t.empty()) terms.insert(std::move(t));
  }
  return terms;
}

}  // namespace synood
