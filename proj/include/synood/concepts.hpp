#pragma once

#include "synood/backends.hpp"
#include "synood/dataset.hpp"

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synood {

struct ConceptConfig {
  std::size_t concepts_per_label = 5;
  /// Normalized test-set category names and synonyms that must never be generated.
  std::set<std::string> forbidden_terms;
  /// Requests per label before giving up.
  std::size_t retry_budget = 3;
  /// Labels queried in parallel.
  std::size_t concurrency = 4;

  void validate() const;
};

/// Novel concepts per vocabulary label, indexed by label_id.
struct ConceptMap {
  std::vector<std::vector<std::string>> per_label;

  friend bool operator==(const ConceptMap&, const ConceptMap&) = default;
};

/// Case-fold, trim, collapse inner whitespace, and drop a plural trailing 's'
/// (not 'ss'). Applied to concepts, labels and forbidden terms alike.
std::string normalize_concept(std::string_view s);

/// In-context prompt asking for objects that resemble `query_label` but are not in `vocab`.
std::string build_prompt(const Vocabulary& vocab, std::string_view query_label);

/// Splits a comma-separated response, stripping quotes, backticks and whitespace.
/// Throws EmptyResponseError when nothing remains.
std::vector<std::string> parse_concepts(std::string_view response);

/// Canonical comma-quoted rendering: `a', `b', `c'.
std::string render_concepts(std::span<const std::string> concepts);

/// Drops concepts matching a label or forbidden term, drops duplicates (first wins),
/// truncates to concepts_per_label.
std::vector<std::string> sanitize_concepts(std::span<const std::string> concepts, const Vocabulary& vocab,
                                           const ConceptConfig& config);

ConceptMap imagine_concepts(ConceptBackend& backend, const Vocabulary& vocab, const ConceptConfig& config);

/// One term per line; blank lines and '#' comments ignored; terms normalized on load.
std::set<std::string> load_forbidden_terms(const std::filesystem::path& path);

}  // namespace synood
