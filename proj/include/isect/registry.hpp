#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace isect {

enum class MarkerCategory { gender_noun, religion, disability };

enum class Realization { attributive, postmodifier, head_noun };

const char* to_string(MarkerCategory category);
const char* to_string(Realization realization);

// One term in the registry: a stable id, the exact surface string inserted
// into prompts, and how it attaches to the subject noun.
struct MarkerTerm {
  std::string id;
  std::string surface;
  MarkerCategory category = MarkerCategory::gender_noun;
  Realization realization = Realization::head_noun;
};

struct TermRegistry {
  std::vector<MarkerTerm> nouns;         // head_noun realization
  std::vector<MarkerTerm> religions;     // attributive realization
  std::vector<MarkerTerm> disabilities;  // attributive or postmodifier

  // Throws ValidationError on duplicate ids, empty surfaces, invalid id
  // characters, category/realization mismatches, or an empty noun list.
  void validate() const;

  const MarkerTerm* find(const std::string& id) const;
  const MarkerTerm& require(const std::string& id,
                            MarkerCategory category) const;

  // |nouns| * (1 + |religions|) * (1 + |disabilities|)
  std::size_t battery_size() const;

  // Canonical JSON (term lists sorted by id) used for config digests.
  nlohmann::json canonical_json() const;
};

// The registry compiled into the binary, used when the config has no
// "terms" section.
TermRegistry default_registry();

// Parses the "terms" section of a config document; falls back to the
// default registry when the section is absent. Validates before returning.
TermRegistry load_registry(const nlohmann::json& config_document);

}  // namespace isect
