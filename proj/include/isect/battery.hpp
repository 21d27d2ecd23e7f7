#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isect/registry.hpp"

namespace isect {

// Which markers a prompt carries: the subject noun always, plus at most one
// religion and one disability term.
struct MarkerSignature {
  std::string noun_id;
  std::optional<std::string> religion_id;
  std::optional<std::string> disability_id;

  bool operator==(const MarkerSignature&) const = default;
};

struct PromptSpec {
  std::string prompt_id;  // 16-hex-char content hash of the signature
  std::string text;       // e.g. "A blind Muslim man"
  MarkerSignature signature;
  std::string group_key;  // "noun|religion-or--|disability-or--"
};

// "noun_id|religion_id-or--|disability_id-or--"; '-' marks an absent slot.
std::string make_group_key(const MarkerSignature& signature);

// Inverse of make_group_key; throws ValidationError on malformed keys.
MarkerSignature signature_from_group_key(const std::string& group_key);

// Content hash of the signature's surfaces; stable across runs and machines.
std::string prompt_id_for(const MarkerSignature& signature,
                          const TermRegistry& registry);

// All signatures in lexicographic order by (noun_id, religion_id-or-empty,
// disability_id-or-empty), with the absent slot ordering first.
std::vector<MarkerSignature> enumerate_signatures(const TermRegistry& registry);

// "a" or "an" for the given following word: vowel-initial words take "an",
// subject to explicit exception lists for vowel-letter words with consonant
// sounds ("user", "European", ...) and silent-h words ("honest", ...).
std::string indefinite_article(const std::string& following_word);

// Renders one noun-phrase prompt. Word order: disability adjective, religion
// adjective, noun, disability postmodifier; the article is capitalized since
// prompts are sentence-initial.
PromptSpec realize_prompt(const MarkerSignature& signature,
                          const TermRegistry& registry);

// The full battery: every signature realized, in enumerate_signatures order.
// Throws ValidationError if two prompts render identical text.
std::vector<PromptSpec> build_battery(const TermRegistry& registry);

}  // namespace isect
