#include "isect/battery.hpp"

#include <algorithm>
#include <set>

#include "isect/errors.hpp"
#include "isect/util.hpp"

namespace isect {

std::string make_group_key(const MarkerSignature& signature) {
  std::string key = signature.noun_id;
  key += '|';
  key += signature.religion_id ? *signature.religion_id : "-";
  key += '|';
  key += signature.disability_id ? *signature.disability_id : "-";
  return key;
}

MarkerSignature signature_from_group_key(const std::string& group_key) {
  const auto first = group_key.find('|');
  const auto second = first == std::string::npos
                          ? std::string::npos
                          : group_key.find('|', first + 1);
  if (first == std::string::npos || second == std::string::npos ||
      group_key.find('|', second + 1) != std::string::npos)
    throw ValidationError("malformed group key '" + group_key +
                          "' (expected noun|religion|disability)");
  MarkerSignature sig;
  sig.noun_id = group_key.substr(0, first);
  const std::string religion = group_key.substr(first + 1, second - first - 1);
  const std::string disability = group_key.substr(second + 1);
  if (sig.noun_id.empty())
    throw ValidationError("malformed group key '" + group_key +
                          "': empty noun slot");
  if (religion != "-") sig.religion_id = religion;
  if (disability != "-") sig.disability_id = disability;
  return sig;
}

std::string prompt_id_for(const MarkerSignature& signature,
                          const TermRegistry& registry) {
  const MarkerTerm& noun =
      registry.require(signature.noun_id, MarkerCategory::gender_noun);
  std::string material = "frame=v1|noun=" + noun.surface;
  material += "|religion=";
  if (signature.religion_id)
    material +=
        registry.require(*signature.religion_id, MarkerCategory::religion)
            .surface;
  material += "|disability=";
  if (signature.disability_id)
    material +=
        registry.require(*signature.disability_id, MarkerCategory::disability)
            .surface;
  return to_hex64(fnv1a64(material));
}

std::vector<MarkerSignature> enumerate_signatures(
    const TermRegistry& registry) {
  registry.validate();
  auto sorted_ids = [](const std::vector<MarkerTerm>& terms,
                       bool with_none) {
    std::vector<std::string> ids;
    if (with_none) ids.emplace_back();  // "" = marker absent, orders first
    for (const auto& term : terms) ids.push_back(term.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto nouns = sorted_ids(registry.nouns, false);
  const auto religions = sorted_ids(registry.religions, true);
  const auto disabilities = sorted_ids(registry.disabilities, true);

  std::vector<MarkerSignature> signatures;
  signatures.reserve(nouns.size() * religions.size() * disabilities.size());
  for (const auto& noun : nouns) {
    for (const auto& religion : religions) {
      for (const auto& disability : disabilities) {
        MarkerSignature sig;
        sig.noun_id = noun;
        if (!religion.empty()) sig.religion_id = religion;
        if (!disability.empty()) sig.disability_id = disability;
        signatures.push_back(std::move(sig));
      }
    }
  }
  return signatures;
}

namespace {

// Words starting with a vowel letter but a consonant sound ("a user", "a
// European"), and silent-h words ("an honest"). Lookups are lowercase.
const std::set<std::string>& a_exceptions() {
  static const std::set<std::string> words = {
      "european", "ewe",      "once",    "one",       "ubiquitous",
      "unanimous", "unicorn", "uniform", "union",     "unique",
      "unit",      "united",  "unitary", "universal", "universe",
      "university", "usable", "use",     "used",      "useful",
      "user",      "usual",   "utensil", "utility",
  };
  return words;
}

const std::set<std::string>& an_exceptions() {
  static const std::set<std::string> words = {
      "heir", "heiress", "honest", "honor", "honorable",
      "honour", "honourable", "hour", "hourly",
  };
  return words;
}

std::string first_word(const std::string& phrase) {
  const auto space = phrase.find(' ');
  return space == std::string::npos ? phrase : phrase.substr(0, space);
}

}  // namespace

std::string indefinite_article(const std::string& following_word) {
  if (following_word.empty())
    throw ValidationError("cannot pick an article for an empty word");
  const std::string word = lowercase(following_word);
  if (a_exceptions().count(word)) return "a";
  if (an_exceptions().count(word)) return "an";
  const char c = word[0];
  const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  return vowel ? "an" : "a";
}

PromptSpec realize_prompt(const MarkerSignature& signature,
                          const TermRegistry& registry) {
  const MarkerTerm& noun =
      registry.require(signature.noun_id, MarkerCategory::gender_noun);
  const MarkerTerm* religion =
      signature.religion_id
          ? &registry.require(*signature.religion_id, MarkerCategory::religion)
          : nullptr;
  const MarkerTerm* disability =
      signature.disability_id
          ? &registry.require(*signature.disability_id,
                              MarkerCategory::disability)
          : nullptr;

  // Order: disability adjective, religion adjective, head noun, disability
  // postmodifier. Markers only ever attach to the subject noun phrase.
  std::vector<std::string> parts;
  if (disability && disability->realization == Realization::attributive)
    parts.push_back(disability->surface);
  if (religion) parts.push_back(religion->surface);
  parts.push_back(noun.surface);
  if (disability && disability->realization == Realization::postmodifier)
    parts.push_back(disability->surface);

  std::string article = indefinite_article(first_word(parts.front()));
  article[0] = static_cast<char>(article[0] - 'a' + 'A');  // sentence-initial

  std::string text = article;
  for (const auto& part : parts) {
    text += ' ';
    text += part;
  }

  PromptSpec spec;
  spec.prompt_id = prompt_id_for(signature, registry);
  spec.text = std::move(text);
  spec.signature = signature;
  spec.group_key = make_group_key(signature);
  return spec;
}

std::vector<PromptSpec> build_battery(const TermRegistry& registry) {
  const auto signatures = enumerate_signatures(registry);
  std::vector<PromptSpec> battery;
  battery.reserve(signatures.size());
  std::set<std::string> texts;
  std::set<std::string> ids;
  for (const auto& signature : signatures) {
    PromptSpec spec = realize_prompt(signature, registry);
    if (!texts.insert(spec.text).second)
      throw ValidationError("battery: duplicate prompt text '" + spec.text +
                            "' (two registry surfaces collide)");
    if (!ids.insert(spec.prompt_id).second)
      throw ValidationError("battery: prompt id collision on '" + spec.text +
                            "'");
    battery.push_back(std::move(spec));
  }
  return battery;
}

}  // namespace isect
