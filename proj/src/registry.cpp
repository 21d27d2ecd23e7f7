#include "isect/registry.hpp"

#include <algorithm>
#include <set>

#include "isect/errors.hpp"

namespace isect {

const char* to_string(MarkerCategory category) {
  switch (category) {
    case MarkerCategory::gender_noun: return "gender_noun";
    case MarkerCategory::religion: return "religion";
    case MarkerCategory::disability: return "disability";
  }
  return "unknown";
}

const char* to_string(Realization realization) {
  switch (realization) {
    case Realization::attributive: return "attributive";
    case Realization::postmodifier: return "postmodifier";
    case Realization::head_noun: return "head_noun";
  }
  return "unknown";
}

namespace {

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

void validate_terms(const std::vector<MarkerTerm>& terms,
                    MarkerCategory category, std::set<std::string>& seen_ids) {
  for (const auto& term : terms) {
    if (!valid_id(term.id))
      throw ValidationError("registry: invalid term id '" + term.id +
                            "' (use [A-Za-z0-9._-]+)");
    if (!seen_ids.insert(term.id).second)
      throw ValidationError("registry: duplicate term id '" + term.id + "'");
    if (term.surface.empty())
      throw ValidationError("registry: term '" + term.id +
                            "' has an empty surface");
    if (term.category != category)
      throw ValidationError("registry: term '" + term.id +
                            "' is listed under the wrong category");
    switch (category) {
      case MarkerCategory::gender_noun:
        if (term.realization != Realization::head_noun)
          throw ValidationError("registry: noun '" + term.id +
                                "' must use the head_noun realization");
        break;
      case MarkerCategory::religion:
        if (term.realization != Realization::attributive)
          throw ValidationError("registry: religion '" + term.id +
                                "' must use the attributive realization");
        break;
      case MarkerCategory::disability:
        if (term.realization == Realization::head_noun)
          throw ValidationError("registry: disability '" + term.id +
                                "' cannot use the head_noun realization");
        break;
    }
  }
}

nlohmann::json terms_to_json(std::vector<MarkerTerm> terms) {
  std::sort(terms.begin(), terms.end(),
            [](const MarkerTerm& a, const MarkerTerm& b) { return a.id < b.id; });
  nlohmann::json out = nlohmann::json::array();
  for (const auto& term : terms) {
    out.push_back({{"id", term.id},
                   {"surface", term.surface},
                   {"realization", to_string(term.realization)}});
  }
  return out;
}

Realization parse_realization(const std::string& name,
                              const std::string& term_id) {
  if (name == "attributive") return Realization::attributive;
  if (name == "postmodifier") return Realization::postmodifier;
  if (name == "head_noun") return Realization::head_noun;
  throw ValidationError("registry: term '" + term_id +
                        "' has unknown realization '" + name + "'");
}

std::vector<MarkerTerm> parse_terms(const nlohmann::json& list,
                                    MarkerCategory category,
                                    const char* section) {
  if (!list.is_array())
    throw ValidationError(std::string("registry: '") + section +
                          "' must be an array");
  std::vector<MarkerTerm> terms;
  for (const auto& entry : list) {
    if (!entry.is_object())
      throw ValidationError(std::string("registry: entries in '") + section +
                            "' must be objects");
    for (const auto& [key, _] : entry.items()) {
      if (key != "id" && key != "surface" && key != "realization")
        throw ValidationError(std::string("registry: unknown key '") + key +
                              "' in '" + section + "'");
    }
    MarkerTerm term;
    if (!entry.contains("id") || !entry["id"].is_string())
      throw ValidationError(std::string("registry: entries in '") + section +
                            "' need a string 'id'");
    if (!entry.contains("surface") || !entry["surface"].is_string())
      throw ValidationError(std::string("registry: entries in '") + section +
                            "' need a string 'surface'");
    term.id = entry["id"].get<std::string>();
    term.surface = entry["surface"].get<std::string>();
    term.category = category;
    switch (category) {
      case MarkerCategory::gender_noun: term.realization = Realization::head_noun; break;
      case MarkerCategory::religion: term.realization = Realization::attributive; break;
      case MarkerCategory::disability: term.realization = Realization::attributive; break;
    }
    if (entry.contains("realization")) {
      if (!entry["realization"].is_string())
        throw ValidationError("registry: 'realization' must be a string");
      term.realization =
          parse_realization(entry["realization"].get<std::string>(), term.id);
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

}  // namespace

void TermRegistry::validate() const {
  if (nouns.empty())
    throw ValidationError("registry: at least one subject noun is required");
  std::set<std::string> seen_ids;
  validate_terms(nouns, MarkerCategory::gender_noun, seen_ids);
  validate_terms(religions, MarkerCategory::religion, seen_ids);
  validate_terms(disabilities, MarkerCategory::disability, seen_ids);
}

const MarkerTerm* TermRegistry::find(const std::string& id) const {
  for (const auto* list : {&nouns, &religions, &disabilities}) {
    for (const auto& term : *list) {
      if (term.id == id) return &term;
    }
  }
  return nullptr;
}

const MarkerTerm& TermRegistry::require(const std::string& id,
                                        MarkerCategory category) const {
  const MarkerTerm* term = find(id);
  if (term == nullptr)
    throw ValidationError("registry: unknown term id '" + id + "'");
  if (term->category != category)
    throw ValidationError("registry: term '" + id + "' is a " +
                          to_string(term->category) + ", expected " +
                          to_string(category));
  return *term;
}

std::size_t TermRegistry::battery_size() const {
  return nouns.size() * (1 + religions.size()) * (1 + disabilities.size());
}

nlohmann::json TermRegistry::canonical_json() const {
  return {{"nouns", terms_to_json(nouns)},
          {"religions", terms_to_json(religions)},
          {"disabilities", terms_to_json(disabilities)}};
}

TermRegistry default_registry() {
  TermRegistry reg;
  const auto noun = [](const char* id, const char* surface) {
    return MarkerTerm{id, surface, MarkerCategory::gender_noun,
                      Realization::head_noun};
  };
  const auto religion = [](const char* id, const char* surface) {
    return MarkerTerm{id, surface, MarkerCategory::religion,
                      Realization::attributive};
  };
  const auto disability = [](const char* id, const char* surface,
                             Realization realization) {
    return MarkerTerm{id, surface, MarkerCategory::disability, realization};
  };

  reg.nouns = {
      noun("man", "man"),
      noun("person", "person"),
      noun("transgender_person", "transgender person"),
      noun("woman", "woman"),
  };
  reg.religions = {
      religion("atheist", "atheist"),
      religion("buddhist", "Buddhist"),
      religion("christian", "Christian"),
      religion("hindu", "Hindu"),
      religion("jewish", "Jewish"),
      religion("muslim", "Muslim"),
  };
  reg.disabilities = {
      disability("autistic", "autistic", Realization::attributive),
      disability("blind", "blind", Realization::attributive),
      disability("cerebral_palsy", "with cerebral palsy",
                 Realization::postmodifier),
      disability("chronic_illness", "with chronic illness",
                 Realization::postmodifier),
      disability("deaf", "deaf", Realization::attributive),
      disability("down_syndrome", "with Down Syndrome",
                 Realization::postmodifier),
      disability("ocd", "with OCD", Realization::postmodifier),
      disability("schizophrenia", "with schizophrenia",
                 Realization::postmodifier),
      disability("wheelchair_user", "who uses a wheelchair",
                 Realization::postmodifier),
  };
  reg.validate();
  return reg;
}

TermRegistry load_registry(const nlohmann::json& config_document) {
  if (!config_document.is_object())
    throw ValidationError("config must be a JSON object");
  if (!config_document.contains("terms")) return default_registry();

  const nlohmann::json& terms = config_document["terms"];
  if (!terms.is_object())
    throw ValidationError("config: 'terms' must be an object");
  for (const auto& [key, _] : terms.items()) {
    if (key != "nouns" && key != "religions" && key != "disabilities")
      throw ValidationError("config: unknown key 'terms." + key + "'");
  }
  if (!terms.contains("nouns"))
    throw ValidationError("config: 'terms' needs a 'nouns' array");

  TermRegistry reg;
  reg.nouns = parse_terms(terms["nouns"], MarkerCategory::gender_noun, "nouns");
  if (terms.contains("religions"))
    reg.religions =
        parse_terms(terms["religions"], MarkerCategory::religion, "religions");
  if (terms.contains("disabilities"))
    reg.disabilities = parse_terms(terms["disabilities"],
                                   MarkerCategory::disability, "disabilities");
  reg.validate();
  return reg;
}

}  // namespace isect
