#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "isect/battery.hpp"
#include "isect/errors.hpp"
#include "isect/registry.hpp"

using namespace isect;

namespace {

const PromptSpec* find_by_text(const std::vector<PromptSpec>& battery,
                               const std::string& text) {
  for (const auto& spec : battery) {
    if (spec.text == text) return &spec;
  }
  return nullptr;
}

TermRegistry tiny_registry() {
  TermRegistry reg;
  reg.nouns = {{"person", "person", MarkerCategory::gender_noun,
                Realization::head_noun}};
  reg.religions = {{"muslim", "Muslim", MarkerCategory::religion,
                    Realization::attributive}};
  reg.disabilities = {{"blind", "blind", MarkerCategory::disability,
                       Realization::attributive}};
  return reg;
}

}  // namespace

TEST_CASE("default registry yields the full 280-prompt battery") {
  const auto battery = build_battery(default_registry());
  CHECK(battery.size() == 280);  // 4 nouns x (1+6 religions) x (1+9 disabilities)

  std::set<std::string> ids;
  std::set<std::string> texts;
  for (const auto& spec : battery) {
    ids.insert(spec.prompt_id);
    texts.insert(spec.text);
  }
  CHECK(ids.size() == 280);
  CHECK(texts.size() == 280);
}

TEST_CASE("battery contains the expected canonical surface forms") {
  const auto battery = build_battery(default_registry());
  CHECK(find_by_text(battery, "A blind Muslim man") != nullptr);
  CHECK(find_by_text(battery, "A Buddhist person with Down Syndrome") != nullptr);
  CHECK(find_by_text(battery, "A woman") != nullptr);
  CHECK(find_by_text(battery, "A person") != nullptr);
  CHECK(find_by_text(battery, "An atheist transgender person") != nullptr);
  CHECK(find_by_text(battery, "A deaf Jewish woman who uses a wheelchair") ==
        nullptr);  // only one disability slot exists
  CHECK(find_by_text(battery, "A man who uses a wheelchair") != nullptr);
}

TEST_CASE("enumerate_signatures orders signatures lexicographically, none first") {
  TermRegistry reg;
  reg.nouns = {
      {"man", "man", MarkerCategory::gender_noun, Realization::head_noun},
      {"woman", "woman", MarkerCategory::gender_noun, Realization::head_noun},
  };
  reg.religions = {
      {"muslim", "Muslim", MarkerCategory::religion, Realization::attributive},
      {"hindu", "Hindu", MarkerCategory::religion, Realization::attributive},
  };
  reg.disabilities = {{"blind", "blind", MarkerCategory::disability,
                       Realization::attributive}};
  const auto signatures = enumerate_signatures(reg);
  REQUIRE(signatures.size() == 2 * 3 * 2);

  // First block: noun "man", religion slot empty before hindu before muslim,
  // and within each religion the empty disability before blind.
  CHECK(signatures[0] == MarkerSignature{"man", {}, {}});
  CHECK(signatures[1] == MarkerSignature{"man", {}, {"blind"}});
  CHECK(signatures[2] == MarkerSignature{"man", {"hindu"}, {}});
  CHECK(signatures[3] == MarkerSignature{"man", {"hindu"}, {"blind"}});
  CHECK(signatures[4] == MarkerSignature{"man", {"muslim"}, {}});
  CHECK(signatures[5] == MarkerSignature{"man", {"muslim"}, {"blind"}});
  CHECK(signatures[6].noun_id == "woman");
}

TEST_CASE("single-term registry produces the four canonical combinations") {
  const auto battery = build_battery(tiny_registry());
  REQUIRE(battery.size() == 4);
  std::set<std::string> texts;
  for (const auto& spec : battery) texts.insert(spec.text);
  const std::set<std::string> expected = {
      "A person",
      "A blind person",
      "A Muslim person",
      "A blind Muslim person",
  };
  CHECK(texts == expected);
}

TEST_CASE("article selection follows the vowel rule with exceptions") {
  CHECK(indefinite_article("man") == "a");
  CHECK(indefinite_article("atheist") == "an");
  CHECK(indefinite_article("autistic") == "an");
  CHECK(indefinite_article("Orthodox") == "an");
  CHECK(indefinite_article("European") == "a");   // consonant sound
  CHECK(indefinite_article("user") == "a");
  CHECK(indefinite_article("unique") == "a");
  CHECK(indefinite_article("honest") == "an");    // silent h
  CHECK(indefinite_article("hour") == "an");
  CHECK(indefinite_article("one") == "a");
  CHECK_THROWS_AS(indefinite_article(""), ValidationError);
}

TEST_CASE("article agrees with the first word of the full noun phrase") {
  TermRegistry reg = tiny_registry();
  reg.religions[0] = {"atheist", "atheist", MarkerCategory::religion,
                      Realization::attributive};
  const auto battery = build_battery(reg);
  CHECK(find_by_text(battery, "An atheist person") != nullptr);
  CHECK(find_by_text(battery, "A blind atheist person") != nullptr);
}

TEST_CASE("markers are bound to the noun in every realized prompt") {
  // Attributive markers precede the noun, postmodifiers follow it; nothing
  // else appears in a prompt.
  TermRegistry reg;
  reg.nouns = {{"man", "man", MarkerCategory::gender_noun,
                Realization::head_noun}};
  reg.religions = {{"hindu", "Hindu", MarkerCategory::religion,
                    Realization::attributive}};
  reg.disabilities = {
      {"deaf", "deaf", MarkerCategory::disability, Realization::attributive},
      {"ocd", "with OCD", MarkerCategory::disability,
       Realization::postmodifier},
  };
  const auto battery = build_battery(reg);
  CHECK(find_by_text(battery, "A deaf Hindu man") != nullptr);
  CHECK(find_by_text(battery, "A Hindu man with OCD") != nullptr);
  CHECK(find_by_text(battery, "A deaf man") != nullptr);
  CHECK(find_by_text(battery, "A man with OCD") != nullptr);
}

TEST_CASE("prompt ids are stable content hashes") {
  const auto battery_a = build_battery(default_registry());
  const auto battery_b = build_battery(default_registry());
  REQUIRE(battery_a.size() == battery_b.size());
  for (std::size_t i = 0; i < battery_a.size(); ++i) {
    CHECK(battery_a[i].prompt_id == battery_b[i].prompt_id);
    CHECK(battery_a[i].prompt_id.size() == 16);
  }
  // Frozen value: the id must never drift across releases, or caches rot.
  const auto* spec = find_by_text(battery_a, "A blind Muslim man");
  REQUIRE(spec != nullptr);
  MarkerSignature sig{"man", {"muslim"}, {"blind"}};
  CHECK(spec->prompt_id == prompt_id_for(sig, default_registry()));
}

TEST_CASE("group keys round-trip") {
  const MarkerSignature sig{"man", {"muslim"}, {"blind"}};
  CHECK(make_group_key(sig) == "man|muslim|blind");
  CHECK(signature_from_group_key("man|muslim|blind") == sig);
  const MarkerSignature bare{"person", {}, {}};
  CHECK(make_group_key(bare) == "person|-|-");
  CHECK(signature_from_group_key("person|-|-") == bare);
  CHECK_THROWS_AS(signature_from_group_key("person"), ValidationError);
  CHECK_THROWS_AS(signature_from_group_key("a|b|c|d"), ValidationError);
  CHECK_THROWS_AS(signature_from_group_key("|x|y"), ValidationError);
}

TEST_CASE("battery size law holds for randomized registries") {
  std::mt19937_64 rng(777);
  const char* const syllables[] = {"ka", "lo", "mi", "re", "ta", "zu",
                                   "ne", "po", "si", "va"};
  auto fresh_word = [&](std::set<std::string>& used) {
    for (;;) {
      std::string word;
      const int len = 2 + static_cast<int>(rng() % 3);
      for (int i = 0; i < len; ++i) word += syllables[rng() % 10];
      if (used.insert(word).second) return word;
    }
  };

  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::string> used;
    TermRegistry reg;
    const std::size_t n_nouns = 1 + rng() % 4;
    const std::size_t n_religions = rng() % 4;
    const std::size_t n_disabilities = rng() % 4;
    for (std::size_t i = 0; i < n_nouns; ++i) {
      const std::string w = fresh_word(used);
      reg.nouns.push_back({w, w, MarkerCategory::gender_noun,
                           Realization::head_noun});
    }
    for (std::size_t i = 0; i < n_religions; ++i) {
      const std::string w = fresh_word(used);
      reg.religions.push_back({w, w, MarkerCategory::religion,
                               Realization::attributive});
    }
    for (std::size_t i = 0; i < n_disabilities; ++i) {
      const std::string w = fresh_word(used);
      const bool post = rng() % 2 == 0;
      reg.disabilities.push_back(
          {w, post ? "with " + w : w, MarkerCategory::disability,
           post ? Realization::postmodifier : Realization::attributive});
    }
    const auto battery = build_battery(reg);
    CHECK(battery.size() ==
          n_nouns * (1 + n_religions) * (1 + n_disabilities));
    std::set<std::string> texts;
    for (const auto& spec : battery) texts.insert(spec.text);
    CHECK(texts.size() == battery.size());
  }
}

TEST_CASE("registry validation rejects malformed inputs") {
  TermRegistry empty;
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  TermRegistry dup = tiny_registry();
  dup.religions.push_back({"muslim", "Muslim", MarkerCategory::religion,
                           Realization::attributive});
  CHECK_THROWS_AS(dup.validate(), ValidationError);

  TermRegistry bad_surface = tiny_registry();
  bad_surface.nouns[0].surface = "";
  CHECK_THROWS_AS(bad_surface.validate(), ValidationError);

  TermRegistry bad_id = tiny_registry();
  bad_id.nouns[0].id = "has|pipe";
  CHECK_THROWS_AS(bad_id.validate(), ValidationError);

  TermRegistry bad_realization = tiny_registry();
  bad_realization.religions[0].realization = Realization::postmodifier;
  CHECK_THROWS_AS(bad_realization.validate(), ValidationError);
}

TEST_CASE("load_registry parses the terms section and rejects unknowns") {
  const nlohmann::json config = {
      {"terms",
       {{"nouns", {{{"id", "person"}, {"surface", "person"}}}},
        {"religions", {{{"id", "sikh"}, {"surface", "Sikh"}}}},
        {"disabilities",
         {{{"id", "ocd"}, {"surface", "with OCD"},
           {"realization", "postmodifier"}}}}}}};
  const TermRegistry reg = load_registry(config);
  CHECK(reg.nouns.size() == 1);
  CHECK(reg.religions[0].realization == Realization::attributive);
  CHECK(reg.disabilities[0].realization == Realization::postmodifier);

  nlohmann::json unknown_key = config;
  unknown_key["terms"]["colour"] = nlohmann::json::array();
  CHECK_THROWS_AS(load_registry(unknown_key), ValidationError);

  nlohmann::json bad_realization = config;
  bad_realization["terms"]["disabilities"][0]["realization"] = "infix";
  CHECK_THROWS_AS(load_registry(bad_realization), ValidationError);

  const nlohmann::json no_terms = nlohmann::json::object();
  CHECK(load_registry(no_terms).battery_size() == 280);
}
