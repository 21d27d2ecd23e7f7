#include "isect/sentiment.hpp"

#include <cmath>
#include <sstream>

#include "isect/builtin_data.hpp"
#include "isect/errors.hpp"
#include "isect/jsonl.hpp"
#include "isect/util.hpp"

namespace isect {

namespace {

std::map<std::string, double> default_boosters() {
  // Increment applied in the direction of the valence's sign; dampeners
  // carry negative increments.
  constexpr double kUp = 0.293;
  constexpr double kDown = -0.293;
  return {
      {"absolutely", kUp},  {"completely", kUp}, {"deeply", kUp},
      {"especially", kUp},  {"extremely", kUp},  {"highly", kUp},
      {"incredibly", kUp},  {"particularly", kUp}, {"really", kUp},
      {"remarkably", kUp},  {"so", kUp},         {"thoroughly", kUp},
      {"totally", kUp},     {"truly", kUp},      {"utterly", kUp},
      {"very", kUp},
      {"almost", kDown},    {"barely", kDown},   {"fairly", kDown},
      {"marginally", kDown}, {"partly", kDown},  {"slightly", kDown},
      {"somewhat", kDown},
  };
}

std::set<std::string> default_negators() {
  // Bare contraction stems ("isn", "don") appear because the tokenizer
  // splits on the apostrophe; stems that collide with real words ("can",
  // "won") are left out, trading those contractions' negations away for
  // unambiguous tokens.
  return {
      "ain",     "aren",    "cannot",  "couldn",  "didn",   "doesn",
      "don",     "hadn",    "hardly",  "hasn",    "haven",  "isn",
      "mustn",   "needn",   "neither", "never",   "no",     "nobody",
      "none",    "nor",     "not",     "nothing", "nowhere", "rarely",
      "scarcely", "seldom", "shouldn", "wasn",    "weren",  "without",
      "wouldn",
  };
}

}  // namespace

Lexicon Lexicon::from_tsv_text(std::string_view text) {
  Lexicon lex;
  lex.boosters = default_boosters();
  lex.negators = default_negators();

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw ValidationError("lexicon line " + std::to_string(line_no) +
                            ": expected 'token<TAB>valence'");
    const std::string token = lowercase(line.substr(0, tab));
    const std::string value_text = line.substr(tab + 1);
    double valence = 0.0;
    try {
      std::size_t used = 0;
      valence = std::stod(value_text, &used);
      if (used != value_text.size()) throw std::invalid_argument(value_text);
    } catch (const std::exception&) {
      throw ValidationError("lexicon line " + std::to_string(line_no) +
                            ": bad valence '" + value_text + "'");
    }
    if (alnum_tokens(token) != std::vector<std::string>{token})
      throw ValidationError("lexicon line " + std::to_string(line_no) +
                            ": token '" + token +
                            "' would never match the tokenizer's output");
    if (!lex.valences.emplace(token, valence).second)
      throw ValidationError("lexicon line " + std::to_string(line_no) +
                            ": duplicate token '" + token + "'");
  }
  lex.validate();
  return lex;
}

Lexicon Lexicon::from_tsv_file(const std::string& path) {
  return from_tsv_text(read_text_file(path));
}

Lexicon Lexicon::builtin() { return from_tsv_text(embedded::kLexiconTsv); }

void Lexicon::validate() const {
  if (valences.empty())
    throw ValidationError("lexicon: no valence entries");
  for (const auto& [token, valence] : valences) {
    if (!(valence >= -10.0 && valence <= 10.0))
      throw ValidationError("lexicon: token '" + token +
                            "' has out-of-range valence");
    if (boosters.count(token) || negators.count(token))
      throw ValidationError("lexicon: token '" + token +
                            "' appears in more than one table");
  }
  for (const auto& [token, _] : boosters) {
    if (negators.count(token))
      throw ValidationError("lexicon: token '" + token +
                            "' appears in more than one table");
  }
}

std::string Lexicon::digest() const {
  // std::map iterates in sorted token order, so the digest is canonical.
  std::string material;
  for (const auto& [token, valence] : valences) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", valence);
    material += token;
    material += '=';
    material += buf;
    material += '\n';
  }
  return to_hex64(fnv1a64(material));
}

LexiconScorer::LexiconScorer(Lexicon lexicon) : lexicon_(std::move(lexicon)) {
  lexicon_.validate();
}

SentimentScore LexiconScorer::score_sentence(std::string_view sentence) const {
  const std::vector<std::string> tokens = alnum_tokens(sentence);
  double sum = 0.0;
  bool any_valence = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto it = lexicon_.valences.find(tokens[i]);
    if (it == lexicon_.valences.end()) continue;
    any_valence = true;
    double valence = it->second;

    bool negated = false;
    for (int back = 1; back <= kNegationWindow && back <= static_cast<int>(i);
         ++back) {
      if (lexicon_.negators.count(tokens[i - back])) {
        negated = true;
        break;
      }
    }
    if (negated) valence *= kNegationFactor;

    double boost = 0.0;
    for (int back = 1; back <= kBoosterWindow && back <= static_cast<int>(i);
         ++back) {
      const auto booster = lexicon_.boosters.find(tokens[i - back]);
      if (booster != lexicon_.boosters.end()) boost += booster->second;
    }
    if (valence > 0.0) {
      valence += boost;
    } else if (valence < 0.0) {
      valence -= boost;
    }
    sum += valence;
  }

  SentimentScore score;
  if (!any_valence) {
    score.raw_compound = 0.0;
    score.value = 0.5;  // neutral by definition, never an exclusion
    return score;
  }
  score.raw_compound = sum / std::sqrt(sum * sum + kAlpha);
  score.value = (score.raw_compound + 1.0) / 2.0;
  return score;
}

std::optional<SentimentScore> score_sentences(
    const std::vector<std::string>& sentences, const SentenceScorer& scorer) {
  if (sentences.empty()) return std::nullopt;
  double value_sum = 0.0;
  double raw_sum = 0.0;
  for (const auto& sentence : sentences) {
    const SentimentScore s = scorer.score_sentence(sentence);
    value_sum += s.value;
    raw_sum += s.raw_compound;
  }
  SentimentScore mean;
  mean.value = value_sum / static_cast<double>(sentences.size());
  mean.raw_compound = raw_sum / static_cast<double>(sentences.size());
  return mean;
}

}  // namespace isect
