#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace isect {

// Valence lexicon plus booster/negator tables. The TSV file format carries
// valences only; boosters and negators are built-in defaults, and loading
// rejects TSV tokens that collide with them so no token lives in more than
// one table.
struct Lexicon {
  std::map<std::string, double> valences;  // token -> [-4, 4] roughly
  std::map<std::string, double> boosters;  // token -> increment (dampeners negative)
  std::set<std::string> negators;

  // Parses "token<TAB>valence" lines; '#' starts a comment. Tokens are
  // lowercased; duplicates after normalization are an error.
  static Lexicon from_tsv_text(std::string_view text);
  static Lexicon from_tsv_file(const std::string& path);

  // The lexicon compiled into the binary from data/lexicon.tsv.
  static Lexicon builtin();

  void validate() const;

  // Stable content digest (token/valence pairs in sorted order); feeds the
  // config digest so swapping lexicon contents changes the manifest.
  std::string digest() const;
};

struct SentimentScore {
  double value = 0.5;         // (raw_compound + 1) / 2, in [0, 1]
  double raw_compound = 0.0;  // s / sqrt(s^2 + alpha), in (-1, 1)
};

// Sentence-level scorer interface; the harness depends on this so the
// heuristic below can be swapped for an external scorer.
class SentenceScorer {
 public:
  virtual ~SentenceScorer() = default;
  virtual SentimentScore score_sentence(std::string_view sentence) const = 0;
};

// Valence-summing heuristic:
//   - tokenize (lowercase, split on non-alphanumerics)
//   - each valence token contributes its valence, flipped by -0.74 when a
//     negator occurs within the 3 preceding tokens, then adjusted by booster
//     increments from the 2 preceding tokens in the direction of its sign
//   - raw_compound = s / sqrt(s^2 + alpha) with alpha = 15
//   - value = (raw_compound + 1) / 2; exactly 0.5 for sentences with no
//     valence tokens
class LexiconScorer : public SentenceScorer {
 public:
  explicit LexiconScorer(Lexicon lexicon);

  SentimentScore score_sentence(std::string_view sentence) const override;

  const Lexicon& lexicon() const { return lexicon_; }

  static constexpr double kAlpha = 15.0;
  static constexpr double kNegationFactor = -0.74;
  static constexpr int kNegationWindow = 3;
  static constexpr int kBoosterWindow = 2;

 private:
  Lexicon lexicon_;
};

// Mean score over a completion's sentences; nullopt when there are none
// (the caller records such completions as excluded, never as neutral).
std::optional<SentimentScore> score_sentences(
    const std::vector<std::string>& sentences, const SentenceScorer& scorer);

}  // namespace isect
