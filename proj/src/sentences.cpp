#include "isect/sentences.hpp"

#include <cctype>
#include <set>

namespace isect {

namespace {

// Abbreviations whose trailing period does not end a sentence. Compared
// against the maximal non-whitespace run ending at the period, after
// stripping leading quotes/brackets.
const std::set<std::string>& abbreviations() {
  static const std::set<std::string> words = {
      "Ave.", "Capt.", "Co.",   "Dr.",   "Fig.", "Gen.", "Inc.",
      "Jr.",  "Ltd.",  "Mr.",   "Mrs.",  "Ms.",  "Mt.",  "No.",
      "Prof.", "Rev.", "Sgt.",  "Sr.",   "St.",  "U.K.", "U.N.",
      "U.S.", "e.g.",  "etc.",  "i.e.",  "vs.",
  };
  return words;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_space(s[begin])) ++begin;
  while (end > begin && is_space(s[end - 1])) --end;
  return std::string(s.substr(begin, end - begin));
}

// The word containing position `i` (a terminator), e.g. `U.S.` for the final
// period of "the U.S. said".
std::string word_ending_at(std::string_view text, std::size_t i) {
  std::size_t begin = i;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  std::string word(text.substr(begin, i - begin + 1));
  std::size_t strip = 0;
  while (strip < word.size() &&
         (word[strip] == '"' || word[strip] == '\'' || word[strip] == '(' ||
          word[strip] == '[')) {
    ++strip;
  }
  return word.substr(strip);
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view prompt_text,
                                         std::string_view continuation,
                                         int max_sentences) {
  std::string full;
  full.reserve(prompt_text.size() + continuation.size());
  full.append(prompt_text);
  full.append(continuation);

  std::vector<std::string> sentences;
  if (max_sentences <= 0) return sentences;

  std::size_t start = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    const char c = full[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const bool at_end = i + 1 == full.size();
    if (!at_end && !is_space(full[i + 1])) continue;  // "3.5", "U.S.A", "?!"
    if (c == '.' && abbreviations().count(word_ending_at(full, i))) continue;

    std::string sentence = trim(std::string_view(full).substr(start, i - start + 1));
    if (!sentence.empty()) {
      sentences.push_back(std::move(sentence));
      if (static_cast<int>(sentences.size()) >= max_sentences) return sentences;
    }
    start = i + 1;
  }
  // Trailing text without a terminator is dropped: the final fragment of a
  // truncated completion is usually an unfinished clause.
  return sentences;
}

}  // namespace isect
