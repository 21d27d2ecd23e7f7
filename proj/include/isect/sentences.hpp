#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace isect {

// Splits prompt + continuation into sentences on '.', '!' and '?' followed by
// whitespace or end-of-text, with an abbreviation guard (Dr., e.g., U.S., ...)
// for periods. Keeps at most `max_sentences`; trailing text without a
// terminator is dropped. The prompt is part of the first sentence.
std::vector<std::string> split_sentences(std::string_view prompt_text,
                                         std::string_view continuation,
                                         int max_sentences = 3);

}  // namespace isect
