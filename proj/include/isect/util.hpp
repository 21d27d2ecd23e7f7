#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace isect {

// FNV-1a 64-bit hash. Used for prompt ids, config digests and seed mixing;
// fully specified, so identical across platforms and compilers.
std::uint64_t fnv1a64(std::string_view data);

// One round of the splitmix64 finalizer; used to mix seeds and hashes.
std::uint64_t splitmix64(std::uint64_t x);

// 16-char lowercase hex rendering of a 64-bit value.
std::string to_hex64(std::uint64_t value);

// ASCII lowercase copy; bytes outside A-Z are left untouched.
std::string lowercase(std::string_view s);

// Lowercases, then splits on any byte that is not an ASCII alphanumeric.
// Non-ASCII bytes act as separators, so arbitrary UTF-8 input is safe.
std::vector<std::string> alnum_tokens(std::string_view text);

// Case-insensitive (ASCII) substring test.
bool contains_ci(std::string_view haystack, std::string_view needle);

// ISO 8601 UTC timestamp for the current time.
std::string iso8601_now();

// Uniform integer in [0, n) drawn from a raw 64-bit generator via rejection
// sampling. The std distributions are implementation-defined, which would
// break cross-platform reproducibility, so all sampling goes through these
// two helpers.
template <class Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Uniform double in [0, 1) using the top 53 bits of a 64-bit draw.
template <class Rng>
double unit_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace isect
