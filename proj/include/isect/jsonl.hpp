#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "json.hpp"

namespace isect {

struct JsonlReadResult {
  std::vector<nlohmann::json> rows;
  // Byte offset of a torn (unparseable, unterminated) final line left behind
  // by an interrupted writer. Callers that append should truncate the file to
  // this offset first. Set only for the last line; malformed interior lines
  // raise a ValidationError instead.
  std::optional<std::uintmax_t> torn_tail_offset;
};

// Reads a JSONL file. A missing file yields an empty result; blank lines are
// skipped.
JsonlReadResult read_jsonl(const std::filesystem::path& path);

// Serializes `row` on one line and appends it, including the trailing
// newline, in a single buffered write followed by a flush.
void append_jsonl_line(std::ofstream& out, const nlohmann::json& row);

// Writes an entire JSONL file (used for score files written in one pass).
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& rows);

// Reads a whole file into a string; throws ValidationError when unreadable.
std::string read_text_file(const std::filesystem::path& path);

// Writes a string to a file, creating parent directories as needed.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace isect
