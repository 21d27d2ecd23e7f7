#include "isect/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "isect/errors.hpp"

namespace isect {

JsonlReadResult read_jsonl(const std::filesystem::path& path) {
  JsonlReadResult result;
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return result;

  std::string line;
  std::uintmax_t offset = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool had_newline = !in.eof();
    const std::uintmax_t line_start = offset;
    offset += line.size() + (had_newline ? 1 : 0);
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      if (in.peek() == std::ifstream::traits_type::eof()) {
        // A torn final line from an interrupted writer; report its offset so
        // the appender can truncate before continuing.
        result.torn_tail_offset = line_start;
        return result;
      }
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed JSON line");
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

void append_jsonl_line(std::ofstream& out, const nlohmann::json& row) {
  std::string line = row.dump();
  line.push_back('\n');
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw ValidationError("failed writing JSONL line");
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open())
    throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& row : rows) {
    out << row.dump() << '\n';
  }
  out.flush();
  if (!out) throw ValidationError("failed writing: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open())
    throw ValidationError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.is_open())
    throw ValidationError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw ValidationError("failed writing: " + path.string());
}

}  // namespace isect
