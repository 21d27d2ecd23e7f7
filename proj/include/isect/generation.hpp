#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "isect/battery.hpp"

namespace isect {

struct GenerationParams {
  int max_tokens = 64;
  double temperature = 1.0;
  double top_p = 1.0;
  int n_completions = 10;
  std::uint64_t seed = 42;
  std::vector<std::string> stop_sequences;  // applied client-side as well

  void validate() const;
  nlohmann::json canonical_json() const;
};

enum class BackendKind { stub, http };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& name);

struct ModelSpec {
  std::string model_id;  // [A-Za-z0-9._-]+, doubles as the cache file stem
  BackendKind backend = BackendKind::stub;
  std::string endpoint;      // http backend: e.g. "http://127.0.0.1:8080"
  std::string display_name;  // optional; reports fall back to model_id

  void validate() const;
};

// One cached completion; JSONL row shape:
// {"prompt_id":...,"model_id":...,"index":...,"raw_text":...}
struct CacheRow {
  std::string prompt_id;
  std::string model_id;
  int index = 0;
  std::string raw_text;
};

struct Completion {
  std::string prompt_id;
  std::string model_id;
  int index = 0;
  std::string raw_text;
  std::vector<std::string> sentences;  // prompt + continuation, split and capped
};

// Maps a surface substring (matched case-insensitively against the prompt
// text) to continuation templates. Used by the stub backend to plant biases
// for pipeline tests; an empty table yields neutral continuations.
using InjectionTable = std::map<std::string, std::vector<std::string>>;

// Deterministic offline backend: picks continuations by hashing
// (prompt_text, seed, completion index). Prompts matching injection entries
// draw from the merged matching pools (merged in key order), all others from
// built-in neutral templates that contain no default-lexicon valence tokens.
std::vector<std::string> stub_generate(const std::string& prompt_text,
                                       const GenerationParams& params,
                                       std::uint64_t seed,
                                       const InjectionTable& injections = {});

// Request body for POST <endpoint>/v1/completions. Keys: model, prompt,
// max_tokens, temperature, top_p, n, seed; stop only when non-empty.
nlohmann::json build_completion_request(const std::string& model_id,
                                        const std::string& prompt_text,
                                        const GenerationParams& params);

// Extracts choices[].text ordered by choices[].index, stripping an echoed
// prompt prefix. Throws BackendError on missing/odd fields.
std::vector<std::string> parse_completion_response(
    const nlohmann::json& response, const std::string& prompt_text);

// One blocking completion request. Reads ISECT_API_TOKEN for bearer auth.
// Throws BackendError on transport errors, non-2xx status, malformed bodies.
std::vector<std::string> http_generate(const std::string& endpoint,
                                       const std::string& model_id,
                                       const std::string& prompt_text,
                                       const GenerationParams& params,
                                       int timeout_s = 60);

struct GenerateOptions {
  InjectionTable injections;  // stub backend only
  int concurrency = 4;        // http backend in-flight requests
  int retries = 3;            // extra attempts after the first failure
  int backoff_base_ms = 1000; // doubled per retry
  int request_timeout_s = 60;
  // Test seam: replaces the backend call entirely when set.
  std::function<std::vector<std::string>(const PromptSpec&)> backend_override;
};

// Ensures every (prompt, index < n_completions) pair for this model exists in
// cache_dir/<model_id>.jsonl, requesting only what is missing, and returns
// all rows for the requested prompts sorted by (prompt_id, index). Appends
// one JSON line per completion as soon as its prompt's batch arrives, so an
// interrupted run resumes where it left off.
std::vector<CacheRow> generate(const ModelSpec& model,
                               const std::vector<PromptSpec>& prompts,
                               const GenerationParams& params,
                               const std::filesystem::path& cache_dir,
                               const GenerateOptions& options = {});

// Loads a model's cache file; rows are returned in file order. Tolerates a
// torn final line (truncates it) since such a tail means an interrupted run.
std::vector<CacheRow> load_cache(const std::filesystem::path& cache_file);

// Canonical row ordering used everywhere downstream so that cache file order
// never influences results.
void sort_cache_rows(std::vector<CacheRow>& rows);

Completion make_completion(const CacheRow& row, const std::string& prompt_text,
                           int sentence_cap = 3);

}  // namespace isect
