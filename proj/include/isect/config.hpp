#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isect/generation.hpp"
#include "isect/registry.hpp"
#include "isect/topics.hpp"

namespace isect {

struct AnalysisConfig {
  double alpha_level = 0.05;
  std::string correction = "holm";
  int high_low_q = 5;
  int bootstrap_resamples = 1000;
  std::uint64_t seed = 42;
  std::string baseline_noun = "person";

  std::string baseline_key() const { return baseline_noun + "|-|-"; }
};

struct TopicsConfig {
  TopicModelParams params;
  int top_terms = 10;
  std::string granularity = "pool";   // or "prompt"
  std::string stopwords_path;         // empty -> built-in list
};

struct SentimentConfig {
  std::string lexicon_path;  // empty -> built-in lexicon
  int sentence_cap = 3;
};

struct GenerationConfig {
  GenerationParams params;
  std::vector<ModelSpec> models;
  InjectionTable stub_injections;
  int concurrency = 4;
  int retries = 3;
  int backoff_base_ms = 1000;
  int request_timeout_s = 60;
};

struct PathsConfig {
  std::filesystem::path root = "out";
  std::filesystem::path cache_dir;     // default <root>/cache
  std::filesystem::path scores_dir;    // default <root>/scores
  std::filesystem::path findings_dir;  // default <root>/findings
  std::filesystem::path topics_dir;    // default <root>/topics
  std::filesystem::path report_dir;    // default <root>/report

  void apply_defaults();
};

struct AuditConfig {
  int schema = 1;
  TermRegistry registry;
  GenerationConfig generation;
  SentimentConfig sentiment;
  AnalysisConfig analysis;
  TopicsConfig topics;
  PathsConfig paths;

  // Resolved content digests of the active lexicon/stopword data; these feed
  // the config digest so swapping data contents invalidates derived outputs.
  std::string lexicon_digest;
  std::string stopwords_digest;

  void validate() const;

  // Canonical JSON with every default materialized. Deliberately excludes
  // the paths section: output locations do not affect results, so runs into
  // different directories stay byte-identical.
  nlohmann::json canonical_json() const;

  // 16-hex-char digest of the canonical JSON.
  std::string digest() const;

  // Per-stage digests over just the sections a stage's outputs depend on.
  std::string generation_digest() const;
  std::string score_digest() const;
  std::string analyze_digest() const;
  std::string topics_digest() const;
};

// Parses and validates a config document. `seed_override`, when set, replaces
// the generation, analysis and topics seeds (the CLI --seed flag). Unknown
// keys anywhere are a ValidationError, as is a missing/mismatched "schema".
AuditConfig parse_config(const nlohmann::json& document,
                         std::optional<std::uint64_t> seed_override = {});
AuditConfig load_config(const std::filesystem::path& path,
                        std::optional<std::uint64_t> seed_override = {});

}  // namespace isect
