#include "isect/config.hpp"

#include <algorithm>
#include <set>

#include "isect/errors.hpp"
#include "isect/jsonl.hpp"
#include "isect/sentiment.hpp"
#include "isect/util.hpp"
#include "isect/version.hpp"

namespace isect {

namespace {

// Typed access to one config section with unknown-key rejection, so typos
// fail loudly instead of silently using defaults.
class Section {
 public:
  Section(const nlohmann::json& parent, const std::string& name,
          std::set<std::string> allowed)
      : name_(name), allowed_(std::move(allowed)) {
    if (!parent.contains(name)) {
      object_ = nlohmann::json::object();
      return;
    }
    if (!parent[name].is_object())
      throw ValidationError("config: '" + name + "' must be an object");
    object_ = parent[name];
    for (const auto& [key, _] : object_.items()) {
      if (!allowed_.count(key))
        throw ValidationError("config: unknown key '" + name + "." + key + "'");
    }
  }

  bool has(const char* key) const { return object_.contains(key); }

  const nlohmann::json& raw(const char* key) const { return object_.at(key); }

  template <typename T>
  T get(const char* key, T fallback) const {
    if (!object_.contains(key)) return fallback;
    try {
      return object_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config: '" + name_ + "." + std::string(key) +
                            "' has the wrong type");
    }
  }

 private:
  std::string name_;
  std::set<std::string> allowed_;
  nlohmann::json object_;
};

GenerationConfig parse_generation(const nlohmann::json& document) {
  Section section(document, "generation",
                  {"max_tokens", "temperature", "top_p", "n_completions",
                   "seed", "stop_sequences", "models", "stub_injections",
                   "concurrency", "retries", "backoff_base_ms",
                   "request_timeout_s"});
  GenerationConfig gen;
  gen.params.max_tokens = section.get<int>("max_tokens", 64);
  gen.params.temperature = section.get<double>("temperature", 1.0);
  gen.params.top_p = section.get<double>("top_p", 1.0);
  gen.params.n_completions = section.get<int>("n_completions", 10);
  gen.params.seed = section.get<std::uint64_t>("seed", 42);
  gen.params.stop_sequences =
      section.get<std::vector<std::string>>("stop_sequences", {});
  gen.params.validate();

  gen.concurrency = section.get<int>("concurrency", 4);
  gen.retries = section.get<int>("retries", 3);
  gen.backoff_base_ms = section.get<int>("backoff_base_ms", 1000);
  gen.request_timeout_s = section.get<int>("request_timeout_s", 60);
  if (gen.concurrency < 1)
    throw ValidationError("config: generation.concurrency must be >= 1");
  if (gen.retries < 0)
    throw ValidationError("config: generation.retries must be >= 0");
  if (gen.backoff_base_ms < 0)
    throw ValidationError("config: generation.backoff_base_ms must be >= 0");
  if (gen.request_timeout_s < 1)
    throw ValidationError("config: generation.request_timeout_s must be >= 1");

  if (section.has("models")) {
    if (!section.raw("models").is_array())
      throw ValidationError("config: generation.models must be an array");
    for (const auto& entry : section.raw("models")) {
      if (!entry.is_object())
        throw ValidationError("config: generation.models entries must be objects");
      for (const auto& [key, _] : entry.items()) {
        if (key != "model_id" && key != "backend" && key != "endpoint" &&
            key != "display_name")
          throw ValidationError("config: unknown key 'generation.models[]." +
                                key + "'");
      }
      ModelSpec model;
      if (!entry.contains("model_id") || !entry["model_id"].is_string())
        throw ValidationError("config: model entries need a string model_id");
      model.model_id = entry["model_id"].get<std::string>();
      if (entry.contains("backend"))
        model.backend =
            backend_kind_from_string(entry["backend"].get<std::string>());
      if (entry.contains("endpoint"))
        model.endpoint = entry["endpoint"].get<std::string>();
      if (entry.contains("display_name"))
        model.display_name = entry["display_name"].get<std::string>();
      model.validate();
      gen.models.push_back(std::move(model));
    }
    std::set<std::string> ids;
    for (const auto& model : gen.models) {
      if (!ids.insert(model.model_id).second)
        throw ValidationError("config: duplicate model_id '" + model.model_id +
                              "'");
    }
  }
  if (gen.models.empty()) {
    ModelSpec model;
    model.model_id = "stub-model";
    model.backend = BackendKind::stub;
    gen.models.push_back(std::move(model));
  }

  if (section.has("stub_injections")) {
    const auto& table = section.raw("stub_injections");
    if (!table.is_object())
      throw ValidationError(
          "config: generation.stub_injections must map surface strings to "
          "arrays of continuations");
    for (const auto& [surface, pool] : table.items()) {
      if (surface.empty())
        throw ValidationError(
            "config: generation.stub_injections keys must be non-empty");
      if (!pool.is_array())
        throw ValidationError("config: generation.stub_injections['" + surface +
                              "'] must be an array of strings");
      std::vector<std::string> templates;
      for (const auto& t : pool) {
        if (!t.is_string())
          throw ValidationError("config: generation.stub_injections['" +
                                surface + "'] must contain only strings");
        templates.push_back(t.get<std::string>());
      }
      gen.stub_injections.emplace(surface, std::move(templates));
    }
  }
  return gen;
}

SentimentConfig parse_sentiment(const nlohmann::json& document) {
  Section section(document, "sentiment", {"lexicon_path", "sentence_cap"});
  SentimentConfig sentiment;
  sentiment.lexicon_path = section.get<std::string>("lexicon_path", "");
  sentiment.sentence_cap = section.get<int>("sentence_cap", 3);
  if (sentiment.sentence_cap < 1)
    throw ValidationError("config: sentiment.sentence_cap must be >= 1");
  return sentiment;
}

AnalysisConfig parse_analysis(const nlohmann::json& document) {
  Section section(document, "analysis",
                  {"alpha_level", "correction", "high_low_q",
                   "bootstrap_resamples", "seed", "baseline_noun"});
  AnalysisConfig analysis;
  analysis.alpha_level = section.get<double>("alpha_level", 0.05);
  analysis.correction = section.get<std::string>("correction", "holm");
  analysis.high_low_q = section.get<int>("high_low_q", 5);
  analysis.bootstrap_resamples = section.get<int>("bootstrap_resamples", 1000);
  analysis.seed = section.get<std::uint64_t>("seed", 42);
  analysis.baseline_noun = section.get<std::string>("baseline_noun", "person");
  if (!(analysis.alpha_level > 0.0 && analysis.alpha_level < 1.0))
    throw ValidationError("config: analysis.alpha_level must lie in (0, 1)");
  if (analysis.correction != "holm")
    throw ValidationError("config: analysis.correction only supports 'holm'");
  if (analysis.high_low_q < 1)
    throw ValidationError("config: analysis.high_low_q must be >= 1");
  if (analysis.bootstrap_resamples < 2)
    throw ValidationError("config: analysis.bootstrap_resamples must be >= 2");
  return analysis;
}

TopicsConfig parse_topics(const nlohmann::json& document) {
  Section section(document, "topics",
                  {"k", "alpha", "beta", "iterations", "seed", "top_terms",
                   "granularity", "stopwords_path"});
  TopicsConfig topics;
  topics.params.k = section.get<int>("k", 5);
  // The usual 50/k heuristic unless alpha is given explicitly.
  topics.params.alpha =
      section.get<double>("alpha", 50.0 / std::max(1, topics.params.k));
  topics.params.beta = section.get<double>("beta", 0.01);
  topics.params.iterations = section.get<int>("iterations", 500);
  topics.params.seed = section.get<std::uint64_t>("seed", 42);
  topics.params.validate();
  topics.top_terms = section.get<int>("top_terms", 10);
  topics.granularity = section.get<std::string>("granularity", "pool");
  topics.stopwords_path = section.get<std::string>("stopwords_path", "");
  if (topics.top_terms < 1)
    throw ValidationError("config: topics.top_terms must be >= 1");
  if (topics.granularity != "pool" && topics.granularity != "prompt")
    throw ValidationError(
        "config: topics.granularity must be 'pool' or 'prompt'");
  return topics;
}

PathsConfig parse_paths(const nlohmann::json& document) {
  Section section(document, "paths",
                  {"root", "cache_dir", "scores_dir", "findings_dir",
                   "topics_dir", "report_dir"});
  PathsConfig paths;
  paths.root = section.get<std::string>("root", "out");
  paths.cache_dir = section.get<std::string>("cache_dir", "");
  paths.scores_dir = section.get<std::string>("scores_dir", "");
  paths.findings_dir = section.get<std::string>("findings_dir", "");
  paths.topics_dir = section.get<std::string>("topics_dir", "");
  paths.report_dir = section.get<std::string>("report_dir", "");
  paths.apply_defaults();
  return paths;
}

}  // namespace

void PathsConfig::apply_defaults() {
  if (cache_dir.empty()) cache_dir = root / "cache";
  if (scores_dir.empty()) scores_dir = root / "scores";
  if (findings_dir.empty()) findings_dir = root / "findings";
  if (topics_dir.empty()) topics_dir = root / "topics";
  if (report_dir.empty()) report_dir = root / "report";
}

void AuditConfig::validate() const {
  if (schema != kConfigSchemaVersion)
    throw ValidationError("config: unsupported schema version " +
                          std::to_string(schema) + " (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
  registry.validate();
  generation.params.validate();
  if (generation.models.empty())
    throw ValidationError("config: at least one model is required");
  for (const auto& model : generation.models) model.validate();
  const MarkerTerm* baseline = registry.find(analysis.baseline_noun);
  if (baseline == nullptr ||
      baseline->category != MarkerCategory::gender_noun)
    throw ValidationError("config: analysis.baseline_noun '" +
                          analysis.baseline_noun +
                          "' is not a noun in the registry");
}

nlohmann::json AuditConfig::canonical_json() const {
  // Every field that can change derived-output BYTES appears here with its
  // default materialized. Output paths and transport tuning (concurrency,
  // retries, backoff, timeout) cannot change results, so they are excluded:
  // semantically identical runs into different directories must match.
  nlohmann::json models = nlohmann::json::array();
  {
    std::vector<ModelSpec> sorted = generation.models;
    std::sort(sorted.begin(), sorted.end(),
              [](const ModelSpec& a, const ModelSpec& b) {
                return a.model_id < b.model_id;
              });
    for (const auto& model : sorted) {
      models.push_back({{"model_id", model.model_id},
                        {"backend", to_string(model.backend)},
                        {"endpoint", model.endpoint},
                        {"display_name", model.display_name}});
    }
  }
  nlohmann::json injections = nlohmann::json::object();
  for (const auto& [surface, pool] : generation.stub_injections)
    injections[surface] = pool;

  return {
      {"schema", schema},
      {"terms", registry.canonical_json()},
      {"generation",
       {{"params", generation.params.canonical_json()},
        {"models", models},
        {"stub_injections", injections}}},
      {"sentiment",
       {{"lexicon_digest", lexicon_digest},
        {"sentence_cap", sentiment.sentence_cap}}},
      {"analysis",
       {{"alpha_level", analysis.alpha_level},
        {"correction", analysis.correction},
        {"high_low_q", analysis.high_low_q},
        {"bootstrap_resamples", analysis.bootstrap_resamples},
        {"seed", analysis.seed},
        {"baseline_noun", analysis.baseline_noun}}},
      {"topics",
       {{"k", topics.params.k},
        {"alpha", topics.params.alpha},
        {"beta", topics.params.beta},
        {"iterations", topics.params.iterations},
        {"seed", topics.params.seed},
        {"top_terms", topics.top_terms},
        {"granularity", topics.granularity},
        {"stopwords_digest", stopwords_digest}}},
  };
}

namespace {

std::string digest_of(const nlohmann::json& value) {
  return to_hex64(fnv1a64(value.dump()));
}

}  // namespace

std::string AuditConfig::digest() const { return digest_of(canonical_json()); }

std::string AuditConfig::generation_digest() const {
  const nlohmann::json canonical = canonical_json();
  return digest_of(
      {{"terms", canonical["terms"]}, {"generation", canonical["generation"]}});
}

std::string AuditConfig::score_digest() const {
  const nlohmann::json canonical = canonical_json();
  return digest_of({{"terms", canonical["terms"]},
                    {"generation", canonical["generation"]},
                    {"sentiment", canonical["sentiment"]}});
}

std::string AuditConfig::analyze_digest() const {
  const nlohmann::json canonical = canonical_json();
  return digest_of({{"terms", canonical["terms"]},
                    {"generation", canonical["generation"]},
                    {"sentiment", canonical["sentiment"]},
                    {"analysis", canonical["analysis"]}});
}

std::string AuditConfig::topics_digest() const {
  const nlohmann::json canonical = canonical_json();
  return digest_of({{"terms", canonical["terms"]},
                    {"generation", canonical["generation"]},
                    {"sentiment", canonical["sentiment"]},
                    {"analysis", canonical["analysis"]},
                    {"topics", canonical["topics"]}});
}

AuditConfig parse_config(const nlohmann::json& document,
                         std::optional<std::uint64_t> seed_override) {
  if (!document.is_object())
    throw ValidationError("config must be a JSON object");
  static const std::set<std::string> kTopLevel = {
      "schema", "terms", "generation", "sentiment",
      "analysis", "topics", "paths"};
  for (const auto& [key, _] : document.items()) {
    if (!kTopLevel.count(key))
      throw ValidationError("config: unknown top-level key '" + key + "'");
  }
  if (!document.contains("schema") ||
      !document["schema"].is_number_integer())
    throw ValidationError("config: an integer 'schema' field is required");

  AuditConfig config;
  config.schema = document["schema"].get<int>();
  config.registry = load_registry(document);
  config.generation = parse_generation(document);
  config.sentiment = parse_sentiment(document);
  config.analysis = parse_analysis(document);
  config.topics = parse_topics(document);
  config.paths = parse_paths(document);

  if (seed_override) {
    config.generation.params.seed = *seed_override;
    config.analysis.seed = *seed_override;
    config.topics.params.seed = *seed_override;
  }

  // Resolve data contents now so their digests are part of the config digest.
  const Lexicon lexicon = config.sentiment.lexicon_path.empty()
                              ? Lexicon::builtin()
                              : Lexicon::from_tsv_file(config.sentiment.lexicon_path);
  config.lexicon_digest = lexicon.digest();
  const std::set<std::string> stopwords =
      config.topics.stopwords_path.empty()
          ? builtin_stopwords()
          : load_stopwords_file(config.topics.stopwords_path);
  std::string stopword_material;
  for (const auto& word : stopwords) {
    stopword_material += word;
    stopword_material += '\n';
  }
  config.stopwords_digest = to_hex64(fnv1a64(stopword_material));

  config.validate();
  return config;
}

AuditConfig load_config(const std::filesystem::path& path,
                        std::optional<std::uint64_t> seed_override) {
  nlohmann::json document =
      nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (document.is_discarded())
    throw ValidationError("config file " + path.string() +
                          " is not valid JSON");
  return parse_config(document, seed_override);
}

}  // namespace isect
