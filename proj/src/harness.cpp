#include "isect/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "isect/errors.hpp"
#include "isect/generation.hpp"
#include "isect/jsonl.hpp"
#include "isect/sentiment.hpp"
#include "isect/util.hpp"
#include "isect/version.hpp"

namespace isect {

namespace {

constexpr const char* kStampName = ".stamp.json";

bool stamp_matches(const std::filesystem::path& dir, const std::string& digest) {
  const auto path = dir / kStampName;
  if (!std::filesystem::exists(path)) return false;
  nlohmann::json stamp = nlohmann::json::parse(read_text_file(path), nullptr, false);
  return stamp.is_object() && stamp.value("digest", "") == digest;
}

std::optional<std::string> read_stamp(const std::filesystem::path& dir) {
  const auto path = dir / kStampName;
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json stamp = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (!stamp.is_object() || !stamp.contains("digest")) return std::nullopt;
  return stamp["digest"].get<std::string>();
}

void write_stamp(const std::filesystem::path& dir, const std::string& digest) {
  write_text_file(dir / kStampName,
                  nlohmann::json{{"digest", digest}}.dump(2) + "\n");
}

Lexicon load_lexicon(const AuditConfig& config) {
  return config.sentiment.lexicon_path.empty()
             ? Lexicon::builtin()
             : Lexicon::from_tsv_file(config.sentiment.lexicon_path);
}

std::set<std::string> load_stopwords(const AuditConfig& config) {
  return config.topics.stopwords_path.empty()
             ? builtin_stopwords()
             : load_stopwords_file(config.topics.stopwords_path);
}

std::filesystem::path scores_file(const AuditConfig& config,
                                  const std::string& model_id) {
  return config.paths.scores_dir / (model_id + ".jsonl");
}

std::filesystem::path exclusions_file(const AuditConfig& config) {
  return config.paths.scores_dir / "exclusions.json";
}

std::vector<ScoreRow> load_score_rows(const std::filesystem::path& path) {
  std::vector<ScoreRow> rows;
  for (const auto& row : read_jsonl(path).rows) {
    try {
      ScoreRow parsed;
      parsed.prompt_id = row.at("prompt_id").get<std::string>();
      parsed.model_id = row.at("model_id").get<std::string>();
      parsed.index = row.at("index").get<int>();
      parsed.value = row.at("value").get<double>();
      rows.push_back(std::move(parsed));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bad score row in " + path.string() + ": " +
                            e.what());
    }
  }
  return rows;
}

nlohmann::json summary_to_json(const GroupSummary& s) {
  return {{"group_key", s.group_key}, {"n", s.n}, {"mean", s.mean},
          {"sd", s.sd}};
}

GroupSummary summary_from_json(const nlohmann::json& j) {
  GroupSummary s;
  s.group_key = j.at("group_key").get<std::string>();
  s.n = j.at("n").get<std::size_t>();
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  return s;
}

nlohmann::json finding_to_json(const BiasFinding& f) {
  return {{"group_key", f.group_key},
          {"baseline_key", f.baseline_key},
          {"n", f.n},
          {"group_mean", f.group_mean},
          {"delta", f.delta},
          {"t", f.t},
          {"df", f.df},
          {"p_value", f.p_value},
          {"p_adjusted", f.p_adjusted},
          {"cohens_d", f.cohens_d},
          {"testable", f.testable},
          {"significant", f.significant}};
}

BiasFinding finding_from_json(const nlohmann::json& j) {
  BiasFinding f;
  f.group_key = j.at("group_key").get<std::string>();
  f.baseline_key = j.at("baseline_key").get<std::string>();
  f.n = j.at("n").get<std::size_t>();
  f.group_mean = j.at("group_mean").get<double>();
  f.delta = j.at("delta").get<double>();
  f.t = j.at("t").get<double>();
  f.df = j.at("df").get<double>();
  f.p_value = j.at("p_value").get<double>();
  f.p_adjusted = j.at("p_adjusted").get<double>();
  f.cohens_d = j.at("cohens_d").get<double>();
  f.testable = j.at("testable").get<bool>();
  f.significant = j.at("significant").get<bool>();
  return f;
}

nlohmann::json residual_to_json(const InteractionResidual& r) {
  return {{"group_key", r.group_key},
          {"observed_mean", r.observed_mean},
          {"predicted_mean", r.predicted_mean},
          {"residual", r.residual},
          {"residual_se", r.residual_se}};
}

InteractionResidual residual_from_json(const nlohmann::json& j) {
  InteractionResidual r;
  r.group_key = j.at("group_key").get<std::string>();
  r.observed_mean = j.at("observed_mean").get<double>();
  r.predicted_mean = j.at("predicted_mean").get<double>();
  r.residual = j.at("residual").get<double>();
  r.residual_se = j.at("residual_se").get<double>();
  return r;
}

nlohmann::json block_to_json(const AnalysisBlock& block) {
  auto list = [](const auto& items, const auto& convert) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& item : items) out.push_back(convert(item));
    return out;
  };
  return {{"model_id", block.model_id},
          {"summaries",
           {{"signature", list(block.signature_summaries, summary_to_json)},
            {"category", list(block.category_summaries, summary_to_json)}}},
          {"findings",
           {{"signature", list(block.signature_findings, finding_to_json)},
            {"category", list(block.category_findings, finding_to_json)}}},
          {"interaction_residuals", list(block.residuals, residual_to_json)}};
}

AnalysisBlock block_from_json(const nlohmann::json& j) {
  AnalysisBlock block;
  block.model_id = j.at("model_id").get<std::string>();
  for (const auto& s : j.at("summaries").at("signature"))
    block.signature_summaries.push_back(summary_from_json(s));
  for (const auto& s : j.at("summaries").at("category"))
    block.category_summaries.push_back(summary_from_json(s));
  for (const auto& f : j.at("findings").at("signature"))
    block.signature_findings.push_back(finding_from_json(f));
  for (const auto& f : j.at("findings").at("category"))
    block.category_findings.push_back(finding_from_json(f));
  for (const auto& r : j.at("interaction_residuals"))
    block.residuals.push_back(residual_from_json(r));
  return block;
}

AnalysisBlock analyze_rows(std::vector<ScoreRow> rows,
                           const std::vector<PromptSpec>& battery,
                           const AuditConfig& config,
                           const std::string& scope_id) {
  const std::string baseline_key = config.analysis.baseline_key();
  AnalysisBlock block;
  block.model_id = scope_id;

  const GroupedScores by_signature =
      group_scores(rows, battery, GroupLevel::signature);
  const GroupedScores by_category =
      group_scores(std::move(rows), battery, GroupLevel::category);
  block.signature_summaries = summarize(by_signature);
  block.category_summaries = summarize(by_category);
  block.signature_findings = bias_findings(
      block.signature_summaries, baseline_key, config.analysis.alpha_level);

  // The rollup family is tested against the same unmarked-baseline group, so
  // its summary joins the family for the comparison only.
  const auto baseline_it =
      std::find_if(block.signature_summaries.begin(),
                   block.signature_summaries.end(),
                   [&](const GroupSummary& s) {
                     return s.group_key == baseline_key;
                   });
  if (baseline_it == block.signature_summaries.end())
    throw ValidationError("baseline group '" + baseline_key +
                          "' has no scores");
  std::vector<GroupSummary> category_family = block.category_summaries;
  category_family.push_back(*baseline_it);
  block.category_findings = bias_findings(category_family, baseline_key,
                                          config.analysis.alpha_level);

  block.residuals = interaction_residuals(by_signature, baseline_key,
                                          config.analysis.bootstrap_resamples,
                                          config.analysis.seed);
  return block;
}

std::filesystem::path findings_file(const AuditConfig& config,
                                    const std::string& scope_id) {
  return config.paths.findings_dir / (scope_id + ".json");
}

nlohmann::json pool_topics_to_json(const PoolTopics& topics) {
  nlohmann::json out = {{"pool", topics.pool}};
  if (topics.granularity == "pool") {
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < topics.topics.size(); ++i)
      list.push_back({{"id", i}, {"terms", topics.topics[i]}});
    out["topics"] = list;
    return out;
  }
  out["granularity"] = "prompt";
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& entry : topics.prompt_topics) {
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < entry.topics.size(); ++i)
      list.push_back({{"id", i}, {"terms", entry.topics[i]}});
    prompts.push_back({{"prompt_id", entry.prompt_id}, {"topics", list}});
  }
  out["prompts"] = prompts;
  return out;
}

PoolTopics pool_topics_from_json(const nlohmann::json& j) {
  PoolTopics topics;
  topics.pool = j.at("pool").get<std::string>();
  topics.granularity = j.value("granularity", "pool");
  if (topics.granularity == "pool") {
    for (const auto& entry : j.at("topics"))
      topics.topics.push_back(
          entry.at("terms").get<std::vector<std::string>>());
    return topics;
  }
  for (const auto& prompt : j.at("prompts")) {
    PromptTopics entry;
    entry.prompt_id = prompt.at("prompt_id").get<std::string>();
    for (const auto& t : prompt.at("topics"))
      entry.topics.push_back(t.at("terms").get<std::vector<std::string>>());
    topics.prompt_topics.push_back(std::move(entry));
  }
  return topics;
}

nlohmann::json dropped_to_json(const std::vector<DroppedDoc>& dropped) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : dropped) {
    out.push_back({{"prompt_id", d.meta.prompt_id},
                   {"model_id", d.meta.model_id},
                   {"index", d.meta.index},
                   {"reason", d.reason}});
  }
  return out;
}

}  // namespace

std::vector<PromptSpec> ensure_battery(const AuditConfig& config) {
  config.validate();
  return build_battery(config.registry);
}

void stage_generate(const AuditConfig& config,
                    const std::optional<std::string>& only_model) {
  const std::string digest = config.generation_digest();
  std::filesystem::create_directories(config.paths.cache_dir);
  if (const auto existing = read_stamp(config.paths.cache_dir);
      existing && *existing != digest) {
    throw ValidationError(
        "cache directory " + config.paths.cache_dir.string() +
        " holds completions generated under different settings (stamp " +
        *existing + ", config needs " + digest +
        "); delete it or point paths.cache_dir elsewhere");
  }
  write_stamp(config.paths.cache_dir, digest);

  const auto battery = ensure_battery(config);
  GenerateOptions options;
  options.injections = config.generation.stub_injections;
  options.concurrency = config.generation.concurrency;
  options.retries = config.generation.retries;
  options.backoff_base_ms = config.generation.backoff_base_ms;
  options.request_timeout_s = config.generation.request_timeout_s;

  bool matched = false;
  for (const auto& model : config.generation.models) {
    if (only_model && model.model_id != *only_model) continue;
    matched = true;
    generate(model, battery, config.generation.params,
             config.paths.cache_dir, options);
  }
  if (only_model && !matched)
    throw ValidationError("unknown model '" + *only_model +
                          "' (not in generation.models)");
}

void stage_score(const AuditConfig& config) {
  const std::string digest = config.score_digest();
  bool outputs_exist = std::filesystem::exists(exclusions_file(config));
  for (const auto& model : config.generation.models) {
    outputs_exist = outputs_exist &&
                    std::filesystem::exists(scores_file(config, model.model_id));
  }
  if (outputs_exist && stamp_matches(config.paths.scores_dir, digest)) return;

  const auto battery = ensure_battery(config);
  std::map<std::string, const PromptSpec*> prompts_by_id;
  for (const auto& spec : battery) prompts_by_id.emplace(spec.prompt_id, &spec);

  const LexiconScorer scorer(load_lexicon(config));

  nlohmann::json generated_counts = nlohmann::json::object();
  nlohmann::json scored_counts = nlohmann::json::object();
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& model : config.generation.models) {
    const auto cache_path =
        config.paths.cache_dir / (model.model_id + ".jsonl");
    std::vector<CacheRow> rows = load_cache(cache_path);
    if (rows.empty())
      throw ValidationError("no cached completions for model '" +
                            model.model_id + "' (run the generate stage)");
    sort_cache_rows(rows);

    std::vector<nlohmann::json> score_rows;
    std::size_t scored = 0;
    for (const auto& row : rows) {
      const auto it = prompts_by_id.find(row.prompt_id);
      if (it == prompts_by_id.end())
        throw ValidationError("cache row for model '" + model.model_id +
                              "' references unknown prompt " + row.prompt_id);
      const Completion completion = make_completion(
          row, it->second->text, config.sentiment.sentence_cap);
      const auto score = score_sentences(completion.sentences, scorer);
      if (!score) {
        excluded.push_back({{"prompt_id", row.prompt_id},
                            {"model_id", row.model_id},
                            {"index", row.index},
                            {"reason", "no complete sentences"}});
        continue;
      }
      ++scored;
      score_rows.push_back({{"prompt_id", row.prompt_id},
                            {"model_id", row.model_id},
                            {"index", row.index},
                            {"value", score->value}});
    }
    write_jsonl(scores_file(config, model.model_id), score_rows);
    generated_counts[model.model_id] = rows.size();
    scored_counts[model.model_id] = scored;
  }

  write_text_file(exclusions_file(config),
                  nlohmann::json{{"generated", generated_counts},
                                 {"scored", scored_counts},
                                 {"excluded", excluded}}
                          .dump(2) +
                      "\n");
  write_stamp(config.paths.scores_dir, digest);
}

void stage_analyze(const AuditConfig& config) {
  const std::string digest = config.analyze_digest();
  bool outputs_exist = std::filesystem::exists(findings_file(config, "pooled"));
  for (const auto& model : config.generation.models) {
    outputs_exist = outputs_exist && std::filesystem::exists(
                                         findings_file(config, model.model_id));
  }
  if (outputs_exist && stamp_matches(config.paths.findings_dir, digest)) return;

  const auto battery = ensure_battery(config);
  std::vector<ScoreRow> pooled_rows;
  std::vector<AnalysisBlock> blocks;
  for (const auto& model : config.generation.models) {
    std::vector<ScoreRow> rows =
        load_score_rows(scores_file(config, model.model_id));
    if (rows.empty())
      throw ValidationError("no scores for model '" + model.model_id +
                            "' (run the score stage)");
    pooled_rows.insert(pooled_rows.end(), rows.begin(), rows.end());
    blocks.push_back(
        analyze_rows(std::move(rows), battery, config, model.model_id));
  }
  blocks.push_back(
      analyze_rows(std::move(pooled_rows), battery, config, "pooled"));

  for (const auto& block : blocks) {
    nlohmann::json doc = block_to_json(block);
    doc["baseline_key"] = config.analysis.baseline_key();
    doc["alpha_level"] = config.analysis.alpha_level;
    write_text_file(findings_file(config, block.model_id), doc.dump(2) + "\n");
  }
  write_stamp(config.paths.findings_dir, digest);
}

void stage_topics(const AuditConfig& config) {
  const std::string digest = config.topics_digest();
  const auto high_path = config.paths.topics_dir / "high.json";
  const auto low_path = config.paths.topics_dir / "low.json";
  const auto pools_path = config.paths.topics_dir / "pools.json";
  const auto dropped_path = config.paths.topics_dir / "dropped.json";
  const bool outputs_exist =
      std::filesystem::exists(high_path) && std::filesystem::exists(low_path) &&
      std::filesystem::exists(pools_path) &&
      std::filesystem::exists(dropped_path);
  if (outputs_exist && stamp_matches(config.paths.topics_dir, digest)) return;

  const auto battery = ensure_battery(config);
  std::map<std::string, const PromptSpec*> prompts_by_id;
  for (const auto& spec : battery) prompts_by_id.emplace(spec.prompt_id, &spec);

  std::vector<ScoreRow> pooled_rows;
  for (const auto& model : config.generation.models) {
    auto rows = load_score_rows(scores_file(config, model.model_id));
    pooled_rows.insert(pooled_rows.end(), rows.begin(), rows.end());
  }
  if (pooled_rows.empty())
    throw ValidationError("no scores found (run the score stage)");

  const auto summaries = summarize(
      group_scores(pooled_rows, battery, GroupLevel::signature));
  const RankedPools pools =
      rank_prompts(summaries, config.analysis.high_low_q, battery);

  std::set<std::string> pool_ids(pools.high_prompt_ids.begin(),
                                 pools.high_prompt_ids.end());
  pool_ids.insert(pools.low_prompt_ids.begin(), pools.low_prompt_ids.end());
  std::vector<Completion> completions;
  for (const auto& model : config.generation.models) {
    std::vector<CacheRow> rows =
        load_cache(config.paths.cache_dir / (model.model_id + ".jsonl"));
    sort_cache_rows(rows);
    for (const auto& row : rows) {
      if (!pool_ids.count(row.prompt_id)) continue;
      const auto it = prompts_by_id.find(row.prompt_id);
      if (it == prompts_by_id.end())
        throw ValidationError("cache row references unknown prompt " +
                              row.prompt_id);
      completions.push_back(make_completion(row, it->second->text,
                                            config.sentiment.sentence_cap));
    }
  }

  const auto stopwords = load_stopwords(config);
  const PoolTopics high = topics_for_pool(
      "high", pools.high_prompt_ids, completions, stopwords,
      config.topics.params, config.topics.top_terms, config.topics.granularity);
  const PoolTopics low = topics_for_pool(
      "low", pools.low_prompt_ids, completions, stopwords, config.topics.params,
      config.topics.top_terms, config.topics.granularity);

  write_text_file(high_path, pool_topics_to_json(high).dump(2) + "\n");
  write_text_file(low_path, pool_topics_to_json(low).dump(2) + "\n");
  write_text_file(pools_path,
                  nlohmann::json{{"high", {{"keys", pools.high_keys},
                                           {"prompt_ids", pools.high_prompt_ids}}},
                                 {"low", {{"keys", pools.low_keys},
                                          {"prompt_ids", pools.low_prompt_ids}}}}
                          .dump(2) +
                      "\n");
  nlohmann::json dropped = dropped_to_json(high.dropped);
  for (const auto& entry : dropped_to_json(low.dropped)) dropped.push_back(entry);
  write_text_file(dropped_path,
                  nlohmann::json{{"dropped", dropped}}.dump(2) + "\n");
  write_stamp(config.paths.topics_dir, digest);
}

AuditReport stage_report(const AuditConfig& config) {
  AuditReport report;
  report.manifest_ref = config.digest();
  report.tool_version = kToolVersion;
  report.battery_size = ensure_battery(config).size();
  report.baseline_key = config.analysis.baseline_key();
  report.alpha_level = config.analysis.alpha_level;

  for (const auto& model : config.generation.models) {
    const auto path = findings_file(config, model.model_id);
    if (!std::filesystem::exists(path))
      throw ValidationError("missing findings for model '" + model.model_id +
                            "' (run the analyze stage)");
    report.models.push_back(block_from_json(
        nlohmann::json::parse(read_text_file(path))));
  }
  report.pooled = block_from_json(nlohmann::json::parse(
      read_text_file(findings_file(config, "pooled"))));

  const auto high_path = config.paths.topics_dir / "high.json";
  const auto low_path = config.paths.topics_dir / "low.json";
  const auto pools_path = config.paths.topics_dir / "pools.json";
  if (!std::filesystem::exists(high_path) ||
      !std::filesystem::exists(low_path) ||
      !std::filesystem::exists(pools_path))
    throw ValidationError("missing topic outputs (run the topics stage)");
  report.high_topics =
      pool_topics_from_json(nlohmann::json::parse(read_text_file(high_path)));
  report.low_topics =
      pool_topics_from_json(nlohmann::json::parse(read_text_file(low_path)));
  const nlohmann::json pools =
      nlohmann::json::parse(read_text_file(pools_path));
  report.high_keys =
      pools.at("high").at("keys").get<std::vector<std::string>>();
  report.low_keys = pools.at("low").at("keys").get<std::vector<std::string>>();

  // Manifest: counts and exclusions from the score stage, drops from topics.
  RunManifest manifest;
  manifest.config_digest = report.manifest_ref;
  manifest.tool_version = kToolVersion;
  manifest.battery_size = report.battery_size;
  manifest.generated_at = iso8601_now();
  const nlohmann::json exclusions =
      nlohmann::json::parse(read_text_file(exclusions_file(config)));
  for (const auto& [model_id, count] : exclusions.at("generated").items())
    manifest.generated[model_id] = count.get<std::size_t>();
  for (const auto& [model_id, count] : exclusions.at("scored").items())
    manifest.scored[model_id] = count.get<std::size_t>();
  for (const auto& entry : exclusions.at("excluded")) {
    manifest.excluded.push_back({entry.at("prompt_id").get<std::string>(),
                                 entry.at("model_id").get<std::string>(),
                                 entry.at("index").get<int>(),
                                 entry.at("reason").get<std::string>()});
  }
  const auto dropped_path = config.paths.topics_dir / "dropped.json";
  if (std::filesystem::exists(dropped_path)) {
    for (const auto& entry : nlohmann::json::parse(read_text_file(dropped_path))
                                 .at("dropped")) {
      manifest.topic_dropped.push_back(
          {{entry.at("prompt_id").get<std::string>(),
            entry.at("model_id").get<std::string>(),
            entry.at("index").get<int>()},
           entry.at("reason").get<std::string>()});
    }
  }

  nlohmann::json excluded_json = nlohmann::json::array();
  for (const auto& e : manifest.excluded) {
    excluded_json.push_back({{"prompt_id", e.prompt_id},
                             {"model_id", e.model_id},
                             {"index", e.index},
                             {"reason", e.reason}});
  }
  const nlohmann::json manifest_json = {
      {"config_digest", manifest.config_digest},
      {"tool_version", manifest.tool_version},
      {"battery_size", manifest.battery_size},
      {"generated", exclusions.at("generated")},
      {"scored", exclusions.at("scored")},
      {"excluded", excluded_json},
      {"topic_dropped", dropped_to_json(manifest.topic_dropped)},
      {"generated_at", manifest.generated_at},
  };

  // report.json is byte-stable for a given (config, cache); the timestamp
  // lives only in manifest.json.
  write_text_file(config.paths.report_dir / "report.json",
                  report_to_json(report).dump(2) + "\n");
  write_text_file(config.paths.report_dir / "report.md",
                  report_to_markdown(report));
  write_text_file(config.paths.report_dir / "manifest.json",
                  manifest_json.dump(2) + "\n");
  return report;
}

AuditReport run_audit(const AuditConfig& config) {
  config.validate();
  stage_generate(config);
  stage_score(config);
  stage_analyze(config);
  stage_topics(config);
  return stage_report(config);
}

nlohmann::json report_to_json(const AuditReport& report) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& block : report.models) models.push_back(block_to_json(block));
  return {{"schema", kConfigSchemaVersion},
          {"tool_version", report.tool_version},
          {"manifest_ref", report.manifest_ref},
          {"battery_size", report.battery_size},
          {"baseline_key", report.baseline_key},
          {"alpha_level", report.alpha_level},
          {"models", models},
          {"pooled", block_to_json(report.pooled)},
          {"pools", {{"high", report.high_keys}, {"low", report.low_keys}}},
          {"topics",
           {{"high", pool_topics_to_json(report.high_topics)},
            {"low", pool_topics_to_json(report.low_topics)}}}};
}

namespace {

std::string fmt(double value, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, value);
  return std::string(buf);
}

void render_findings_table(std::string& md, const AnalysisBlock& block,
                           const std::vector<const BiasFinding*>& findings,
                           const std::string& baseline_key) {
  md += "| group | n | mean | delta | t | df | p | p (adj) | d | significant |\n";
  md += "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : block.signature_summaries) {
    if (s.group_key != baseline_key) continue;
    md += "| `" + s.group_key + "` (baseline) | " + std::to_string(s.n) +
          " | " + fmt(s.mean, "%.4f") + " | " + fmt(0.0, "%.4f") +
          " | - | - | - | - | - | - |\n";
  }
  for (const auto* f : findings) {
    md += "| `" + f->group_key + "` | " + std::to_string(f->n) + " | " +
          fmt(f->group_mean, "%.4f") + " | " + fmt(f->delta, "%+.4f") + " | " +
          (f->testable ? fmt(f->t, "%.3f") : std::string("-")) + " | " +
          (f->testable ? fmt(f->df, "%.1f") : std::string("-")) + " | " +
          fmt(f->p_value, "%.3g") + " | " + fmt(f->p_adjusted, "%.3g") +
          " | " + (f->testable ? fmt(f->cohens_d, "%.3f") : std::string("-")) +
          " | " + (f->significant ? "yes" : "no") + " |\n";
  }
  md += "\n";
}

void render_block(std::string& md, const AnalysisBlock& block,
                  const std::string& baseline_key) {
  const std::map<std::string, std::string> rollup_sections = {
      {"noun:", "Gender rollups"},
      {"religion:", "Religion rollups"},
      {"disability:", "Disability rollups"},
  };
  for (const auto& [prefix, title] : rollup_sections) {
    std::vector<const BiasFinding*> findings;
    for (const auto& f : block.category_findings) {
      if (f.group_key.rfind(prefix, 0) == 0) findings.push_back(&f);
    }
    if (findings.empty()) continue;
    md += "### " + title + "\n\n";
    render_findings_table(md, block, findings, baseline_key);
  }

  std::size_t significant = 0;
  for (const auto& f : block.signature_findings)
    if (f.significant) ++significant;
  md += "### Signature groups\n\n";
  md += std::to_string(significant) + " of " +
        std::to_string(block.signature_findings.size()) +
        " signature groups differ significantly from the baseline.\n\n";
  const std::size_t show =
      std::min<std::size_t>(10, block.signature_findings.size());
  if (show > 0) {
    md += "Most negative " + std::to_string(show) +
          " (findings are sorted by delta):\n\n";
    std::vector<const BiasFinding*> head;
    for (std::size_t i = 0; i < show; ++i)
      head.push_back(&block.signature_findings[i]);
    render_findings_table(md, block, head, baseline_key);
  }

  if (!block.residuals.empty()) {
    md += "### Intersectional compounding\n\n";
    md += "Residual = observed mean - (baseline + sum of single-marker "
          "deltas); negative residuals mark groups scoring worse than their "
          "markers predict additively.\n\n";
    std::vector<const InteractionResidual*> extremes;
    for (const auto& r : block.residuals) extremes.push_back(&r);
    std::sort(extremes.begin(), extremes.end(),
              [](const InteractionResidual* a, const InteractionResidual* b) {
                const double ma = std::fabs(a->residual);
                const double mb = std::fabs(b->residual);
                if (ma != mb) return ma > mb;
                return a->group_key < b->group_key;
              });
    const std::size_t keep = std::min<std::size_t>(10, extremes.size());
    md += "| group | observed | predicted | residual | bootstrap se |\n";
    md += "|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < keep; ++i) {
      const auto* r = extremes[i];
      md += "| `" + r->group_key + "` | " + fmt(r->observed_mean, "%.4f") +
            " | " + fmt(r->predicted_mean, "%.4f") + " | " +
            fmt(r->residual, "%+.4f") + " | " + fmt(r->residual_se, "%.4f") +
            " |\n";
    }
    if (extremes.size() > keep) {
      md += "\nShowing the " + std::to_string(keep) +
            " largest of " + std::to_string(extremes.size()) +
            " residuals; the JSON report has all of them.\n";
    }
    md += "\n";
  }
}

void render_topics(std::string& md, const PoolTopics& topics) {
  if (topics.granularity == "pool") {
    for (std::size_t i = 0; i < topics.topics.size(); ++i) {
      md += "- topic " + std::to_string(i) + ": ";
      for (std::size_t j = 0; j < topics.topics[i].size(); ++j) {
        if (j > 0) md += ", ";
        md += "`" + topics.topics[i][j] + "`";
      }
      md += "\n";
    }
    md += "\n";
    return;
  }
  for (const auto& entry : topics.prompt_topics) {
    md += "- prompt `" + entry.prompt_id + "`:\n";
    for (std::size_t i = 0; i < entry.topics.size(); ++i) {
      md += "  - topic " + std::to_string(i) + ": ";
      for (std::size_t j = 0; j < entry.topics[i].size(); ++j) {
        if (j > 0) md += ", ";
        md += "`" + entry.topics[i][j] + "`";
      }
      md += "\n";
    }
  }
  md += "\n";
}

}  // namespace

std::string report_to_markdown(const AuditReport& report) {
  std::string md;
  md += "# Intersectional sentiment audit\n\n";
  md += "- manifest: `" + report.manifest_ref + "` (tool " +
        report.tool_version + ")\n";
  md += "- battery: " + std::to_string(report.battery_size) + " prompts\n";
  md += "- baseline group: `" + report.baseline_key + "`\n";
  md += "- significance: Holm-adjusted p < " + fmt(report.alpha_level, "%g") +
        "\n\n";
  md += "Scores are mean sentence sentiment in [0, 1]; 0.5 is neutral. "
        "Delta is the group mean minus the baseline mean, so negative "
        "deltas mean more negative completions than the unmarked baseline.\n\n";

  for (const auto& block : report.models) {
    md += "## Model `" + block.model_id + "`\n\n";
    render_block(md, block, report.baseline_key);
  }
  md += "## Pooled across models\n\n";
  render_block(md, report.pooled, report.baseline_key);

  md += "## Topic fragments\n\n";
  md += "### High-scoring pool\n\n";
  md += "Groups: ";
  for (std::size_t i = 0; i < report.high_keys.size(); ++i) {
    if (i > 0) md += ", ";
    md += "`" + report.high_keys[i] + "`";
  }
  md += "\n\n";
  render_topics(md, report.high_topics);
  md += "### Low-scoring pool\n\n";
  md += "Groups: ";
  for (std::size_t i = 0; i < report.low_keys.size(); ++i) {
    if (i > 0) md += ", ";
    md += "`" + report.low_keys[i] + "`";
  }
  md += "\n\n";
  render_topics(md, report.low_topics);
  return md;
}

std::string emit_report(const AuditReport& report, const std::string& format) {
  if (format == "json") return report_to_json(report).dump(2) + "\n";
  if (format == "markdown") return report_to_markdown(report);
  throw ValidationError("unknown report format '" + format +
                        "' (expected 'json' or 'markdown')");
}

}  // namespace isect
