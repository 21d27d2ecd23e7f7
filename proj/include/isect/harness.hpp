#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isect/config.hpp"
#include "isect/stats.hpp"
#include "isect/topics.hpp"

namespace isect {

// Everything computed for one scope (a single model, or all models pooled
// under the reserved id "pooled").
struct AnalysisBlock {
  std::string model_id;
  std::vector<GroupSummary> signature_summaries;
  std::vector<GroupSummary> category_summaries;
  std::vector<BiasFinding> signature_findings;
  std::vector<BiasFinding> category_findings;
  std::vector<InteractionResidual> residuals;
};

struct ExcludedCompletion {
  std::string prompt_id;
  std::string model_id;
  int index = 0;
  std::string reason;
};

struct RunManifest {
  std::string config_digest;
  std::string tool_version;
  std::size_t battery_size = 0;
  std::map<std::string, std::size_t> generated;  // model_id -> cached rows
  std::map<std::string, std::size_t> scored;     // model_id -> scored rows
  std::vector<ExcludedCompletion> excluded;
  std::vector<DroppedDoc> topic_dropped;
  std::string generated_at;  // excluded from byte-identity checks by being
                             // confined to manifest.json
};

struct AuditReport {
  std::string manifest_ref;  // config digest; manifest.json carries the rest
  std::string tool_version;
  std::size_t battery_size = 0;
  std::string baseline_key;
  double alpha_level = 0.05;
  std::vector<AnalysisBlock> models;
  AnalysisBlock pooled;
  PoolTopics high_topics;
  PoolTopics low_topics;
  std::vector<std::string> high_keys;  // pool membership, descending mean
  std::vector<std::string> low_keys;
};

// Stage entry points. Each writes its outputs plus a .stamp.json recording
// the relevant config digest, and skips work when the stamp already matches
// and the outputs exist. stage_generate instead refuses to reuse a cache
// directory stamped with a different generation digest.
std::vector<PromptSpec> ensure_battery(const AuditConfig& config);
void stage_generate(const AuditConfig& config,
                    const std::optional<std::string>& only_model = {});
void stage_score(const AuditConfig& config);
void stage_analyze(const AuditConfig& config);
void stage_topics(const AuditConfig& config);
AuditReport stage_report(const AuditConfig& config);

// generate -> score -> analyze -> topics -> report.
AuditReport run_audit(const AuditConfig& config);

nlohmann::json report_to_json(const AuditReport& report);
std::string report_to_markdown(const AuditReport& report);

// format must be "json" or "markdown".
std::string emit_report(const AuditReport& report, const std::string& format);

}  // namespace isect
