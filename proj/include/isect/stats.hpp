#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isect/battery.hpp"

namespace isect {

// One scored completion; JSONL row shape:
// {"prompt_id":...,"model_id":...,"index":...,"value":...}
struct ScoreRow {
  std::string prompt_id;
  std::string model_id;
  int index = 0;
  double value = 0.0;
};

enum class GroupLevel {
  signature,  // one group per full marker signature, key "noun|religion|disability"
  category,   // rollups, keys "noun:<id>", "religion:<id>", "disability:<id>"
};

// group key -> sample values, in canonical (model_id, prompt_id, index) order.
using GroupedScores = std::map<std::string, std::vector<double>>;

// Groups scores by marker signature or category rollup. Rows are first put
// into canonical order so cache/score file order cannot affect results.
// Throws ValidationError when a row references a prompt_id absent from the
// battery.
GroupedScores group_scores(std::vector<ScoreRow> rows,
                           const std::vector<PromptSpec>& battery,
                           GroupLevel level);

struct GroupSummary {
  std::string group_key;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n-1 denominator)
};

std::vector<GroupSummary> summarize(const GroupedScores& groups);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  // False only in the degenerate case of two zero-variance samples with
  // different means, where the statistic is undefined; p is pinned to 1 so
  // downstream invariants hold. Two identical-mean zero-variance samples
  // keep testable=true with t=0 and p=1.
  bool testable = true;
};

// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
// freedom; two-sided p via the regularized incomplete beta function.
WelchResult welch_test(const std::vector<double>& a,
                       const std::vector<double>& b);
WelchResult welch_from_moments(std::size_t na, double mean_a, double var_a,
                               std::size_t nb, double mean_b, double var_b);

// I_x(a, b), the regularized incomplete beta function (continued-fraction
// evaluation). Exposed for the oracle-fixture tests.
double regularized_incomplete_beta(double a, double b, double x);

// Pooled-standard-deviation Cohen's d; nullopt when the pooled sd is zero.
std::optional<double> cohens_d(const std::vector<double>& a,
                               const std::vector<double>& b);
std::optional<double> cohens_d_from_moments(std::size_t na, double mean_a,
                                            double var_a, std::size_t nb,
                                            double mean_b, double var_b);

// Holm step-down adjustment. Preserves input order; output is >= input
// elementwise, capped at 1, and monotone in the sorted sense.
std::vector<double> holm_correct(const std::vector<double>& p_values);

struct BiasFinding {
  std::string group_key;
  std::string baseline_key;
  std::size_t n = 0;
  double group_mean = 0.0;
  double delta = 0.0;  // group mean - baseline mean
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double p_adjusted = 1.0;
  double cohens_d = 0.0;
  bool testable = true;
  bool significant = false;  // p_adjusted < alpha_level
};

// Compares every group against the baseline group (which must be present in
// `summaries` with n >= 2; every group needs n >= 2), Holm-corrects the
// family, and returns findings sorted by delta ascending (ties by group_key).
std::vector<BiasFinding> bias_findings(const std::vector<GroupSummary>& summaries,
                                       const std::string& baseline_key,
                                       double alpha_level);

// Single-marker keys (relative to the baseline) composing a signature group
// key: a non-baseline noun, a religion on the baseline noun, a disability on
// the baseline noun. Empty for the baseline itself.
std::vector<std::string> constituent_marker_keys(const std::string& group_key,
                                                 const std::string& baseline_key);

// observed - (baseline + sum of single-marker deltas); exactly 0 for
// baseline or single-marker keys by construction.
double interaction_residual_point(const GroupedScores& signature_scores,
                                  const std::string& group_key,
                                  const std::string& baseline_key);

struct InteractionResidual {
  std::string group_key;
  double observed_mean = 0.0;
  double predicted_mean = 0.0;
  double residual = 0.0;
  double residual_se = 0.0;  // bootstrap standard error
};

// Residuals for every signature group carrying >= 2 markers beyond the
// baseline. The bootstrap resamples each involved group independently
// `bootstrap_resamples` times with an RNG seeded from (seed, group_key), so
// results do not depend on enumeration order. Missing constituent groups are
// a ValidationError.
std::vector<InteractionResidual> interaction_residuals(
    const GroupedScores& signature_scores, const std::string& baseline_key,
    int bootstrap_resamples, std::uint64_t seed);

struct RankedPools {
  std::vector<std::string> high_keys;        // descending mean
  std::vector<std::string> low_keys;         // ascending mean
  std::vector<std::string> high_prompt_ids;  // aligned with high_keys
  std::vector<std::string> low_prompt_ids;
};

// Top/bottom q signature groups by mean score under one ascending total
// order on (mean, group_key): the low pool is the first q entries, the high
// pool the last q, so pools are disjoint whenever 2q <= #groups (enforced).
RankedPools rank_prompts(const std::vector<GroupSummary>& signature_summaries,
                         int q, const std::vector<PromptSpec>& battery);

}  // namespace isect
