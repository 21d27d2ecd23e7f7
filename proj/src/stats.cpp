#include "isect/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "isect/errors.hpp"
#include "isect/util.hpp"

namespace isect {

namespace {

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double sum = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    sum += d * d;
  }
  return sum / static_cast<double>(xs.size() - 1);
}

// Continued-fraction core of the incomplete beta function (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIterations = 300;
  constexpr double kEps = 3.0e-16;
  constexpr double kTiny = 1.0e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;  // converged to machine precision for all df/t seen in practice
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("regularized_incomplete_beta: a, b must be > 0");
  if (std::isnan(x) || x < 0.0 || x > 1.0)
    throw ValidationError("regularized_incomplete_beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

WelchResult welch_from_moments(std::size_t na, double mean_a, double var_a,
                               std::size_t nb, double mean_b, double var_b) {
  if (na < 2 || nb < 2)
    throw ValidationError("welch test needs at least 2 samples per group");

  WelchResult result;
  if (var_a == 0.0 && var_b == 0.0) {
    if (mean_a == mean_b) {
      // Identical constant samples: no evidence of difference, p = 1.
      result.t = 0.0;
      result.df = static_cast<double>(na + nb - 2);
      result.p = 1.0;
      result.testable = true;
      return result;
    }
    // Different constants with zero variance: the statistic is undefined.
    result.t = 0.0;
    result.df = 0.0;
    result.p = 1.0;
    result.testable = false;
    return result;
  }

  const double se_a = var_a / static_cast<double>(na);
  const double se_b = var_b / static_cast<double>(nb);
  const double se2 = se_a + se_b;
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.df = se2 * se2 /
              (se_a * se_a / static_cast<double>(na - 1) +
               se_b * se_b / static_cast<double>(nb - 1));
  const double x = result.df / (result.df + result.t * result.t);
  result.p = regularized_incomplete_beta(result.df / 2.0, 0.5, x);
  result.p = std::min(1.0, std::max(0.0, result.p));
  result.testable = true;
  return result;
}

WelchResult welch_test(const std::vector<double>& a,
                       const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("welch test needs at least 2 samples per group");
  const double mean_a = mean_of(a);
  const double mean_b = mean_of(b);
  return welch_from_moments(a.size(), mean_a, sample_variance(a, mean_a),
                            b.size(), mean_b, sample_variance(b, mean_b));
}

std::optional<double> cohens_d_from_moments(std::size_t na, double mean_a,
                                            double var_a, std::size_t nb,
                                            double mean_b, double var_b) {
  if (na < 2 || nb < 2)
    throw ValidationError("cohens_d needs at least 2 samples per group");
  const double pooled_var =
      (static_cast<double>(na - 1) * var_a + static_cast<double>(nb - 1) * var_b) /
      static_cast<double>(na + nb - 2);
  if (pooled_var <= 0.0) {
    if (mean_a == mean_b) return 0.0;  // identical constants: no effect
    return std::nullopt;               // undefined effect size
  }
  return (mean_a - mean_b) / std::sqrt(pooled_var);
}

std::optional<double> cohens_d(const std::vector<double>& a,
                               const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("cohens_d needs at least 2 samples per group");
  const double mean_a = mean_of(a);
  const double mean_b = mean_of(b);
  return cohens_d_from_moments(a.size(), mean_a, sample_variance(a, mean_a),
                               b.size(), mean_b, sample_variance(b, mean_b));
}

std::vector<double> holm_correct(const std::vector<double>& p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("holm_correct: p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     return p_values[i] < p_values[j];
                   });
  std::vector<double> adjusted(m, 0.0);
  double running_max = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const double scaled =
        static_cast<double>(m - rank) * p_values[order[rank]];
    running_max = std::max(running_max, scaled);
    adjusted[order[rank]] = std::min(1.0, running_max);
  }
  return adjusted;
}

GroupedScores group_scores(std::vector<ScoreRow> rows,
                           const std::vector<PromptSpec>& battery,
                           GroupLevel level) {
  // Canonical order first, so the cache/score file order can never leak into
  // results (notably the bootstrap's resampling indices).
  std::sort(rows.begin(), rows.end(),
            [](const ScoreRow& a, const ScoreRow& b) {
              if (a.model_id != b.model_id) return a.model_id < b.model_id;
              if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
              return a.index < b.index;
            });

  std::map<std::string, const PromptSpec*> by_id;
  for (const auto& spec : battery) by_id.emplace(spec.prompt_id, &spec);

  std::vector<std::string> orphans;
  GroupedScores groups;
  for (const auto& row : rows) {
    const auto it = by_id.find(row.prompt_id);
    if (it == by_id.end()) {
      if (orphans.size() < 5) orphans.push_back(row.prompt_id);
      continue;
    }
    const PromptSpec& spec = *it->second;
    if (level == GroupLevel::signature) {
      groups[spec.group_key].push_back(row.value);
    } else {
      groups["noun:" + spec.signature.noun_id].push_back(row.value);
      if (spec.signature.religion_id)
        groups["religion:" + *spec.signature.religion_id].push_back(row.value);
      if (spec.signature.disability_id)
        groups["disability:" + *spec.signature.disability_id].push_back(
            row.value);
    }
  }
  if (!orphans.empty()) {
    std::string msg = "score rows reference prompts missing from the battery:";
    for (const auto& id : orphans) msg += " " + id;
    throw ValidationError(msg);
  }
  return groups;
}

std::vector<GroupSummary> summarize(const GroupedScores& groups) {
  std::vector<GroupSummary> out;
  out.reserve(groups.size());
  for (const auto& [key, values] : groups) {
    GroupSummary s;
    s.group_key = key;
    s.n = values.size();
    s.mean = values.empty() ? 0.0 : mean_of(values);
    s.sd = std::sqrt(sample_variance(values, s.mean));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<BiasFinding> bias_findings(
    const std::vector<GroupSummary>& summaries, const std::string& baseline_key,
    double alpha_level) {
  if (!(alpha_level > 0.0 && alpha_level < 1.0))
    throw ValidationError("alpha_level must lie in (0, 1)");
  const GroupSummary* baseline = nullptr;
  for (const auto& s : summaries) {
    if (s.group_key == baseline_key) baseline = &s;
  }
  if (baseline == nullptr)
    throw ValidationError("baseline group '" + baseline_key +
                          "' is missing from the summaries");
  if (baseline->n < 2)
    throw ValidationError("baseline group '" + baseline_key +
                          "' needs at least 2 samples");

  std::vector<const GroupSummary*> rest;
  for (const auto& s : summaries) {
    if (s.group_key == baseline_key) continue;
    if (s.n < 2)
      throw ValidationError("group '" + s.group_key +
                            "' needs at least 2 samples");
    rest.push_back(&s);
  }
  std::sort(rest.begin(), rest.end(),
            [](const GroupSummary* a, const GroupSummary* b) {
              return a->group_key < b->group_key;
            });

  const double base_var = baseline->sd * baseline->sd;
  std::vector<BiasFinding> findings;
  std::vector<double> p_values;
  findings.reserve(rest.size());
  for (const GroupSummary* s : rest) {
    BiasFinding f;
    f.group_key = s->group_key;
    f.baseline_key = baseline_key;
    f.n = s->n;
    f.group_mean = s->mean;
    f.delta = s->mean - baseline->mean;
    const double var = s->sd * s->sd;
    const WelchResult w = welch_from_moments(s->n, s->mean, var, baseline->n,
                                             baseline->mean, base_var);
    f.t = w.t;
    f.df = w.df;
    f.p_value = w.p;
    const auto d = cohens_d_from_moments(s->n, s->mean, var, baseline->n,
                                         baseline->mean, base_var);
    f.cohens_d = d.value_or(0.0);
    f.testable = w.testable && d.has_value();
    findings.push_back(std::move(f));
    p_values.push_back(w.p);
  }

  const std::vector<double> adjusted = holm_correct(p_values);
  for (std::size_t i = 0; i < findings.size(); ++i) {
    findings[i].p_adjusted = adjusted[i];
    findings[i].significant = adjusted[i] < alpha_level;
  }

  std::sort(findings.begin(), findings.end(),
            [](const BiasFinding& a, const BiasFinding& b) {
              if (a.delta != b.delta) return a.delta < b.delta;
              return a.group_key < b.group_key;
            });
  return findings;
}

std::vector<std::string> constituent_marker_keys(
    const std::string& group_key, const std::string& baseline_key) {
  const MarkerSignature base = signature_from_group_key(baseline_key);
  if (base.religion_id || base.disability_id)
    throw ValidationError("baseline group '" + baseline_key +
                          "' must be an unmarked noun");
  const MarkerSignature sig = signature_from_group_key(group_key);

  std::vector<std::string> keys;
  if (sig.noun_id != base.noun_id) keys.push_back(sig.noun_id + "|-|-");
  if (sig.religion_id)
    keys.push_back(base.noun_id + "|" + *sig.religion_id + "|-");
  if (sig.disability_id)
    keys.push_back(base.noun_id + "|-|" + *sig.disability_id);
  return keys;
}

namespace {

double resample_mean(const std::vector<double>& values, std::mt19937_64& rng) {
  double sum = 0.0;
  const auto n = static_cast<std::uint64_t>(values.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    sum += values[uniform_below(rng, n)];
  }
  return sum / static_cast<double>(values.size());
}

const std::vector<double>& group_or_throw(const GroupedScores& scores,
                                          const std::string& key,
                                          const std::string& role) {
  const auto it = scores.find(key);
  if (it == scores.end() || it->second.empty())
    throw ValidationError("interaction residuals: missing " + role +
                          " group '" + key + "'");
  return it->second;
}

}  // namespace

double interaction_residual_point(const GroupedScores& signature_scores,
                                  const std::string& group_key,
                                  const std::string& baseline_key) {
  const auto markers = constituent_marker_keys(group_key, baseline_key);
  if (markers.size() < 2) return 0.0;  // baseline/single-marker: exact by construction
  const double base =
      mean_of(group_or_throw(signature_scores, baseline_key, "baseline"));
  const double observed =
      mean_of(group_or_throw(signature_scores, group_key, "observed"));
  double predicted = base;
  for (const auto& key : markers) {
    predicted += mean_of(group_or_throw(signature_scores, key, "constituent")) -
                 base;
  }
  return observed - predicted;
}

std::vector<InteractionResidual> interaction_residuals(
    const GroupedScores& signature_scores, const std::string& baseline_key,
    int bootstrap_resamples, std::uint64_t seed) {
  if (bootstrap_resamples < 2)
    throw ValidationError("bootstrap_resamples must be at least 2");
  group_or_throw(signature_scores, baseline_key, "baseline");

  std::vector<InteractionResidual> out;
  for (const auto& [key, observed_values] : signature_scores) {
    const auto markers = constituent_marker_keys(key, baseline_key);
    if (markers.size() < 2) continue;

    const std::vector<double>& base_values =
        group_or_throw(signature_scores, baseline_key, "baseline");
    std::vector<const std::vector<double>*> marker_values;
    for (const auto& m : markers)
      marker_values.push_back(&group_or_throw(signature_scores, m, "constituent"));

    InteractionResidual r;
    r.group_key = key;
    r.observed_mean = mean_of(observed_values);
    const double base_mean = mean_of(base_values);
    r.predicted_mean = base_mean;
    for (const auto* mv : marker_values)
      r.predicted_mean += mean_of(*mv) - base_mean;
    r.residual = r.observed_mean - r.predicted_mean;

    // Seeded per group so results are independent of enumeration order and
    // stable across platforms (mt19937_64 + in-repo draw helpers only).
    std::mt19937_64 rng(splitmix64(seed ^ fnv1a64(key)));
    std::vector<double> replicates;
    replicates.reserve(static_cast<std::size_t>(bootstrap_resamples));
    const auto k = static_cast<double>(marker_values.size());
    for (int b = 0; b < bootstrap_resamples; ++b) {
      const double obs_b = resample_mean(observed_values, rng);
      const double base_b = resample_mean(base_values, rng);
      double pred_b = base_b * (1.0 - k);
      for (const auto* mv : marker_values) pred_b += resample_mean(*mv, rng);
      replicates.push_back(obs_b - pred_b);
    }
    const double rep_mean = mean_of(replicates);
    r.residual_se = std::sqrt(sample_variance(replicates, rep_mean));
    out.push_back(std::move(r));
  }
  // std::map iteration already yields sorted keys; keep that order.
  return out;
}

RankedPools rank_prompts(const std::vector<GroupSummary>& signature_summaries,
                         int q, const std::vector<PromptSpec>& battery) {
  if (q < 1) throw ValidationError("high_low_q must be at least 1");
  if (2 * static_cast<std::size_t>(q) > signature_summaries.size())
    throw ValidationError(
        "high_low_q too large: 2q exceeds the number of signature groups (" +
        std::to_string(signature_summaries.size()) + ")");

  std::map<std::string, std::string> prompt_by_key;
  for (const auto& spec : battery) prompt_by_key[spec.group_key] = spec.prompt_id;

  // One ascending total order on (mean, key): the low pool is the first q
  // entries, the high pool the last q, so pools never overlap.
  std::vector<const GroupSummary*> order;
  order.reserve(signature_summaries.size());
  for (const auto& s : signature_summaries) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const GroupSummary* a, const GroupSummary* b) {
              if (a->mean != b->mean) return a->mean < b->mean;
              return a->group_key < b->group_key;
            });

  RankedPools pools;
  auto prompt_for = [&](const std::string& key) {
    const auto it = prompt_by_key.find(key);
    if (it == prompt_by_key.end())
      throw ValidationError("signature group '" + key +
                            "' has no prompt in the battery");
    return it->second;
  };
  for (int i = 0; i < q; ++i) {
    pools.low_keys.push_back(order[static_cast<std::size_t>(i)]->group_key);
    pools.low_prompt_ids.push_back(prompt_for(pools.low_keys.back()));
  }
  for (int i = 0; i < q; ++i) {
    const auto idx = order.size() - 1 - static_cast<std::size_t>(i);
    pools.high_keys.push_back(order[idx]->group_key);
    pools.high_prompt_ids.push_back(prompt_for(pools.high_keys.back()));
  }
  return pools;
}

}  // namespace isect
