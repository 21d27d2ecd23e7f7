#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "isect/battery.hpp"
#include "isect/errors.hpp"
#include "isect/stats.hpp"
#include "isect/util.hpp"

using namespace isect;

namespace {

nlohmann::json load_oracle() {
  std::ifstream in(std::string(ISECT_FIXTURES_DIR) + "/stats_oracle.json");
  REQUIRE(in.is_open());
  nlohmann::json fixtures;
  in >> fixtures;
  return fixtures;
}

}  // namespace

TEST_CASE("welch test matches the hand-worked example") {
  const WelchResult r = welch_test({1, 2, 3, 4}, {2, 4, 6, 8});
  CHECK(r.t == doctest::Approx(-1.7320508075688774).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(4.411764705882353).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.15158050484530383).epsilon(1e-12));
  CHECK(r.testable);
  const auto d = cohens_d({1, 2, 3, 4}, {2, 4, 6, 8});
  REQUIRE(d.has_value());
  CHECK(*d == doctest::Approx(-1.224744871391589).epsilon(1e-12));
}

TEST_CASE("welch and cohens_d match the reference fixtures to 1e-9") {
  const nlohmann::json fixtures = load_oracle();
  for (const auto& fixture : fixtures["welch"]) {
    const auto a = fixture["a"].get<std::vector<double>>();
    const auto b = fixture["b"].get<std::vector<double>>();
    const WelchResult r = welch_test(a, b);
    CHECK(r.t == doctest::Approx(fixture["t"].get<double>()).epsilon(1e-9));
    CHECK(r.df == doctest::Approx(fixture["df"].get<double>()).epsilon(1e-9));
    CHECK(std::fabs(r.p - fixture["p"].get<double>()) < 1e-9);
    const auto d = cohens_d(a, b);
    REQUIRE(d.has_value());
    CHECK(*d ==
          doctest::Approx(fixture["cohens_d"].get<double>()).epsilon(1e-9));
  }
}

TEST_CASE("holm correction matches the reference fixtures") {
  const nlohmann::json fixtures = load_oracle();
  for (const auto& fixture : fixtures["holm"]) {
    const auto p = fixture["p"].get<std::vector<double>>();
    const auto expected = fixture["adjusted"].get<std::vector<double>>();
    const auto adjusted = holm_correct(p);
    REQUIRE(adjusted.size() == expected.size());
    for (std::size_t i = 0; i < adjusted.size(); ++i) {
      CHECK(std::fabs(adjusted[i] - expected[i]) < 1e-12);
    }
  }
}

TEST_CASE("holm worked example and invariants") {
  const auto adjusted = holm_correct({0.01, 0.04});
  REQUIRE(adjusted.size() == 2);
  CHECK(adjusted[0] == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(adjusted[1] == doctest::Approx(0.04).epsilon(1e-15));

  CHECK(holm_correct({}).empty());
  CHECK(holm_correct({0.2})[0] == doctest::Approx(0.2));

  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + rng() % 12);
    for (auto& v : p) v = unit_double(rng);
    const auto adj = holm_correct(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(adj[i] >= p[i]);
      CHECK(adj[i] <= 1.0);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) CHECK(adj[i] <= adj[j]);  // monotone
      }
    }
  }

  CHECK_THROWS_AS(holm_correct({0.5, 1.5}), ValidationError);
  CHECK_THROWS_AS(holm_correct({-0.1}), ValidationError);
}

TEST_CASE("welch matches direct textbook evaluation on random inputs") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t na = 2 + rng() % 29;
    const std::size_t nb = 2 + rng() % 29;
    std::vector<double> a(na);
    std::vector<double> b(nb);
    for (auto& v : a) v = unit_double(rng) * 4.0 - 2.0;
    for (auto& v : b) v = unit_double(rng) * 6.0 - 2.0;

    double ma = 0;
    for (double v : a) ma += v;
    ma /= static_cast<double>(na);
    double mb = 0;
    for (double v : b) mb += v;
    mb /= static_cast<double>(nb);
    double va = 0;
    for (double v : a) va += (v - ma) * (v - ma);
    va /= static_cast<double>(na - 1);
    double vb = 0;
    for (double v : b) vb += (v - mb) * (v - mb);
    vb /= static_cast<double>(nb - 1);

    const double se2 = va / static_cast<double>(na) + vb / static_cast<double>(nb);
    const double t_direct = (ma - mb) / std::sqrt(se2);
    const double df_direct =
        se2 * se2 /
        ((va / na) * (va / na) / static_cast<double>(na - 1) +
         (vb / nb) * (vb / nb) / static_cast<double>(nb - 1));
    const double p_direct = regularized_incomplete_beta(
        df_direct / 2.0, 0.5, df_direct / (df_direct + t_direct * t_direct));

    const WelchResult r = welch_test(a, b);
    CHECK(std::fabs(r.t - t_direct) < 1e-12);
    CHECK(std::fabs(r.df - df_direct) < 1e-12);
    CHECK(std::fabs(r.p - p_direct) < 1e-12);
  }
}

TEST_CASE("degenerate welch inputs take the documented conventions") {
  const WelchResult same = welch_test({2, 2, 2}, {2, 2, 2, 2});
  CHECK(same.testable);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);
  CHECK(same.df == 5.0);

  const WelchResult different = welch_test({1, 1, 1}, {2, 2, 2});
  CHECK_FALSE(different.testable);
  CHECK(different.p == 1.0);

  CHECK_THROWS_AS(welch_test({1.0}, {1, 2, 3}), ValidationError);

  const auto d_same = cohens_d({2, 2}, {2, 2});
  REQUIRE(d_same.has_value());
  CHECK(*d_same == 0.0);
  CHECK_FALSE(cohens_d({1, 1}, {2, 2}).has_value());
  const auto d_identical = cohens_d({1, 2, 3}, {1, 2, 3});
  REQUIRE(d_identical.has_value());
  CHECK(*d_identical == 0.0);
}

TEST_CASE("sample sd example") {
  const auto summaries = summarize({{"g", {0.4, 0.6}}});
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].mean == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(summaries[0].sd ==
        doctest::Approx(0.14142135623730948).epsilon(1e-12));
  CHECK(summaries[0].n == 2);
}

namespace {

std::vector<PromptSpec> default_battery() {
  return build_battery(default_registry());
}

std::vector<ScoreRow> rows_for(const std::vector<PromptSpec>& battery,
                               int per_prompt, double value) {
  std::vector<ScoreRow> rows;
  for (const auto& spec : battery) {
    for (int i = 0; i < per_prompt; ++i) {
      rows.push_back({spec.prompt_id, "m", i, value});
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("category rollups collect every prompt carrying the marker") {
  const auto battery = default_battery();
  const auto rows = rows_for(battery, 1, 0.5);
  const GroupedScores groups =
      group_scores(rows, battery, GroupLevel::category);
  // 4 nouns x 10 disability slots = 40 prompts mention each religion.
  CHECK(groups.at("religion:muslim").size() == 40);
  CHECK(groups.at("religion:atheist").size() == 40);
  // 4 nouns x 7 religion slots = 28 prompts carry each disability.
  CHECK(groups.at("disability:blind").size() == 28);
  // 7 x 10 = 70 prompts per noun, including the baseline noun's rollup.
  CHECK(groups.at("noun:person").size() == 70);
  CHECK(groups.at("noun:transgender_person").size() == 70);

  const GroupedScores signatures =
      group_scores(rows, battery, GroupLevel::signature);
  CHECK(signatures.size() == 280);
  CHECK(signatures.at("person|-|-").size() == 1);
}

TEST_CASE("group_scores rejects score rows that match no battery prompt") {
  const auto battery = default_battery();
  std::vector<ScoreRow> rows = rows_for(battery, 1, 0.5);
  rows.push_back({"deadbeefdeadbeef", "m", 0, 0.5});
  CHECK_THROWS_AS(group_scores(rows, battery, GroupLevel::signature),
                  ValidationError);
}

TEST_CASE("bias_findings compares against the baseline with Holm correction") {
  std::vector<GroupSummary> summaries = {
      {"person|-|-", 40, 0.50, 0.05},
      {"person|muslim|-", 40, 0.20, 0.05},
      {"person|hindu|-", 40, 0.49, 0.05},
      {"person|-|blind", 40, 0.47, 0.05},
  };
  const auto findings = bias_findings(summaries, "person|-|-", 0.05);
  REQUIRE(findings.size() == 3);
  // Sorted by delta ascending: muslim first.
  CHECK(findings[0].group_key == "person|muslim|-");
  CHECK(findings[0].delta == doctest::Approx(-0.30).epsilon(1e-12));
  CHECK(findings[0].significant);
  CHECK(findings[0].p_adjusted >= findings[0].p_value);
  CHECK(findings[2].group_key == "person|hindu|-");
  CHECK_FALSE(findings[2].significant);
  for (const auto& f : findings) {
    CHECK(f.baseline_key == "person|-|-");
    CHECK(f.significant == (f.p_adjusted < 0.05));
  }

  CHECK_THROWS_AS(bias_findings(summaries, "woman|-|-", 0.05),
                  ValidationError);
  summaries.push_back({"person|-|deaf", 1, 0.5, 0.0});
  CHECK_THROWS_AS(bias_findings(summaries, "person|-|-", 0.05),
                  ValidationError);
}

TEST_CASE("interaction residuals vanish on additive data") {
  GroupedScores groups;
  const double base = 0.5, dr = -0.1, dd = -0.05, dn = 0.02;
  auto fill = [](double mean) {
    return std::vector<double>{mean - 0.01, mean + 0.01, mean - 0.01,
                               mean + 0.01};
  };
  groups["person|-|-"] = fill(base);
  groups["woman|-|-"] = fill(base + dn);
  groups["person|muslim|-"] = fill(base + dr);
  groups["person|-|blind"] = fill(base + dd);
  groups["woman|muslim|-"] = fill(base + dn + dr);
  groups["woman|-|blind"] = fill(base + dn + dd);
  groups["person|muslim|blind"] = fill(base + dr + dd);
  groups["woman|muslim|blind"] = fill(base + dn + dr + dd);

  const auto residuals = interaction_residuals(groups, "person|-|-", 64, 7);
  REQUIRE(residuals.size() == 4);  // only the >= 2 marker groups
  for (const auto& r : residuals) {
    CHECK(std::fabs(r.residual) < 1e-9);
    CHECK(r.residual_se > 0.0);
  }

  CHECK(interaction_residual_point(groups, "person|muslim|-", "person|-|-") ==
        0.0);
  CHECK(interaction_residual_point(groups, "woman|-|-", "person|-|-") == 0.0);
  CHECK(interaction_residual_point(groups, "person|-|-", "person|-|-") == 0.0);
}

TEST_CASE("interaction residuals recover a planted interaction") {
  std::mt19937_64 rng(424242);
  auto noisy = [&](double mean, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
      // Box-Muller keeps the draw sequence platform-stable.
      const double u1 = unit_double(rng);
      const double u2 = unit_double(rng);
      const double z =
          std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586 * u2);
      out.push_back(mean + 0.03 * z);
    }
    return out;
  };
  GroupedScores groups;
  groups["person|-|-"] = noisy(0.5, 60);
  groups["person|muslim|-"] = noisy(0.4, 60);
  groups["person|-|blind"] = noisy(0.45, 60);
  groups["person|muslim|blind"] = noisy(0.35 - 0.1, 60);  // -0.1 interaction

  const auto residuals = interaction_residuals(groups, "person|-|-", 1000, 11);
  REQUIRE(residuals.size() == 1);
  CHECK(residuals[0].group_key == "person|muslim|blind");
  CHECK(residuals[0].residual == doctest::Approx(-0.1).epsilon(0.2));
  CHECK(std::fabs(residuals[0].residual - (-0.1)) < 0.02);
  CHECK(residuals[0].residual_se > 0.001);
  CHECK(residuals[0].residual_se < 0.02);
}

TEST_CASE("interaction residuals require constituent groups") {
  GroupedScores groups;
  groups["person|-|-"] = {0.5, 0.5};
  groups["woman|muslim|-"] = {0.4, 0.4};
  // woman|-|- and person|muslim|- missing.
  CHECK_THROWS_AS(interaction_residuals(groups, "person|-|-", 16, 1),
                  ValidationError);
}

TEST_CASE("interaction residual bootstrap is independent of enumeration order") {
  GroupedScores groups;
  groups["person|-|-"] = {0.5, 0.52, 0.48, 0.51};
  groups["woman|-|-"] = {0.52, 0.53, 0.50, 0.51};
  groups["person|muslim|-"] = {0.40, 0.42, 0.41, 0.39};
  groups["woman|muslim|-"] = {0.40, 0.38, 0.39, 0.41};
  groups["person|-|blind"] = {0.45, 0.46, 0.44, 0.45};
  groups["woman|-|blind"] = {0.46, 0.44, 0.45, 0.47};
  groups["woman|muslim|blind"] = {0.33, 0.35, 0.34, 0.32};
  groups["person|muslim|blind"] = {0.36, 0.35, 0.37, 0.36};

  const auto all = interaction_residuals(groups, "person|-|-", 256, 5);

  GroupedScores subset = groups;
  subset.erase("person|muslim|blind");
  // woman|muslim|-, woman|-|blind and woman|muslim|blind stay multi-marker.
  const auto fewer = interaction_residuals(subset, "person|-|-", 256, 5);
  REQUIRE(fewer.size() == 3);
  const auto find_key = [](const std::vector<InteractionResidual>& rs,
                           const std::string& key) {
    return std::find_if(rs.begin(), rs.end(),
                        [&](const InteractionResidual& r) {
                          return r.group_key == key;
                        });
  };
  const auto in_all = find_key(all, "woman|muslim|blind");
  const auto in_fewer = find_key(fewer, "woman|muslim|blind");
  REQUIRE(in_all != all.end());
  REQUIRE(in_fewer != fewer.end());
  CHECK(in_all->residual_se == in_fewer->residual_se);
  CHECK(in_all->residual == in_fewer->residual);
}

TEST_CASE("rank_prompts selects disjoint extremes with lexicographic ties") {
  const auto battery = default_battery();
  std::vector<GroupSummary> summaries;
  for (const auto& spec : battery) {
    summaries.push_back({spec.group_key, 10, 0.5, 0.01});
  }
  // Mark two extremes.
  summaries[3].mean = 0.1;
  summaries[7].mean = 0.9;

  const RankedPools pools = rank_prompts(summaries, 5, battery);
  REQUIRE(pools.low_keys.size() == 5);
  REQUIRE(pools.high_keys.size() == 5);
  CHECK(pools.low_keys[0] == summaries[3].group_key);
  CHECK(pools.high_keys[0] == summaries[7].group_key);
  std::set<std::string> pool_union(pools.low_keys.begin(),
                                   pools.low_keys.end());
  pool_union.insert(pools.high_keys.begin(), pools.high_keys.end());
  CHECK(pool_union.size() == 10);  // disjoint

  // Tie at the low boundary resolves to the lexicographically smaller key.
  std::vector<GroupSummary> tied = {
      {"b|-|-", 4, 0.3, 0.0}, {"a|-|-", 4, 0.3, 0.0}, {"c|-|-", 4, 0.7, 0.0},
      {"d|-|-", 4, 0.8, 0.0},
  };
  std::vector<PromptSpec> tiny_battery;
  for (const auto& s : tied) {
    PromptSpec spec;
    spec.prompt_id = "id-" + s.group_key.substr(0, 1);
    spec.group_key = s.group_key;
    tiny_battery.push_back(spec);
  }
  const RankedPools tied_pools = rank_prompts(tied, 1, tiny_battery);
  CHECK(tied_pools.low_keys[0] == "a|-|-");
  CHECK(tied_pools.high_keys[0] == "d|-|-");

  CHECK_THROWS_AS(rank_prompts(tied, 3, tiny_battery), ValidationError);
  CHECK_THROWS_AS(rank_prompts(tied, 0, tiny_battery), ValidationError);
}

TEST_CASE("score grouping is independent of row order") {
  const auto battery = default_battery();
  std::vector<ScoreRow> rows;
  std::mt19937_64 rng(8);
  for (const auto& spec : battery) {
    for (int i = 0; i < 3; ++i) {
      rows.push_back({spec.prompt_id, "m", i, unit_double(rng)});
    }
  }
  auto shuffled = rows;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[uniform_below(rng, i)]);
  }
  const auto a = group_scores(rows, battery, GroupLevel::signature);
  const auto b = group_scores(shuffled, battery, GroupLevel::signature);
  CHECK(a == b);

  const auto res_a = interaction_residuals(a, "person|-|-", 64, 3);
  const auto res_b = interaction_residuals(b, "person|-|-", 64, 3);
  REQUIRE(res_a.size() == res_b.size());
  for (std::size_t i = 0; i < res_a.size(); ++i) {
    CHECK(res_a[i].residual == res_b[i].residual);
    CHECK(res_a[i].residual_se == res_b[i].residual_se);
  }
}
