// Copyright 2026 The presa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "presa/config.h"
#include "presa/error.h"
#include "presa/pipeline.h"
#include "presa/theory.h"
#include "test_support.h"

namespace presa {
namespace {

TrainConfig unit_config() {
  TrainConfig c;
  c.beta = 1.0;
  c.gamma_loss = 1.0;
  return c;
}

// ---------------------------------------------------------------------------
// Residual independence from the trained policy.

TEST(Lemma1Residual, IdenticalPoliciesGiveEqualResiduals) {
  CounterRng rng(1);
  const PolicySnapshot ref = testing::random_tabular(4, 5, rng);
  const PolicySnapshot pi = testing::perturbed(ref, rng, 1.0);
  std::vector<Segment> set;
  for (int i = 0; i < 5; ++i) {
    set.push_back(testing::random_tabular_segment(4, 5, 4, rng, i));
  }
  const auto [a, b] = lemma1_residual(set[0], set, pi, pi, ref, unit_config());
  EXPECT_EQ(a, b);
}

TEST(Lemma1Residual, UniformReferenceClosedForm) {
  CounterRng rng(2);
  const PolicySnapshot ref = PolicySnapshot::tabular(3, 4);
  const Segment seg = testing::random_tabular_segment(3, 4, 2, rng, 1);
  EXPECT_NEAR(lemma1_closed_form(seg, ref, unit_config()), 2 * std::log(4.0),
              1e-15);
  const PolicySnapshot pa = testing::perturbed(ref, rng, 1.5);
  const PolicySnapshot pb = testing::perturbed(ref, rng, 1.5);
  const std::vector<Segment> set{seg,
                                 testing::random_tabular_segment(3, 4, 2, rng, 2)};
  const auto [a, b] = lemma1_residual(seg, set, pa, pb, ref, unit_config());
  EXPECT_NEAR(a, 2 * std::log(4.0), 1e-12);
  EXPECT_NEAR(b, 2 * std::log(4.0), 1e-12);
}

TEST(Lemma1Property, ResidualIndependentOfPolicy) {
  CounterRng rng(3);
  for (int draw = 0; draw < 100; ++draw) {
    const int n_s = 2 + int(rng.uniform_int(6));
    const int n_a = 2 + int(rng.uniform_int(5));
    const int k = 1 + int(rng.uniform_int(10));
    const PolicySnapshot ref = testing::random_tabular(n_s, n_a, rng, 2.0);
    const PolicySnapshot pa = testing::perturbed(ref, rng, 3.0);
    const PolicySnapshot pb = testing::random_tabular(n_s, n_a, rng, 3.0);
    std::vector<Segment> set;
    for (int i = 0; i < 6; ++i) {
      set.push_back(testing::random_tabular_segment(n_s, n_a, k, rng, i));
    }
    TrainConfig cfg;
    cfg.beta = 0.05 + 3 * rng.uniform();
    cfg.gamma_loss = 0.5 + 0.5 * rng.uniform();
    const Segment& seg = set[rng.uniform_int(set.size())];
    const auto [a, b] = lemma1_residual(seg, set, pa, pb, ref, cfg);
    EXPECT_LT(std::abs(a - b), 1e-9);
    // Independent evaluation of -beta sum gamma^t log pi_ref.
    double closed = 0.0, g = 1.0;
    for (int t = 0; t < seg.k(); ++t) {
      closed -= cfg.beta * g *
                ref.log_prob(seg.states[t], seg.actions[t]);
      g *= cfg.gamma_loss;
    }
    EXPECT_LT(std::abs(a - closed), 1e-9);
    EXPECT_NEAR(lemma1_closed_form(seg, ref, cfg), closed, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Empirical Rademacher estimator.

TEST(Rademacher, ConstantHalfVanishesWithN) {
  const long n = 10000;
  const int m = 200;
  const std::vector<std::vector<double>> values{std::vector<double>(n, 0.5)};
  const RademacherEstimate r = empirical_rademacher(values, m, 7);
  EXPECT_LT(std::abs(r.value), 0.01);
  EXPECT_EQ(r.m_signs, m);
  // Each draw is 0.5 times a mean of N signs: sd 0.5 / sqrt(N).
  const double analytic_se = 0.5 / std::sqrt(double(n)) / std::sqrt(double(m));
  EXPECT_NEAR(r.std_error, analytic_se, 0.25 * analytic_se);
}

TEST(Rademacher, SymmetricPairMatchesBinomialOracle) {
  // Rows +c and -c: the max is c |mean of signs|. For even N,
  // E|S| = N C(N, N/2) / 2^N.
  const int n = 100;
  const double c = 0.5;
  const std::vector<std::vector<double>> values{
      std::vector<double>(n, c), std::vector<double>(n, -c)};
  const RademacherEstimate r = empirical_rademacher(values, 4000, 11);
  const double log_binom =
      std::lgamma(n + 1.0) - 2 * std::lgamma(n / 2 + 1.0) - n * std::log(2.0);
  const double expected = c * std::exp(log_binom);
  EXPECT_NEAR(expected, c * 0.0796, 1e-4);
  EXPECT_NEAR(r.value, expected, 4 * r.std_error);
}

TEST(Rademacher, SingleSampleMatchesSignOracle) {
  // One sample, rows g and 1 - g: a + sign picks max(g, 1 - g), a - sign
  // gives -min(g, 1 - g), so the expectation is |2g - 1| / 2.
  for (double g : {0.01, 0.3, 0.5, 0.99}) {
    const std::vector<std::vector<double>> values{{g}, {1.0 - g}};
    const RademacherEstimate r = empirical_rademacher(values, 2000, 3);
    EXPECT_LE(std::abs(r.value), 1.0);
    EXPECT_NEAR(r.value, 0.5 * std::abs(2 * g - 1), 4 * r.std_error + 1e-12);
  }
}

TEST(Rademacher, DoublingSignDrawsStaysWithinThreeErrors) {
  CounterRng rng(4);
  std::vector<std::vector<double>> values(8, std::vector<double>(300));
  for (auto& row : values) {
    for (double& v : row) v = rng.uniform();
  }
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const RademacherEstimate a = empirical_rademacher(values, 100, seed);
    const RademacherEstimate b = empirical_rademacher(values, 200, seed + 100);
    EXPECT_LT(std::abs(a.value - b.value),
              3 * std::hypot(a.std_error, b.std_error));
  }
}

TEST(Rademacher, DuplicateRowsDoNotChangeEstimate) {
  CounterRng rng(5);
  std::vector<std::vector<double>> values(3, std::vector<double>(50));
  for (auto& row : values) {
    for (double& v : row) v = rng.uniform();
  }
  auto doubled = values;
  doubled.push_back(values[1]);
  EXPECT_EQ(empirical_rademacher(values, 64, 9).value,
            empirical_rademacher(doubled, 64, 9).value);
}

TEST(Rademacher, Errors) {
  EXPECT_THROW(empirical_rademacher(std::vector<std::vector<double>>{}, 10, 1),
               ConfigError);
  EXPECT_THROW(empirical_rademacher({{0.5}}, 0, 1), ConfigError);
}

TEST(SafetyProbMatrix, MatchesIndependentScores) {
  CounterRng rng(6);
  const PolicySnapshot ref = testing::random_tabular(4, 5, rng);
  std::vector<PolicySnapshot> grid;
  for (int i = 0; i < 3; ++i) grid.push_back(testing::perturbed(ref, rng, 1.0));
  std::vector<Segment> segs;
  std::vector<LabeledSegmentRef> samples;
  for (int i = 0; i < 10; ++i) {
    segs.push_back(testing::random_tabular_segment(4, 5, 4, rng, i));
  }
  for (int i = 0; i < 10; ++i) samples.push_back({&segs[i], i % 3 ? 1 : -1});
  TrainConfig cfg;
  cfg.beta = 0.7;
  cfg.gamma_loss = 0.95;
  const std::vector<double> z{0.1, -0.2, 0.3};
  const auto m = safety_prob_matrix(grid, ref, samples, cfg, z);
  ASSERT_EQ(m.size(), 3u);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 10; ++i) {
      const double psi =
          testing::psi_oracle(grid[j], ref, segs[i], cfg.beta, cfg.gamma_loss);
      const double y = samples[i].y;
      EXPECT_NEAR(m[j][i], testing::plain_sigmoid(y * (psi - z[j])), 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Closed-form bound.

TEST(FeasibilityBound, Examples) {
  EXPECT_NEAR(feasibility_bound(1000, 0.05, 0.05),
              0.1 + std::sqrt(std::log(40.0) / 2000.0), 1e-15);
  EXPECT_NEAR(feasibility_bound(1000, 0.05, 0.05), 0.1429, 1e-4);
  EXPECT_EQ(feasibility_bound(1000, 0.05, 0.0), hoeffding_term(1000, 0.05));
}

TEST(FeasibilityBound, StrictlyDecreasingInN) {
  const double b2 = feasibility_bound(100, 0.05, 0.02);
  const double b3 = feasibility_bound(1000, 0.05, 0.02);
  const double b4 = feasibility_bound(10000, 0.05, 0.02);
  EXPECT_GT(b2, b3);
  EXPECT_GT(b3, b4);
}

TEST(FeasibilityBound, IncreasesAsTauShrinks) {
  EXPECT_GT(feasibility_bound(1000, 0.01, 0.03),
            feasibility_bound(1000, 0.5, 0.03));
}

TEST(FeasibilityBound, Errors) {
  EXPECT_THROW(feasibility_bound(1000, 0.0, 0.1), ConfigError);
  EXPECT_THROW(feasibility_bound(1000, 1.0, 0.1), ConfigError);
  EXPECT_THROW(feasibility_bound(1000, -0.2, 0.1), ConfigError);
  EXPECT_THROW(feasibility_bound(0, 0.05, 0.1), ConfigError);
}

// ---------------------------------------------------------------------------
// Coverage experiment, reduced sizes.

CoverageSetup small_setup() {
  ExperimentConfig cfg =
      load_experiment(std::string(PRESA_SOURCE_DIR) + "/configs/shortcut.ini");
  cfg.bound.grid_size = 8;
  cfg.bound.n_truth = 100000;
  cfg.bound.m_signs = 40;
  return make_coverage_setup(cfg);
}

TEST(LogitBonusGrid, SizeAndErrors) {
  const CoverageSetup s = small_setup();
  EXPECT_EQ(s.grid.size(), 8u);
  EXPECT_THROW(logit_bonus_grid(s.env, s.pi_ref, 10), ConfigError);
  const auto one = logit_bonus_grid(s.env, s.pi_ref, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one[0] == s.pi_ref);
}

TEST(PolicyFromTable, ReproducesProbabilities) {
  const CoverageSetup s = small_setup();
  const PolicySnapshot p = policy_from_table(s.behavior);
  for (std::size_t cell = 0; cell < s.behavior.size(); ++cell) {
    for (int a = 0; a < kNumGridActions; ++a) {
      EXPECT_NEAR(std::exp(p.log_prob(testing::one_hot(25, int(cell)),
                                      {double(a)})),
                  s.behavior[cell][a], 1e-12);
    }
  }
}

TEST(CoverageExperiment, BoundHoldsAndIdentityIsExact) {
  const CoverageSetup s = small_setup();
  const TruthTable truth = compute_truth(s, 1);
  ASSERT_EQ(truth.f.size(), s.grid.size());
  const BoundReport r = coverage_experiment(s, truth, 1000, 0.05, 30, 2);
  EXPECT_GE(r.coverage, 0.95);
  EXPECT_EQ(r.trial_bound.size(), 30u);
  EXPECT_NEAR(r.bound, 2 * r.rademacher_hat + r.hoeffding_term, 1e-12);
  EXPECT_NEAR(r.hoeffding_term, std::sqrt(std::log(2 / 0.05) / 2000.0),
              1e-15);
  for (std::size_t i = 0; i < r.trial_bound.size(); ++i) {
    EXPECT_NEAR(r.trial_bound[i],
                2 * r.trial_rademacher[i] + r.hoeffding_term, 1e-12);
    EXPECT_GE(r.trial_max_deviation[i], 0.0);
  }
  EXPECT_EQ(r.empirical_deviation_quantiles.size(), s.grid.size());
  EXPECT_FALSE(r.note.empty());

  const BoundReport big = coverage_experiment(s, truth, 4000, 0.05, 30, 3);
  EXPECT_LT(big.bound, r.bound);
  const BoundReport loose = coverage_experiment(s, truth, 1000, 0.5, 30, 2);
  const BoundReport tight = coverage_experiment(s, truth, 1000, 0.01, 30, 2);
  EXPECT_GT(tight.bound, loose.bound);
}

TEST(CoverageExperiment, DeterministicAndSerialisable) {
  const CoverageSetup s = small_setup();
  const TruthTable truth = compute_truth(s, 5);
  const BoundReport a = coverage_experiment(s, truth, 500, 0.05, 5, 6);
  const BoundReport b = coverage_experiment(s, truth, 500, 0.05, 5, 6);
  EXPECT_EQ(bound_report_to_json(a).dump(), bound_report_to_json(b).dump());
  const nlohmann::json j = bound_report_to_json(a);
  for (const char* key : {"N", "tau", "rademacher_hat", "hoeffding_term",
                          "bound", "empirical_deviation_quantiles",
                          "coverage"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_FALSE(bound_report_table(a).empty());
}

}  // namespace
}  // namespace presa
