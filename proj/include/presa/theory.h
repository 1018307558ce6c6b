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

#ifndef PRESA_THEORY_H_
#define PRESA_THEORY_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "presa/env.h"
#include "presa/feedback.h"
#include "presa/policy.h"
#include "presa/presa.h"

namespace presa {

// residual(pi) = u(seg; pi) + z_ref(pi) - beta sum_t gamma^t log pi(a_t|s_t)
// where z_ref(pi) is the mean score over `reference_set`. Returns the pair
// (residual(pi_a), residual(pi_b)); both equal -beta sum_t gamma^t
// log pi_ref(a_t|s_t).
std::pair<double, double> lemma1_residual(
    const Segment& seg, std::span<const Segment> reference_set,
    const PolicySnapshot& pi_a, const PolicySnapshot& pi_b,
    const PolicySnapshot& pi_ref, const TrainConfig& cfg);

// -beta sum_t gamma^t log pi_ref(a_t|s_t).
double lemma1_closed_form(const Segment& seg, const PolicySnapshot& pi_ref,
                          const TrainConfig& cfg);

struct RademacherEstimate {
  double value = 0.0;
  double std_error = 0.0;  // of the mean over sign draws
  int m_signs = 0;
};

// values[j][i] = g_j(sample i). Averages, over m seeded sign vectors, the max
// over j of (1/N) sum_i eps_i values[j][i].
RademacherEstimate empirical_rademacher(
    const std::vector<std::vector<double>>& values, int m_signs,
    std::uint64_t seed);

// g_theta(seg_i, y_i) = safety_prob(psi_theta(seg_i), z_theta, y_i) for every
// grid policy, with z_theta given per policy (or the sample mean of psi when
// `z_refs` is empty).
std::vector<std::vector<double>> safety_prob_matrix(
    std::span<const PolicySnapshot> grid, const PolicySnapshot& pi_ref,
    std::span<const LabeledSegmentRef> samples, const TrainConfig& cfg,
    std::span<const double> z_refs = {});

RademacherEstimate empirical_rademacher(
    std::span<const PolicySnapshot> grid, const PolicySnapshot& pi_ref,
    std::span<const LabeledSegmentRef> samples, const TrainConfig& cfg,
    int m_signs, std::uint64_t seed);

double hoeffding_term(long n, double tau);
// 2 rademacher + sqrt(ln(2 / tau) / (2 N)). Throws ConfigError for tau
// outside (0, 1) or N < 1.
double feasibility_bound(long n, double tau, double rademacher_hat);

// ---------------------------------------------------------------------------
// Coverage experiment on a tabular environment.

// Tabular policy whose softmax equals the table (probabilities must be > 0).
PolicySnapshot policy_from_table(const ActionTable& table);

// d^3 policies: pi_ref's logits plus lattice bonuses on hazard-entering
// moves, goal-ward moves (up/right) and stay. Bonuses span [-2, 2].
std::vector<PolicySnapshot> logit_bonus_grid(const GridSpec& spec,
                                             const PolicySnapshot& pi_ref,
                                             int grid_size);

// Compact segment sample: state/action codes and the safety label.
struct SegmentSample {
  std::vector<std::uint8_t> cells;    // k per segment
  std::vector<std::uint8_t> actions;  // k per segment
  std::vector<std::int8_t> labels;
  int k = 0;
  std::size_t size() const { return labels.size(); }
};

// n segments: for each, one behaviour rollout (redrawn until it has at least
// k steps) and one uniformly placed window, labelled by label_safety.
SegmentSample sample_segments(const GridSpec& spec, const ActionTable& behavior,
                              long n, int k, double kappa, int t_max,
                              std::uint64_t seed);

struct CoverageSetup {
  GridSpec env;
  ActionTable behavior;
  std::vector<PolicySnapshot> grid;
  PolicySnapshot pi_ref;
  TrainConfig cfg;  // beta and gamma_loss are used
  int k = 8;
  double kappa = 4.0;
  int t_max = 20;
  long n_truth = 1000000;
  int m_signs = 100;
};

// F per grid policy and the frozen per-policy z_ref, both from one large
// sample.
struct TruthTable {
  std::vector<double> f;
  std::vector<double> z_ref;
  long n_truth = 0;
};
TruthTable compute_truth(const CoverageSetup& setup, std::uint64_t seed);

struct BoundReport {
  long n = 0;
  double tau = 0.0;
  int trials = 0;
  int m_signs = 0;
  long n_truth = 0;
  double rademacher_hat = 0.0;  // mean over trials
  double hoeffding_term = 0.0;
  double bound = 0.0;           // 2 rademacher_hat + hoeffding_term
  double coverage = 0.0;        // fraction of trials with max dev <= bound
  std::vector<double> trial_rademacher;
  std::vector<double> trial_bound;
  std::vector<double> trial_max_deviation;
  // (policy id, 0.95 quantile over trials of |F - F_hat|)
  std::vector<std::pair<int, double>> empirical_deviation_quantiles;
  std::string note;
};

BoundReport coverage_experiment(const CoverageSetup& setup,
                                const TruthTable& truth, long n, double tau,
                                int trials, std::uint64_t seed);

nlohmann::json bound_report_to_json(const BoundReport& report);
std::string bound_report_table(const BoundReport& report);

}  // namespace presa

#endif  // PRESA_THEORY_H_
