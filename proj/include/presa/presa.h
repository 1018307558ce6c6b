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

#ifndef PRESA_PRESA_H_
#define PRESA_PRESA_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "presa/env.h"
#include "presa/feedback.h"
#include "presa/policy.h"

namespace presa {

enum class ZrefMode { kMinibatch, kFullDatasetPeriodic };

struct TrainConfig {
  double alpha = 0.2;       // preference temperature
  double beta = 1.0;        // safety score temperature
  double gamma_loss = 1.0;  // discount inside segment sums
  double eta = 0.1;         // lambda_s n_s / (lambda_u n_u)
  double delta = 0.95;      // per-segment classification floor
  double nu_lr = 0.005;
  double nu_init = 0.0;
  int dual_every = 1;       // policy steps per dual step
  double policy_lr = 1e-4;
  double bc_lr = 0.0;       // 0 means reuse policy_lr
  int batch_size = 32;
  int train_steps = 1000;
  int pretrain_steps = 300;
  ZrefMode zref_mode = ZrefMode::kMinibatch;
  bool class_weighting = true;  // false pins lambda_s = lambda_u = 1
  double clip_norm = 0.0;       // 0 disables gradient clipping
  std::uint64_t seed = 0;
  // Gaussian policy head (point-mass environments).
  std::vector<int> hidden{64, 64};
  double fixed_log_std = 0.0;
  double dropout = 0.0;

  // Throws ConfigError on any out-of-range field.
  void validate() const;
};

struct DualState {
  struct Entry {
    long step = 0;
    double nu = 0.0;
    double constraint_gap = 0.0;
  };
  double nu = 0.0;
  std::vector<Entry> history;
};

struct SegmentScore {
  std::vector<double> per_step_log_ratio;
  double advantage_sum = 0.0;  // sum_t gamma^t alpha log-ratio
  double psi = 0.0;            // sum_t gamma^t beta log-ratio
  double utility = 0.0;        // psi - z_ref, filled by callers
  double class_prob = 0.0;     // filled by callers
};

struct ClassWeights {
  double lambda_s = 1.0;
  double lambda_u = 1.0;
  double weight(int y) const { return y > 0 ? lambda_s : lambda_u; }
};

// Reference point of the safety utility. A distinct type so that it cannot be
// confused with a live score: losses treat it as a constant.
struct ReferencePoint {
  double value = 0.0;
};

struct PairRef {
  const Segment* plus;
  const Segment* minus;
  int y_plus;
  int y_minus;
};

struct LabeledSegmentRef {
  const Segment* segment;
  int y;
};

double sigmoid(double x);
// log(sigmoid(x)) without overflow.
double log_sigmoid(double x);

// Throws UsageError on an empty segment and NumericError (naming the segment
// id) on a non-finite log-probability.
SegmentScore segment_score(const PolicySnapshot& pi,
                           const PolicySnapshot& pi_ref, const Segment& seg,
                           const TrainConfig& cfg,
                           const DropoutKey* dropout = nullptr);

ReferencePoint reference_point(std::span<const double> psis);

// P[plus > minus] = sigmoid(S+ - S-), S = sum_t gamma^t alpha log-ratio.
double preference_prob(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                       const Segment& plus, const Segment& minus,
                       const TrainConfig& cfg);

// Mean -log P[plus > minus] over the batch; gradient w.r.t. pi only.
LossResult cpl_loss(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                    std::span<const PairRef> batch, const TrainConfig& cfg,
                    const DropoutKey* dropout = nullptr);

// lambda_u = 1, lambda_s = eta n_u / n_s.
ClassWeights class_weights(int n_s, int n_u, double eta);

double safety_prob(double psi, ReferencePoint z_ref, int y);

// Mean of w(y) (1 - sigmoid(y (psi - z_ref))). When z_ref is not given it is
// the batch mean of psi. Either way no gradient flows through it.
LossResult safety_loss(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                       std::span<const LabeledSegmentRef> batch,
                       const ClassWeights& weights, const TrainConfig& cfg,
                       std::optional<ReferencePoint> z_ref = std::nullopt,
                       const DropoutKey* dropout = nullptr);

struct LagrangianResult {
  double loss = 0.0;
  double cpl = 0.0;
  double constraint_gap = 0.0;  // mean w(y) (delta - p(y | sigma))
  double z_ref = 0.0;
  std::vector<double> policy_grad;
};

// cpl + nu * constraint_gap, where the constraint runs over both members of
// every pair with their own labels. nu is held fixed.
LagrangianResult lagrangian_loss(const PolicySnapshot& pi,
                                 const PolicySnapshot& pi_ref,
                                 std::span<const PairRef> batch,
                                 const DualState& dual,
                                 const ClassWeights& weights,
                                 const TrainConfig& cfg,
                                 std::optional<ReferencePoint> z_ref =
                                     std::nullopt,
                                 const DropoutKey* dropout = nullptr);

// nu <- max(0, nu + nu_lr * gap); appends to history.
DualState dual_update(const DualState& dual, double constraint_gap,
                      const TrainConfig& cfg, long step = 0);

struct TrainLogEntry {
  long step = 0;
  double cpl = 0.0;
  double safety_gap = 0.0;
  double nu = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  PolicySnapshot policy;
  PolicySnapshot reference;
  DualState dual;
  std::vector<TrainLogEntry> log;
};

// Fresh policy for the environment: tabular softmax over grid cells, or a
// gaussian MLP on point-mass positions.
PolicySnapshot make_initial_policy(const EnvSpec& env, const TrainConfig& cfg);

// Behaviour cloning on minibatches of whole segments drawn from `segments`.
PolicySnapshot pretrain_bc(std::span<const Segment* const> segments,
                           PolicySnapshot init, const TrainConfig& cfg);

// Uniform pair indices with replacement.
std::vector<std::size_t> sample_pair_batch(const TrainingView& view,
                                           int batch_size, CounterRng& rng);
std::vector<PairRef> pair_refs(const TrainingView& view,
                               std::span<const std::size_t> indices);

// Mean psi over every distinct segment of the view (evaluation mode).
ReferencePoint dataset_reference_point(const PolicySnapshot& pi,
                                       const PolicySnapshot& pi_ref,
                                       const TrainingView& view,
                                       const TrainConfig& cfg);

// Phase two only: alternating policy / dual steps from the given policies.
TrainResult train_constrained(const TrainingView& view, PolicySnapshot pi,
                              const PolicySnapshot& pi_ref,
                              const TrainConfig& cfg, DualState dual);

// Full pipeline: BC pretraining, freeze pi_ref, pi := pi_ref, phase two.
TrainResult train(const TrainingView& view, const EnvSpec& env,
                  const TrainConfig& cfg);

// Named RNG streams derived from TrainConfig::seed.
inline constexpr std::uint64_t kBcStream = 1;
inline constexpr std::uint64_t kPhase2Stream = 2;
inline constexpr std::uint64_t kDropoutStream = 3;

std::vector<const Segment*> all_segments(const TrainingView& view);

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log);

}  // namespace presa

#endif  // PRESA_PRESA_H_
