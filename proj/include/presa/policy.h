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

#ifndef PRESA_POLICY_H_
#define PRESA_POLICY_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "presa/env.h"
#include "presa/rng.h"

namespace presa {

enum class PolicyKind : std::uint8_t { kTabularSoftmax = 1, kGaussianMlp = 2 };

std::string to_string(PolicyKind kind);

struct PolicyArch {
  int obs_dim = 0;
  int act_dim = 0;          // number of actions for tabular policies
  std::vector<int> hidden;  // gaussian_mlp hidden widths, ReLU activations
  double dropout = 0.0;     // applied after each hidden ReLU in training mode
  double fixed_log_std = 0.0;

  bool operator==(const PolicyArch&) const = default;
};

// Identifies one training-mode forward pass. Masks are a pure function of
// (seed, key, layer, unit), so a value pass and a gradient pass with the same
// key see the same mask.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t key = 0;
};

// Parameters plus architecture. A plain value: copies never alias, which is
// what makes a frozen reference policy possible.
class PolicySnapshot {
 public:
  PolicySnapshot() = default;

  static PolicySnapshot tabular(int n_states, int n_actions);
  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static PolicySnapshot gaussian_mlp(int obs_dim, int act_dim,
                                     std::vector<int> hidden,
                                     double fixed_log_std, double dropout,
                                     std::uint64_t init_seed);
  // Builds from raw parts; throws ConfigError when they disagree.
  static PolicySnapshot from_parts(PolicyKind kind, PolicyArch arch,
                                   std::vector<double> params);

  PolicyKind kind() const { return kind_; }
  const PolicyArch& arch() const { return arch_; }
  std::span<const double> params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  std::size_t num_params() const { return params_.size(); }

  // Tabular: log softmax(theta_s)[a]. Gaussian: -||mu(s) - a||^2 with no
  // variance scaling or normalising constant.
  double log_prob(const Vec& observation, const Vec& action,
                  const DropoutKey* dropout = nullptr) const;

  // grad += coef * d log_prob / d params.
  void accumulate_log_prob_grad(const Vec& observation, const Vec& action,
                                double coef, std::span<double> grad,
                                const DropoutKey* dropout = nullptr) const;

  Vec sample(const Vec& observation, CounterRng& rng,
             double action_bound =
                 std::numeric_limits<double>::infinity()) const;

  std::vector<double> action_probs(const Vec& observation) const;  // tabular
  Vec mean_action(const Vec& observation) const;                   // gaussian

  // Frozen copy used as pi_ref.
  PolicySnapshot clone_as_reference() const { return *this; }

  bool operator==(const PolicySnapshot&) const = default;

 private:
  PolicySnapshot(PolicyKind kind, PolicyArch arch, std::vector<double> params);
  int tabular_state(const Vec& observation) const;
  int tabular_action(const Vec& action) const;
  void check_observation(const Vec& observation) const;

  PolicyKind kind_ = PolicyKind::kTabularSoftmax;
  PolicyArch arch_;
  std::vector<double> params_;
};

std::size_t mlp_param_count(int obs_dim, int act_dim,
                            const std::vector<int>& hidden);

// Full state x action probability table of a tabular policy.
ActionTable action_table(const PolicySnapshot& policy);

// Environment actor sampling from `policy`, clipped to the env action bound.
Actor make_actor(const PolicySnapshot& policy, const EnvSpec& spec);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

struct StateActionRef {
  const Vec* observation;
  const Vec* action;
};

// Mean negative log-likelihood over the batch. Throws UsageError when empty.
LossResult bc_loss(const PolicySnapshot& policy,
                   std::span<const StateActionRef> batch,
                   const DropoutKey* dropout = nullptr);

struct GradReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_err = 0.0;
};

using LossFn = std::function<LossResult(const PolicySnapshot&)>;

// Central differences with step h against the analytic gradient. Relative
// error denominator is max(|analytic|, |numeric|, 1e-8).
GradReport grad_check(const PolicySnapshot& policy, const LossFn& loss_fn,
                      double h = 1e-5);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables gradient-norm clipping
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, AdamConfig cfg);
  // Returns the (pre-clipping) gradient norm.
  double step(std::vector<double>& params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

// Binary snapshot: "PRSA", u32 version, u8 kind, arch descriptor,
// little-endian f64 params.
inline constexpr std::uint32_t kSnapshotVersion = 1;
std::vector<std::uint8_t> encode_snapshot(const PolicySnapshot& policy);
PolicySnapshot decode_snapshot(std::span<const std::uint8_t> bytes);
void write_snapshot(const std::string& path, const PolicySnapshot& policy);
PolicySnapshot read_snapshot(const std::string& path);

}  // namespace presa

#endif  // PRESA_POLICY_H_
