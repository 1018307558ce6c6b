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

#ifndef PRESA_ENV_H_
#define PRESA_ENV_H_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "presa/rng.h"

namespace presa {

using Vec = std::vector<double>;

// Discrete actions of the grid world. Tabular actions travel as a
// one-element Vec holding the index.
enum class GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kNumGridActions = 5;

struct GridSpec {
  int width = 1;
  int height = 1;
  std::vector<int> start_cells;
  std::vector<int> goal_cells;
  std::vector<int> hazard_cells;
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double hazard_cost = 1.0;  // per timestep spent in a hazard cell
  double slip_prob = 0.0;    // probability the executed action is uniform
  int horizon = 1;

  int num_cells() const { return width * height; }
  bool is_goal(int cell) const;
  bool is_hazard(int cell) const;
  int row(int cell) const { return cell / width; }
  int col(int cell) const { return cell % width; }
};

struct PointMassSpec {
  double arena_halfwidth = 1.0;
  std::array<double, 2> start{0.0, 0.0};
  std::array<double, 2> goal_center{0.8, 0.0};
  double goal_radius = 0.15;
  std::array<double, 2> hazard_center{0.4, 0.0};
  double hazard_radius = 0.2;
  double max_step = 0.1;
  int horizon = 40;
  double dynamics_noise_std = 0.0;
  double step_reward = -0.1;
  double goal_reward = 1.0;
  double hazard_cost = 1.0;
};

using EnvSpec = std::variant<GridSpec, PointMassSpec>;

// Throws ConfigError when a spec violates its invariants.
void validate(const GridSpec& spec);
void validate(const PointMassSpec& spec);
void validate(const EnvSpec& spec);

bool is_tabular(const EnvSpec& spec);
int observation_dim(const EnvSpec& spec);
// Number of discrete actions (grid) or action vector length (point-mass).
int action_dim(const EnvSpec& spec);
int horizon(const EnvSpec& spec);
std::string env_id(const EnvSpec& spec);

struct EnvState {
  Vec observation;
  int t = 0;
  bool done = false;
  int cell = -1;  // grid only
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  double cost = 0.0;
};

EnvState reset(const EnvSpec& spec, std::uint64_t seed);
StepResult step(const EnvSpec& spec, const EnvState& state, const Vec& action,
                CounterRng& rng);

Vec grid_observation(const GridSpec& spec, int cell);
// Index of the hot entry of a one-hot observation.
int grid_cell(const Vec& observation);

struct Transition {
  Vec observation;  // state the action was taken in
  Vec action;
  double reward = 0.0;
  double cost = 0.0;
};

struct Trajectory {
  std::vector<Transition> steps;
  double total_return() const;
  double total_cost() const;
  double discounted_return(double gamma) const;
  double discounted_cost(double gamma) const;
};

using Actor = std::function<Vec(const Vec& observation, CounterRng& rng)>;

// Rolls out `actor` from reset(spec, seed) for at most max_len steps.
// The (spec, actor, seed) triple fully determines the result.
Trajectory rollout(const EnvSpec& spec, const Actor& actor, std::uint64_t seed,
                   int max_len);

// state x action table of action probabilities for a tabular policy.
using ActionTable = std::vector<std::array<double, kNumGridActions>>;

struct GridOutcome {
  int next_cell;
  double prob;
};
// Exact next-cell distribution for (cell, action), slip included.
std::vector<GridOutcome> grid_transitions(const GridSpec& spec, int cell,
                                          int action);

struct OracleValues {
  std::vector<double> v_reward;
  std::vector<double> v_cost;
  double gamma = 1.0;
  int iterations = 0;
  // Sup-norm change of the last sweep; < 1e-12 means the horizon-truncated
  // values coincide with the stationary Bellman fixed point.
  double last_delta = 0.0;
};

// Horizon-aware policy evaluation by value iteration on the exact transition
// model: v_n(s) is the expected discounted return with n steps remaining and
// the result is v_horizon, stopping early once a sweep changes by < 1e-12.
// Throws UnsupportedError for point-mass specs.
OracleValues dp_values(const EnvSpec& spec, const ActionTable& policy,
                       double gamma);

// Expected value of dp values under the start distribution.
double start_value(const GridSpec& spec, const std::vector<double>& v);

// Deterministic greedy policy maximising reward - cost_penalty * cost by
// discounted value iteration. Used for behaviour data and the safe optimum.
ActionTable dp_optimal_policy(const GridSpec& spec, double gamma,
                              double cost_penalty);

}  // namespace presa

#endif  // PRESA_ENV_H_
