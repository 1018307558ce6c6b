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

#include "presa/env.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "presa/error.h"

namespace presa {
namespace {

bool contains(const std::vector<int>& cells, int cell) {
  return std::find(cells.begin(), cells.end(), cell) != cells.end();
}

int apply_move(const GridSpec& spec, int cell, int action) {
  int r = spec.row(cell);
  int c = spec.col(cell);
  switch (static_cast<GridAction>(action)) {
    case GridAction::kUp: r = std::max(0, r - 1); break;
    case GridAction::kDown: r = std::min(spec.height - 1, r + 1); break;
    case GridAction::kLeft: c = std::max(0, c - 1); break;
    case GridAction::kRight: c = std::min(spec.width - 1, c + 1); break;
    case GridAction::kStay: break;
  }
  return r * spec.width + c;
}

bool inside_disc(const std::array<double, 2>& p,
                 const std::array<double, 2>& center, double radius) {
  const double dx = p[0] - center[0];
  const double dy = p[1] - center[1];
  return dx * dx + dy * dy <= radius * radius;
}

int checked_grid_action(const Vec& action) {
  if (action.size() != 1) {
    throw UsageError("grid action must be a single index, got length " +
                     std::to_string(action.size()));
  }
  const double a = action[0];
  if (!(a >= 0.0 && a < kNumGridActions) || a != std::floor(a)) {
    throw UsageError("grid action index out of range");
  }
  return static_cast<int>(a);
}

StepResult step_grid(const GridSpec& spec, const EnvState& state,
                     const Vec& action, CounterRng& rng) {
  int a = checked_grid_action(action);
  if (rng.uniform() < spec.slip_prob) {
    a = static_cast<int>(rng.uniform_int(kNumGridActions));
  }
  const int next = apply_move(spec, state.cell, a);
  StepResult out;
  out.state.cell = next;
  out.state.observation = grid_observation(spec, next);
  out.state.t = state.t + 1;
  const bool goal = spec.is_goal(next);
  out.reward = spec.step_reward + (goal ? spec.goal_reward : 0.0);
  out.cost = spec.is_hazard(next) ? spec.hazard_cost : 0.0;
  out.state.done = goal || out.state.t >= spec.horizon;
  return out;
}

StepResult step_point_mass(const PointMassSpec& spec, const EnvState& state,
                           const Vec& action, CounterRng& rng) {
  if (action.size() != 2) {
    throw UsageError("point-mass action must have length 2, got " +
                     std::to_string(action.size()));
  }
  double ax = action[0];
  double ay = action[1];
  if (!std::isfinite(ax) || !std::isfinite(ay)) {
    throw UsageError("point-mass action is not finite");
  }
  const double norm = std::hypot(ax, ay);
  if (norm > spec.max_step) {
    ax *= spec.max_step / norm;
    ay *= spec.max_step / norm;
  }
  std::array<double, 2> p{state.observation[0] + ax,
                          state.observation[1] + ay};
  if (spec.dynamics_noise_std > 0.0) {
    p[0] += spec.dynamics_noise_std * rng.normal();
    p[1] += spec.dynamics_noise_std * rng.normal();
  }
  const double h = spec.arena_halfwidth;
  p[0] = std::clamp(p[0], -h, h);
  p[1] = std::clamp(p[1], -h, h);

  StepResult out;
  out.state.observation = {p[0], p[1]};
  out.state.t = state.t + 1;
  const bool goal = inside_disc(p, spec.goal_center, spec.goal_radius);
  out.reward = spec.step_reward + (goal ? spec.goal_reward : 0.0);
  out.cost = inside_disc(p, spec.hazard_center, spec.hazard_radius)
                 ? spec.hazard_cost
                 : 0.0;
  out.state.done = goal || out.state.t >= spec.horizon;
  return out;
}

const GridSpec& require_grid(const EnvSpec& spec) {
  const auto* grid = std::get_if<GridSpec>(&spec);
  if (grid == nullptr) {
    throw UnsupportedError("operation requires a tabular (grid) environment");
  }
  return *grid;
}

}  // namespace

bool GridSpec::is_goal(int cell) const { return contains(goal_cells, cell); }
bool GridSpec::is_hazard(int cell) const {
  return contains(hazard_cells, cell);
}

void validate(const GridSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) {
    throw ConfigError("grid width and height must be positive");
  }
  if (spec.start_cells.empty()) {
    throw ConfigError("grid start_cells is empty");
  }
  if (spec.horizon < 1) throw ConfigError("grid horizon must be >= 1");
  if (!(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0)) {
    throw ConfigError("grid slip_prob must lie in [0, 1)");
  }
  if (!(spec.hazard_cost >= 0.0)) {
    throw ConfigError("grid hazard_cost must be non-negative");
  }
  const int n = spec.num_cells();
  for (const auto* cells :
       {&spec.start_cells, &spec.goal_cells, &spec.hazard_cells}) {
    for (int c : *cells) {
      if (c < 0 || c >= n) {
        throw ConfigError("grid cell index " + std::to_string(c) +
                          " out of range");
      }
    }
  }
  for (int s : spec.start_cells) {
    if (spec.is_goal(s)) {
      throw ConfigError("start cell " + std::to_string(s) + " is a goal cell");
    }
  }
}

void validate(const PointMassSpec& spec) {
  if (!(spec.arena_halfwidth > 0.0)) {
    throw ConfigError("point-mass arena_halfwidth must be positive");
  }
  if (!(spec.max_step > 0.0)) {
    throw ConfigError("point-mass max_step must be positive");
  }
  if (!(spec.goal_radius > 0.0) || !(spec.hazard_radius > 0.0)) {
    throw ConfigError("point-mass region radii must be positive");
  }
  if (spec.horizon < 1) throw ConfigError("point-mass horizon must be >= 1");
  if (!(spec.dynamics_noise_std >= 0.0)) {
    throw ConfigError("point-mass dynamics_noise_std must be >= 0");
  }
  if (!(spec.hazard_cost >= 0.0)) {
    throw ConfigError("point-mass hazard_cost must be non-negative");
  }
  const double h = spec.arena_halfwidth;
  auto inside = [h](const std::array<double, 2>& c, double r) {
    return std::abs(c[0]) + r <= h && std::abs(c[1]) + r <= h;
  };
  if (!inside(spec.goal_center, spec.goal_radius) ||
      !inside(spec.hazard_center, spec.hazard_radius)) {
    throw ConfigError("point-mass goal and hazard must lie inside the arena");
  }
  if (std::abs(spec.start[0]) > h || std::abs(spec.start[1]) > h) {
    throw ConfigError("point-mass start lies outside the arena");
  }
}

void validate(const EnvSpec& spec) {
  std::visit([](const auto& s) { validate(s); }, spec);
}

bool is_tabular(const EnvSpec& spec) {
  return std::holds_alternative<GridSpec>(spec);
}

int observation_dim(const EnvSpec& spec) {
  if (const auto* g = std::get_if<GridSpec>(&spec)) return g->num_cells();
  return 2;
}

int action_dim(const EnvSpec& spec) {
  return is_tabular(spec) ? kNumGridActions : 2;
}

int horizon(const EnvSpec& spec) {
  return std::visit([](const auto& s) { return s.horizon; }, spec);
}

std::string env_id(const EnvSpec& spec) {
  if (const auto* g = std::get_if<GridSpec>(&spec)) {
    return "grid-" + std::to_string(g->width) + "x" +
           std::to_string(g->height);
  }
  return "pointmass";
}

Vec grid_observation(const GridSpec& spec, int cell) {
  Vec obs(static_cast<std::size_t>(spec.num_cells()), 0.0);
  obs[static_cast<std::size_t>(cell)] = 1.0;
  return obs;
}

int grid_cell(const Vec& observation) {
  if (observation.empty()) throw UsageError("empty grid observation");
  return static_cast<int>(std::max_element(observation.begin(),
                                           observation.end()) -
                          observation.begin());
}

EnvState reset(const EnvSpec& spec, std::uint64_t seed) {
  validate(spec);
  CounterRng rng(seed);
  EnvState state;
  if (const auto* g = std::get_if<GridSpec>(&spec)) {
    state.cell = g->start_cells[rng.uniform_int(g->start_cells.size())];
    state.observation = grid_observation(*g, state.cell);
  } else {
    const auto& pm = std::get<PointMassSpec>(spec);
    state.observation = {pm.start[0], pm.start[1]};
  }
  return state;
}

StepResult step(const EnvSpec& spec, const EnvState& state, const Vec& action,
                CounterRng& rng) {
  if (state.done) throw UsageError("step called on a finished episode");
  if (const auto* g = std::get_if<GridSpec>(&spec)) {
    return step_grid(*g, state, action, rng);
  }
  return step_point_mass(std::get<PointMassSpec>(spec), state, action, rng);
}

double Trajectory::total_return() const { return discounted_return(1.0); }
double Trajectory::total_cost() const { return discounted_cost(1.0); }

double Trajectory::discounted_return(double gamma) const {
  double total = 0.0;
  double g = 1.0;
  for (const auto& s : steps) {
    total += g * s.reward;
    g *= gamma;
  }
  return total;
}

double Trajectory::discounted_cost(double gamma) const {
  double total = 0.0;
  double g = 1.0;
  for (const auto& s : steps) {
    total += g * s.cost;
    g *= gamma;
  }
  return total;
}

Trajectory rollout(const EnvSpec& spec, const Actor& actor, std::uint64_t seed,
                   int max_len) {
  if (max_len > horizon(spec)) {
    throw UsageError("rollout max_len exceeds the environment horizon");
  }
  CounterRng root(seed);
  CounterRng dynamics = root.fork(1);
  CounterRng policy_rng = root.fork(2);
  EnvState state = reset(spec, seed);
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(std::max(max_len, 0)));
  while (!state.done && state.t < max_len) {
    Vec action = actor(state.observation, policy_rng);
    StepResult r = step(spec, state, action, dynamics);
    traj.steps.push_back(
        Transition{std::move(state.observation), std::move(action), r.reward,
                   r.cost});
    state = std::move(r.state);
  }
  return traj;
}

std::vector<GridOutcome> grid_transitions(const GridSpec& spec, int cell,
                                          int action) {
  std::vector<GridOutcome> out;
  auto add = [&out](int next, double p) {
    if (p == 0.0) return;
    for (auto& o : out) {
      if (o.next_cell == next) {
        o.prob += p;
        return;
      }
    }
    out.push_back({next, p});
  };
  add(apply_move(spec, cell, action), 1.0 - spec.slip_prob);
  for (int a = 0; a < kNumGridActions; ++a) {
    add(apply_move(spec, cell, a), spec.slip_prob / kNumGridActions);
  }
  return out;
}

OracleValues dp_values(const EnvSpec& spec, const ActionTable& policy,
                       double gamma) {
  const GridSpec& grid = require_grid(spec);
  validate(grid);
  const int n = grid.num_cells();
  if (static_cast<int>(policy.size()) != n) {
    throw UsageError("policy table must cover every grid cell");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("dp_values gamma must lie in (0, 1]");
  }
  // Per (cell, action) expected immediate reward/cost and successor list.
  struct Model {
    std::vector<GridOutcome> next;
    double reward = 0.0;
    double cost = 0.0;
  };
  std::vector<std::array<Model, kNumGridActions>> model(
      static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < kNumGridActions; ++a) {
      Model& m = model[s][a];
      m.next = grid_transitions(grid, s, a);
      for (const auto& o : m.next) {
        m.reward += o.prob * (grid.step_reward +
                              (grid.is_goal(o.next_cell) ? grid.goal_reward
                                                         : 0.0));
        m.cost += o.prob * (grid.is_hazard(o.next_cell) ? grid.hazard_cost
                                                        : 0.0);
      }
    }
  }

  OracleValues out;
  out.gamma = gamma;
  out.v_reward.assign(static_cast<std::size_t>(n), 0.0);
  out.v_cost.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> nr(out.v_reward.size());
  std::vector<double> nc(out.v_cost.size());
  for (int iter = 1; iter <= grid.horizon; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (grid.is_goal(s)) {
        nr[s] = nc[s] = 0.0;
        continue;
      }
      double vr = 0.0;
      double vc = 0.0;
      for (int a = 0; a < kNumGridActions; ++a) {
        const double pa = policy[s][a];
        if (pa == 0.0) continue;
        const Model& m = model[s][a];
        double fr = 0.0;
        double fc = 0.0;
        for (const auto& o : m.next) {
          if (grid.is_goal(o.next_cell)) continue;
          fr += o.prob * out.v_reward[o.next_cell];
          fc += o.prob * out.v_cost[o.next_cell];
        }
        vr += pa * (m.reward + gamma * fr);
        vc += pa * (m.cost + gamma * fc);
      }
      nr[s] = vr;
      nc[s] = vc;
      delta = std::max({delta, std::abs(vr - out.v_reward[s]),
                        std::abs(vc - out.v_cost[s])});
    }
    out.v_reward.swap(nr);
    out.v_cost.swap(nc);
    out.iterations = iter;
    out.last_delta = delta;
    if (delta < 1e-12) break;
  }
  return out;
}

double start_value(const GridSpec& spec, const std::vector<double>& v) {
  double total = 0.0;
  for (int s : spec.start_cells) total += v[static_cast<std::size_t>(s)];
  return total / static_cast<double>(spec.start_cells.size());
}

ActionTable dp_optimal_policy(const GridSpec& spec, double gamma,
                              double cost_penalty) {
  validate(spec);
  const int n = spec.num_cells();
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  std::vector<double> nv(v.size(), 0.0);
  auto q_value = [&](int s, int a) {
    double q = 0.0;
    for (const auto& o : grid_transitions(spec, s, a)) {
      const bool goal = spec.is_goal(o.next_cell);
      const double r = spec.step_reward + (goal ? spec.goal_reward : 0.0) -
                       cost_penalty *
                           (spec.is_hazard(o.next_cell) ? spec.hazard_cost
                                                        : 0.0);
      q += o.prob * (r + (goal ? 0.0 : gamma * v[o.next_cell]));
    }
    return q;
  };
  const int max_iter = gamma < 1.0 ? 100000 : spec.horizon;
  for (int iter = 0; iter < max_iter; ++iter) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      if (spec.is_goal(s)) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumGridActions; ++a) best = std::max(best, q_value(s, a));
      nv[s] = best;
      delta = std::max(delta, std::abs(best - v[s]));
    }
    v.swap(nv);
    if (delta < 1e-12) break;
  }
  ActionTable table(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    table[s].fill(0.0);
    int best_a = static_cast<int>(GridAction::kStay);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumGridActions; ++a) {
      const double q = q_value(s, a);
      if (q > best + 1e-12) {
        best = q;
        best_a = a;
      }
    }
    table[s][best_a] = 1.0;
  }
  return table;
}

}  // namespace presa
