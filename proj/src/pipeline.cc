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

#include "presa/pipeline.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "presa/baselines.h"
#include "presa/error.h"
#include "presa/theory.h"

namespace presa {
namespace {

constexpr double kSafePenalty = 100.0;

Vec toward(const std::array<double, 2>& target, const Vec& pos, double len) {
  const double dx = target[0] - pos[0];
  const double dy = target[1] - pos[1];
  const double n = std::hypot(dx, dy);
  if (n < 1e-12) return {0.0, 0.0};
  const double s = std::min(len, n) / n;
  return {dx * s, dy * s};
}

Vec with_noise(Vec a, double scale, CounterRng& rng) {
  if (scale > 0.0) {
    for (double& x : a) x += scale * rng.normal();
  }
  return a;
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "presa") return Method::kPresa;
  if (name == "bc-all") return Method::kBcAll;
  if (name == "bc-safe-seg") return Method::kBcSafeSeg;
  if (name == "binary") return Method::kBinary;
  if (name == "cpl") return Method::kCpl;
  throw ConfigError("unknown method '" + name +
                    "' (presa, bc-all, bc-safe-seg, binary, cpl)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kPresa: return "presa";
    case Method::kBcAll: return "bc-all";
    case Method::kBcSafeSeg: return "bc-safe-seg";
    case Method::kBinary: return "binary";
    case Method::kCpl: return "cpl";
  }
  return "?";
}

ActionTable epsilon_greedy(const ActionTable& greedy, double epsilon) {
  ActionTable out(greedy.size());
  for (std::size_t s = 0; s < greedy.size(); ++s) {
    const auto& row = greedy[s];
    const int best = static_cast<int>(
        std::max_element(row.begin(), row.end()) - row.begin());
    for (int a = 0; a < kNumGridActions; ++a) {
      out[s][a] = epsilon / kNumGridActions + (a == best ? 1.0 - epsilon : 0.0);
    }
  }
  return out;
}

Actor table_actor(const ActionTable& table) {
  return [table](const Vec& obs, CounterRng& rng) {
    const auto& row = table.at(static_cast<std::size_t>(grid_cell(obs)));
    return Vec{static_cast<double>(rng.categorical(row))};
  };
}

Actor point_mass_direct_actor(const PointMassSpec& spec, double noise) {
  return [spec, noise](const Vec& obs, CounterRng& rng) {
    return with_noise(toward(spec.goal_center, obs, spec.max_step),
                      noise * spec.max_step, rng);
  };
}

Actor point_mass_detour_actor(const PointMassSpec& spec, double noise) {
  const double ax = spec.goal_center[0] - spec.start[0];
  const double ay = spec.goal_center[1] - spec.start[1];
  const double an = std::max(std::hypot(ax, ay), 1e-12);
  const std::array<double, 2> axis{ax / an, ay / an};
  const std::array<double, 2> normal{-axis[1], axis[0]};
  const double offset = spec.hazard_radius + 2.0 * spec.max_step;
  const std::array<double, 2> waypoint{
      spec.hazard_center[0] + offset * normal[0],
      spec.hazard_center[1] + offset * normal[1]};
  const double s_wp = (waypoint[0] - spec.start[0]) * axis[0] +
                      (waypoint[1] - spec.start[1]) * axis[1];
  return [spec, noise, axis, waypoint, s_wp](const Vec& obs, CounterRng& rng) {
    const double s = (obs[0] - spec.start[0]) * axis[0] +
                     (obs[1] - spec.start[1]) * axis[1];
    const auto& target = s < s_wp ? waypoint : spec.goal_center;
    return with_noise(toward(target, obs, spec.max_step),
                      noise * spec.max_step, rng);
  };
}

Actor point_mass_random_actor(const PointMassSpec& spec) {
  return [spec](const Vec&, CounterRng& rng) {
    return Vec{spec.max_step * rng.normal(), spec.max_step * rng.normal()};
  };
}

std::array<ActionTable, 3> grid_behaviors(const GridSpec& spec,
                                          double epsilon) {
  GridSpec plan = spec;
  plan.slip_prob = 0.0;
  const ActionTable greedy = dp_optimal_policy(plan, 1.0, 0.0);
  return {epsilon_greedy(greedy, epsilon),
          epsilon_greedy(dp_optimal_policy(plan, 1.0, kSafePenalty), epsilon),
          epsilon_greedy(greedy, 1.0)};
}

std::vector<Trajectory> generate_corpus(const EnvSpec& env,
                                        const BehaviorConfig& behavior,
                                        std::uint64_t seed) {
  validate(env);
  std::array<Actor, 3> actors;
  if (const auto* g = std::get_if<GridSpec>(&env)) {
    // Behaviour planners assume deterministic moves; slip only acts in the
    // rollouts.
    const auto tables = grid_behaviors(*g, behavior.epsilon);
    for (std::size_t i = 0; i < 3; ++i) actors[i] = table_actor(tables[i]);
  } else {
    const auto& p = std::get<PointMassSpec>(env);
    actors[0] = point_mass_direct_actor(p, behavior.epsilon);
    actors[1] = point_mass_detour_actor(p, behavior.epsilon);
    actors[2] = point_mass_random_actor(p);
  }
  const std::array<double, 3> weights{behavior.weight_reward,
                                      behavior.weight_safe,
                                      behavior.weight_random};
  CounterRng picker = CounterRng(seed).fork(10);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(behavior.n_trajectories));
  for (int i = 0; i < behavior.n_trajectories; ++i) {
    const std::size_t which = picker.categorical(weights);
    out.push_back(rollout(env, actors[which],
                          hash_combine(seed, static_cast<std::uint64_t>(i)),
                          horizon(env)));
  }
  return out;
}

FeedbackDataset generate_dataset(const ExperimentConfig& cfg,
                                 std::uint64_t seed) {
  const DataConfig& d = cfg.data;
  CounterRng root(seed);
  const auto corpus = generate_corpus(cfg.env, cfg.behavior, root.fork(1).next());
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = -std::numeric_limits<double>::infinity();
  for (const Trajectory& t : corpus) {
    r_min = std::min(r_min, t.total_return());
    r_max = std::max(r_max, t.total_return());
  }
  const SegmentationResult segs = segment_trajectories(
      corpus, env_id(cfg.env), d.k, root.fork(2).next(), d.windows_per);
  const int t_max = d.t_max > 0 ? d.t_max : horizon(cfg.env);
  FeedbackDataset ds =
      build_dataset(segs, d.n_pairs, d.kappa, t_max, root.fork(3).next());
  ds.meta.seed = seed;
  ds.meta.r_min = r_min;
  ds.meta.r_max = r_max;
  ds.meta.env = cfg.env;
  if (d.noise_preference > 0.0) {
    ds = inject_noise(ds, NoiseChannel::kPreference, d.noise_preference,
                      root.fork(4).next());
  }
  if (d.noise_safety > 0.0) {
    ds = inject_noise(ds, NoiseChannel::kSafety, d.noise_safety,
                      root.fork(5).next());
  }
  return ds;
}

TrainResult train_method(Method method, const FeedbackDataset& dataset,
                         const EnvSpec& env, const TrainConfig& cfg) {
  const TrainingView view = make_training_view(dataset);
  switch (method) {
    case Method::kPresa:
      return train(view, env, cfg);
    case Method::kCpl:
      return train_cpl_only(view, env, cfg);
    case Method::kBinary:
      return train_binary_alignment(view, env, cfg);
    case Method::kBcAll:
    case Method::kBcSafeSeg: {
      TrainResult r;
      r.policy = method == Method::kBcAll ? train_bc_all(view, env, cfg)
                                          : train_bc_safe_seg(view, env, cfg);
      r.reference = r.policy;
      return r;
    }
  }
  throw UsageError("unknown method");
}

EvalSettings resolve_eval_settings(const ExperimentConfig& cfg,
                                   const FeedbackDataset* dataset) {
  EvalSettings e = cfg.eval;
  if (!cfg.eval_range_given) {
    if (dataset == nullptr) {
      throw ConfigError(
          "eval needs eval.r_min/eval.r_max or eval.dataset for the "
          "normalisation range");
    }
    e.r_min = dataset->meta.r_min;
    e.r_max = dataset->meta.r_max;
  }
  return e;
}

EnvSpec dataset_env(const FeedbackDataset& dataset,
                    const ExperimentConfig& cfg) {
  return dataset.meta.env ? *dataset.meta.env : cfg.env;
}

ActionTable grid_behavior_mixture(const GridSpec& spec,
                                  const BehaviorConfig& behavior) {
  const auto tables = grid_behaviors(spec, behavior.epsilon);
  const std::array<double, 3> w{behavior.weight_reward, behavior.weight_safe,
                                behavior.weight_random};
  const double total = w[0] + w[1] + w[2];
  if (!(total > 0.0)) throw ConfigError("behavior weights must not all be 0");
  ActionTable mix(tables[0].size());
  for (std::size_t s = 0; s < mix.size(); ++s) {
    for (int a = 0; a < kNumGridActions; ++a) {
      double p = 0.0;
      for (std::size_t i = 0; i < 3; ++i) p += w[i] * tables[i][s][a];
      mix[s][a] = p / total;
    }
  }
  return mix;
}

CoverageSetup make_coverage_setup(const ExperimentConfig& cfg) {
  const auto* g = std::get_if<GridSpec>(&cfg.env);
  if (g == nullptr) {
    throw UnsupportedError("bound experiments need a grid environment");
  }
  CoverageSetup setup;
  setup.env = *g;
  setup.behavior = grid_behavior_mixture(*g, cfg.behavior);
  setup.pi_ref = policy_from_table(setup.behavior);
  setup.grid = logit_bonus_grid(*g, setup.pi_ref, cfg.bound.grid_size);
  setup.cfg = cfg.train;
  setup.k = cfg.bound.k;
  setup.kappa = cfg.data.kappa;
  setup.t_max = cfg.data.t_max;
  setup.n_truth = cfg.bound.n_truth;
  setup.m_signs = cfg.bound.m_signs;
  return setup;
}

std::vector<SeedRun> run_seeds(const ExperimentConfig& cfg, Method method,
                               int runs) {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  std::vector<SeedRun> out;
  for (int i = 0; i < runs; ++i) {
    const auto offset = static_cast<std::uint64_t>(i);
    SeedRun run;
    run.data_seed = cfg.data.seed + offset;
    run.train_seed = cfg.train.seed + offset;
    const FeedbackDataset data = generate_dataset(cfg, run.data_seed);
    TrainConfig tc = cfg.train;
    tc.seed = run.train_seed;
    run.train = train_method(method, data, dataset_env(data, cfg), tc);
    run.report = constraint_variation_eval(run.train.policy,
                                           dataset_env(data, cfg),
                                           resolve_eval_settings(cfg, &data));
    out.push_back(std::move(run));
  }
  return out;
}

}  // namespace presa
