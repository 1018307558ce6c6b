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

#ifndef PRESA_CONFIG_H_
#define PRESA_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "presa/env.h"
#include "presa/eval.h"
#include "presa/presa.h"

namespace presa {

// Plain-text key/value file. Grammar, one item per line:
//   # comment            (also after a value)
//   [section]            dotted names allowed: [env.grid]
//   key = value          value: number, bare word, "quoted string" or a
//                        comma-separated list, optionally in [ ]
// The first key must be `config_version = 1`, before any section.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text);
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const;
  // Keys are "section.key" (or just "key" before the first section).
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  std::vector<double> fallback) const;
  std::vector<int> get_ints(const std::string& key,
                            std::vector<int> fallback) const;
  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const {
    return entries_;
  }
  // Keys never passed to a getter, in sorted order.
  std::vector<std::string> unread_keys() const;
  // 0 for keys added with set().
  std::size_t line_of(const std::string& key) const;

 private:
  std::map<std::string, std::string>::const_iterator lookup(
      const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, std::size_t> lines_;
  mutable std::set<std::string> read_;
};

// Behaviour mixture used to generate the offline corpus.
struct BehaviorConfig {
  int n_trajectories = 400;
  double epsilon = 0.1;       // per-step random-action probability (grid)
  double weight_reward = 1.0; // reward-seeking policy
  double weight_safe = 1.0;   // cost-avoiding policy
  double weight_random = 0.5; // uniform random actions
};

struct DataConfig {
  int k = 8;
  int n_pairs = 2000;
  double kappa = 4.0;  // trajectory-level cost threshold
  int t_max = 0;       // 0 means the environment horizon
  int windows_per = 1;
  double noise_preference = 0.0;
  double noise_safety = 0.0;
  std::uint64_t seed = 0;
};

struct BoundConfig {
  int n = 1000;
  double tau = 0.05;
  int trials = 200;
  int grid_size = 64;
  int m_signs = 100;
  long n_truth = 1000000;
  int k = 8;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  EnvSpec env;
  BehaviorConfig behavior;
  DataConfig data;
  TrainConfig train;
  EvalSettings eval;
  BoundConfig bound;
  std::string output_dir = ".";
  bool eval_range_given = false;  // eval.r_min / eval.r_max set explicitly
};

// The 5x5 grid whose shortest route crosses a hazard.
GridSpec shortcut_grid();

// Builds the experiment from a parsed file. PRESA_SEED, when set in the
// environment, replaces the top-level `seed` key. Throws ConfigError.
ExperimentConfig experiment_from_file(const KeyValueFile& file);
ExperimentConfig load_experiment(const std::string& path);

}  // namespace presa

#endif  // PRESA_CONFIG_H_
