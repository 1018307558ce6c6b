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

#include "presa/config.h"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "presa/error.h"
#include "presa/json_io.h"

namespace presa {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
          c == '.' || c == '-')) {
      return false;
    }
  }
  return true;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError("unterminated list: " + v);
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v +
                      "'");
  }
  return n;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile f;
  std::stringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  bool saw_version = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) fail("bad section name '" + section + "'");
      if (!saw_version) fail("config_version must be the first key");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_name(key)) fail("bad key '" + key + "'");
    if (!saw_version) {
      if (key != "config_version" || !section.empty()) {
        fail("config_version must be the first key");
      }
      if (value != "1") {
        fail("unsupported config_version '" + value + "' (expected 1)");
      }
      saw_version = true;
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (f.entries_.count(full) != 0) fail("duplicate key '" + full + "'");
    f.entries_[full] = value;
    f.lines_[full] = line_no;
  }
  if (!saw_version) throw ConfigError("config: missing config_version = 1");
  return f;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  return parse(text);
}

bool KeyValueFile::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::map<std::string, std::string>::const_iterator KeyValueFile::lookup(
    const std::string& key) const {
  auto it = entries_.find(key);
  if (it != entries_.end()) read_.insert(key);
  return it;
}

std::vector<std::string> KeyValueFile::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : entries_) {
    if (read_.count(key) == 0) out.push_back(key);
  }
  return out;
}

std::size_t KeyValueFile::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) const {
  auto it = lookup(key);
  return it == entries_.end() ? fallback : unquote(it->second);
}

double KeyValueFile::get_double(const std::string& key,
                                double fallback) const {
  auto it = lookup(key);
  return it == entries_.end() ? fallback : to_double(key, it->second);
}

long long KeyValueFile::get_int(const std::string& key,
                                long long fallback) const {
  auto it = lookup(key);
  return it == entries_.end() ? fallback : to_int(key, it->second);
}

std::uint64_t KeyValueFile::get_u64(const std::string& key,
                                    std::uint64_t fallback) const {
  auto it = lookup(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v.front() == '-' || end != v.c_str() + v.size() ||
      errno == ERANGE) {
    throw ConfigError("key '" + key + "': expected an unsigned integer");
  }
  return n;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto it = lookup(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false");
}

std::vector<double> KeyValueFile::get_doubles(
    const std::string& key, std::vector<double> fallback) const {
  auto it = lookup(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) {
    out.push_back(to_double(key, item));
  }
  return out;
}

std::vector<int> KeyValueFile::get_ints(const std::string& key,
                                        std::vector<int> fallback) const {
  auto it = lookup(key);
  if (it == entries_.end()) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(it->second)) {
    out.push_back(static_cast<int>(to_int(key, item)));
  }
  return out;
}

GridSpec shortcut_grid() {
  GridSpec g;
  g.width = 5;
  g.height = 5;
  g.start_cells = {20};
  g.goal_cells = {4};
  g.hazard_cells = {0, 6, 12, 18, 21};
  g.step_reward = -1.0;
  g.goal_reward = 10.0;
  g.hazard_cost = 10.0;
  g.slip_prob = 0.0;
  g.horizon = 20;
  return g;
}

namespace {

EnvSpec env_from_file(const KeyValueFile& f) {
  const std::string kind = f.get_string("env.kind", "shortcut_grid");
  if (kind == "shortcut_grid" || kind == "grid") {
    GridSpec g = kind == "shortcut_grid" ? shortcut_grid() : GridSpec{};
    g.width = static_cast<int>(f.get_int("env.width", g.width));
    g.height = static_cast<int>(f.get_int("env.height", g.height));
    g.start_cells = f.get_ints("env.start_cells", g.start_cells);
    g.goal_cells = f.get_ints("env.goal_cells", g.goal_cells);
    g.hazard_cells = f.get_ints("env.hazard_cells", g.hazard_cells);
    g.step_reward = f.get_double("env.step_reward", g.step_reward);
    g.goal_reward = f.get_double("env.goal_reward", g.goal_reward);
    g.hazard_cost = f.get_double("env.hazard_cost", g.hazard_cost);
    g.slip_prob = f.get_double("env.slip_prob", g.slip_prob);
    g.horizon = static_cast<int>(f.get_int("env.horizon", g.horizon));
    validate(g);
    return g;
  }
  if (kind == "point_mass") {
    PointMassSpec p;
    auto pair = [&](const std::string& key, std::array<double, 2> fb) {
      const auto v = f.get_doubles(key, {fb[0], fb[1]});
      if (v.size() != 2) throw ConfigError("key '" + key + "' needs 2 values");
      return std::array<double, 2>{v[0], v[1]};
    };
    p.arena_halfwidth = f.get_double("env.arena_halfwidth", p.arena_halfwidth);
    p.start = pair("env.start", p.start);
    p.goal_center = pair("env.goal_center", p.goal_center);
    p.goal_radius = f.get_double("env.goal_radius", p.goal_radius);
    p.hazard_center = pair("env.hazard_center", p.hazard_center);
    p.hazard_radius = f.get_double("env.hazard_radius", p.hazard_radius);
    p.max_step = f.get_double("env.max_step", p.max_step);
    p.horizon = static_cast<int>(f.get_int("env.horizon", p.horizon));
    p.dynamics_noise_std =
        f.get_double("env.dynamics_noise_std", p.dynamics_noise_std);
    p.step_reward = f.get_double("env.step_reward", p.step_reward);
    p.goal_reward = f.get_double("env.goal_reward", p.goal_reward);
    p.hazard_cost = f.get_double("env.hazard_cost", p.hazard_cost);
    validate(p);
    return p;
  }
  throw ConfigError("env.kind must be shortcut_grid, grid or point_mass");
}

ZrefMode zref_from_string(const std::string& s) {
  if (s == "minibatch") return ZrefMode::kMinibatch;
  if (s == "full_dataset_periodic") return ZrefMode::kFullDatasetPeriodic;
  throw ConfigError("train.zref_mode must be minibatch or full_dataset_periodic");
}

}  // namespace

ExperimentConfig experiment_from_file(const KeyValueFile& file) {
  KeyValueFile f = file;
  if (const char* env_seed = std::getenv("PRESA_SEED")) {
    f.set("seed", env_seed);
  }
  ExperimentConfig c;
  const std::uint64_t seed = f.get_u64("seed", 0);
  c.env = env_from_file(f);
  c.output_dir = f.get_string("output_dir", ".");

  BehaviorConfig& b = c.behavior;
  b.n_trajectories =
      static_cast<int>(f.get_int("behavior.n_trajectories", b.n_trajectories));
  b.epsilon = f.get_double("behavior.epsilon", b.epsilon);
  b.weight_reward = f.get_double("behavior.weight_reward", b.weight_reward);
  b.weight_safe = f.get_double("behavior.weight_safe", b.weight_safe);
  b.weight_random = f.get_double("behavior.weight_random", b.weight_random);
  if (b.n_trajectories < 2) {
    throw ConfigError("behavior.n_trajectories must be >= 2");
  }
  if (!(b.epsilon >= 0.0 && b.epsilon <= 1.0)) {
    throw ConfigError("behavior.epsilon must lie in [0, 1]");
  }
  if (b.weight_reward < 0 || b.weight_safe < 0 || b.weight_random < 0 ||
      b.weight_reward + b.weight_safe + b.weight_random <= 0) {
    throw ConfigError("behavior weights must be >= 0 with a positive sum");
  }

  DataConfig& d = c.data;
  d.k = static_cast<int>(f.get_int("data.k", d.k));
  d.n_pairs = static_cast<int>(f.get_int("data.n_pairs", d.n_pairs));
  d.kappa = f.get_double("data.kappa", d.kappa);
  d.t_max = static_cast<int>(f.get_int("data.t_max", horizon(c.env)));
  d.windows_per = static_cast<int>(f.get_int("data.windows_per", d.windows_per));
  d.noise_preference = f.get_double("data.noise_preference", 0.0);
  d.noise_safety = f.get_double("data.noise_safety", 0.0);
  d.seed = f.get_u64("data.seed", seed);
  if (d.k < 1) throw ConfigError("data.k must be >= 1");
  if (d.n_pairs < 1) throw ConfigError("data.n_pairs must be >= 1");
  if (d.kappa < 0) throw ConfigError("data.kappa must be >= 0");
  if (d.windows_per < 1) throw ConfigError("data.windows_per must be >= 1");
  for (double lvl : {d.noise_preference, d.noise_safety}) {
    if (!(lvl >= 0.0 && lvl <= 1.0)) {
      throw ConfigError("data noise levels must lie in [0, 1]");
    }
  }

  TrainConfig& t = c.train;
  t.alpha = f.get_double("train.alpha", t.alpha);
  t.beta = f.get_double("train.beta", t.beta);
  t.gamma_loss = f.get_double("train.gamma_loss", t.gamma_loss);
  t.eta = f.get_double("train.eta", t.eta);
  t.delta = f.get_double("train.delta", t.delta);
  t.nu_lr = f.get_double("train.nu_lr", t.nu_lr);
  t.nu_init = f.get_double("train.nu_init", t.nu_init);
  t.dual_every = static_cast<int>(f.get_int("train.dual_every", t.dual_every));
  t.policy_lr = f.get_double("train.policy_lr", t.policy_lr);
  t.bc_lr = f.get_double("train.bc_lr", t.bc_lr);
  t.batch_size = static_cast<int>(f.get_int("train.batch_size", t.batch_size));
  t.train_steps =
      static_cast<int>(f.get_int("train.train_steps", t.train_steps));
  t.pretrain_steps =
      static_cast<int>(f.get_int("train.pretrain_steps", t.pretrain_steps));
  t.zref_mode = zref_from_string(f.get_string("train.zref_mode", "minibatch"));
  t.class_weighting = f.get_bool("train.class_weighting", t.class_weighting);
  t.clip_norm = f.get_double("train.clip_norm", t.clip_norm);
  t.seed = f.get_u64("train.seed", seed);
  t.hidden = f.get_ints("train.hidden", t.hidden);
  t.fixed_log_std = f.get_double("train.fixed_log_std", t.fixed_log_std);
  t.dropout = f.get_double("train.dropout", t.dropout);
  t.validate();

  EvalSettings& e = c.eval;
  e.thresholds = f.get_doubles("eval.thresholds", {2.0, 4.0, 8.0});
  for (double s : f.get_doubles("eval.seeds", {0, 1, 2})) {
    if (s < 0) throw ConfigError("eval.seeds must be non-negative");
    e.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  e.episodes_per = static_cast<int>(f.get_int("eval.episodes_per", 100));
  c.eval_range_given = f.has("eval.r_min") || f.has("eval.r_max");
  if (c.eval_range_given) {
    if (!f.has("eval.r_min") || !f.has("eval.r_max")) {
      throw ConfigError("eval.r_min and eval.r_max must be given together");
    }
    e.r_min = f.get_double("eval.r_min", 0.0);
    e.r_max = f.get_double("eval.r_max", 1.0);
    if (!(e.r_max > e.r_min)) throw ConfigError("eval.r_max must exceed r_min");
  }
  if (e.thresholds.empty()) throw ConfigError("eval.thresholds is empty");
  if (e.seeds.empty()) throw ConfigError("eval.seeds is empty");
  for (double kappa : e.thresholds) {
    if (kappa < 0) throw ConfigError("eval.thresholds must be >= 0");
  }
  if (e.episodes_per < 1) throw ConfigError("eval.episodes_per must be >= 1");

  BoundConfig& bc = c.bound;
  bc.n = static_cast<int>(f.get_int("bound.n", bc.n));
  bc.tau = f.get_double("bound.tau", bc.tau);
  bc.trials = static_cast<int>(f.get_int("bound.trials", bc.trials));
  bc.grid_size = static_cast<int>(f.get_int("bound.grid_size", bc.grid_size));
  bc.m_signs = static_cast<int>(f.get_int("bound.m_signs", bc.m_signs));
  bc.n_truth = static_cast<long>(f.get_int("bound.n_truth", bc.n_truth));
  bc.k = static_cast<int>(f.get_int("bound.k", d.k));
  bc.seed = f.get_u64("bound.seed", seed);
  if (bc.n < 1 || bc.trials < 1 || bc.grid_size < 1 || bc.m_signs < 1 ||
      bc.n_truth < 1 || bc.k < 1) {
    throw ConfigError("bound counts must be >= 1");
  }
  if (!(bc.tau > 0.0 && bc.tau < 1.0)) {
    throw ConfigError("bound.tau must lie in (0, 1)");
  }
  f.get_string("config_version", "1");
  for (const std::string& key : f.unread_keys()) {
    const std::size_t line = f.line_of(key);
    throw ConfigError((line ? "config line " + std::to_string(line) + ": "
                            : std::string("config: ")) +
                      "unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  return experiment_from_file(KeyValueFile::load(path));
}

}  // namespace presa
