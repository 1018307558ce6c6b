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

#include "presa/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "presa/error.h"
#include "presa/json_io.h"
#include "presa/rng.h"

namespace presa {

double normalized_reward(double raw, double r_min, double r_max) {
  if (!(r_max > r_min)) {
    throw ConfigError("normalized_reward: r_max must exceed r_min");
  }
  return (raw - r_min) / (r_max - r_min);
}

double cost_epsilon(double kappa) { return kappa > 0.0 ? 0.0 : 1.0; }

double normalized_cost(double raw, double kappa, double epsilon) {
  if (kappa < 0.0) throw ConfigError("normalized_cost: kappa must be >= 0");
  return (raw + epsilon) / (kappa + epsilon);
}

double normalized_cost(double raw, double kappa) {
  return normalized_cost(raw, kappa, cost_epsilon(kappa));
}

void recompute_aggregates(EvalReport& report) {
  std::map<double, std::vector<const EvalRow*>> by_kappa;
  for (const EvalRow& row : report.per_run) by_kappa[row.kappa].push_back(&row);
  report.per_threshold.clear();
  double sum_r = 0.0;
  double sum_c = 0.0;
  int safe_count = 0;
  for (const auto& [kappa, rows] : by_kappa) {
    ThresholdSummary s;
    s.kappa = kappa;
    for (const EvalRow* r : rows) {
      s.mean_raw_cost += r->raw_cost;
      s.mean_norm_reward += r->norm_reward;
      s.mean_norm_cost += r->norm_cost;
    }
    const double n = static_cast<double>(rows.size());
    s.mean_raw_cost /= n;
    s.mean_norm_reward /= n;
    s.mean_norm_cost /= n;
    s.safe = kappa > 0.0 ? s.mean_raw_cost <= kappa : s.mean_norm_cost <= 1.0;
    safe_count += s.safe ? 1 : 0;
    report.per_threshold.push_back(s);
  }
  for (const EvalRow& r : report.per_run) {
    sum_r += r.norm_reward;
    sum_c += r.norm_cost;
  }
  const double n = static_cast<double>(report.per_run.size());
  report.mean_norm_reward = report.per_run.empty() ? 0.0 : sum_r / n;
  report.mean_norm_cost = report.per_run.empty() ? 0.0 : sum_c / n;
  report.safe = !report.per_run.empty() && report.mean_norm_cost <= 1.0;
  report.safe_ratio =
      report.per_threshold.empty()
          ? 0.0
          : static_cast<double>(safe_count) /
                static_cast<double>(report.per_threshold.size());
}

EvalReport constraint_variation_eval(const PolicySnapshot& policy,
                                     const EnvSpec& env,
                                     const EvalSettings& settings) {
  if (settings.thresholds.empty()) {
    throw ConfigError("eval: thresholds must be non-empty");
  }
  if (settings.seeds.empty()) throw ConfigError("eval: seeds must be non-empty");
  if (settings.episodes_per < 1) {
    throw ConfigError("eval: episodes_per must be >= 1");
  }
  // Validates the normalisation range up front.
  normalized_reward(settings.r_min, settings.r_min, settings.r_max);

  EvalReport report;
  report.r_min = settings.r_min;
  report.r_max = settings.r_max;
  report.epsilon = cost_epsilon(0.0);
  report.episodes_per = settings.episodes_per;

  const Actor actor = make_actor(policy, env);
  const int len = horizon(env);
  // Raw outcomes depend on the seed only, so they are shared across kappas.
  std::map<std::uint64_t, std::pair<double, double>> raw;
  for (std::uint64_t seed : settings.seeds) {
    if (raw.count(seed) != 0) continue;
    double ret = 0.0;
    double cost = 0.0;
    for (int e = 0; e < settings.episodes_per; ++e) {
      const Trajectory traj = rollout(
          env, actor, hash_combine(seed, static_cast<std::uint64_t>(e)), len);
      ret += traj.total_return();
      cost += traj.total_cost();
    }
    raw[seed] = {ret / settings.episodes_per, cost / settings.episodes_per};
  }
  for (double kappa : settings.thresholds) {
    for (std::uint64_t seed : settings.seeds) {
      EvalRow row;
      row.kappa = kappa;
      row.seed = seed;
      row.raw_return = raw[seed].first;
      row.raw_cost = raw[seed].second;
      row.epsilon = cost_epsilon(kappa);
      row.norm_reward =
          normalized_reward(row.raw_return, settings.r_min, settings.r_max);
      row.norm_cost = normalized_cost(row.raw_cost, kappa, row.epsilon);
      report.per_run.push_back(row);
    }
  }
  recompute_aggregates(report);
  return report;
}

EvalReport merge_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("merge_reports: nothing to merge");
  EvalReport out;
  out.r_min = reports.front().r_min;
  out.r_max = reports.front().r_max;
  out.epsilon = reports.front().epsilon;
  out.episodes_per = reports.front().episodes_per;
  for (const EvalReport& r : reports) {
    if (r.r_min != out.r_min || r.r_max != out.r_max) {
      throw UsageError("merge_reports: normalisation ranges differ");
    }
    out.per_run.insert(out.per_run.end(), r.per_run.begin(), r.per_run.end());
  }
  recompute_aggregates(out);
  return out;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& r : report.per_run) {
    rows.push_back({{"kappa", r.kappa},
                    {"seed", r.seed},
                    {"raw_return", r.raw_return},
                    {"raw_cost", r.raw_cost},
                    {"norm_reward", r.norm_reward},
                    {"norm_cost", r.norm_cost},
                    {"epsilon", r.epsilon}});
  }
  nlohmann::json thresholds = nlohmann::json::array();
  for (const ThresholdSummary& s : report.per_threshold) {
    thresholds.push_back({{"kappa", s.kappa},
                          {"mean_raw_cost", s.mean_raw_cost},
                          {"mean_norm_reward", s.mean_norm_reward},
                          {"mean_norm_cost", s.mean_norm_cost},
                          {"safe", s.safe}});
  }
  return {{"r_min", report.r_min},
          {"r_max", report.r_max},
          {"epsilon", report.epsilon},
          {"episodes_per", report.episodes_per},
          {"per_run", rows},
          {"per_threshold", thresholds},
          {"aggregates",
           {{"mean_norm_reward", report.mean_norm_reward},
            {"mean_norm_cost", report.mean_norm_cost},
            {"safe", report.safe},
            {"safe_ratio", report.safe_ratio}}}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.r_min = j.at("r_min").get<double>();
    r.r_max = j.at("r_max").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.episodes_per = j.at("episodes_per").get<int>();
    for (const auto& row : j.at("per_run")) {
      EvalRow e;
      e.kappa = row.at("kappa").get<double>();
      e.seed = row.at("seed").get<std::uint64_t>();
      e.raw_return = row.at("raw_return").get<double>();
      e.raw_cost = row.at("raw_cost").get<double>();
      e.norm_reward = row.at("norm_reward").get<double>();
      e.norm_cost = row.at("norm_cost").get<double>();
      e.epsilon = row.at("epsilon").get<double>();
      r.per_run.push_back(e);
    }
    for (const auto& t : j.at("per_threshold")) {
      ThresholdSummary s;
      s.kappa = t.at("kappa").get<double>();
      s.mean_raw_cost = t.at("mean_raw_cost").get<double>();
      s.mean_norm_reward = t.at("mean_norm_reward").get<double>();
      s.mean_norm_cost = t.at("mean_norm_cost").get<double>();
      s.safe = t.at("safe").get<bool>();
      r.per_threshold.push_back(s);
    }
    const auto& agg = j.at("aggregates");
    r.mean_norm_reward = agg.at("mean_norm_reward").get<double>();
    r.mean_norm_cost = agg.at("mean_norm_cost").get<double>();
    r.safe = agg.at("safe").get<bool>();
    r.safe_ratio = agg.at("safe_ratio").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what(), 0);
  }
}

std::string reports_to_json_text(
    const std::map<std::string, EvalReport>& reports) {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, report] : reports) {
    methods[name] = report_to_json(report);
  }
  return nlohmann::json{{"format", "presa-eval"},
                        {"version", 1},
                        {"methods", methods}}
             .dump(2) +
         "\n";
}

std::map<std::string, EvalReport> reports_from_json_text(
    const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what(), 0);
  }
  if (j.value("format", "") != "presa-eval" || j.value("version", 0) != 1) {
    throw ParseError("eval report: unsupported format or version", 0);
  }
  std::map<std::string, EvalReport> out;
  for (const auto& [name, rep] : j.at("methods").items()) {
    out[name] = report_from_json(rep);
  }
  return out;
}

std::string reports_to_text(const std::map<std::string, EvalReport>& reports) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof line, "%-20s %12s %12s %6s %10s\n", "method",
                "reward", "cost", "safe", "safe_ratio");
  out += line;
  for (const auto& [name, r] : reports) {
    std::snprintf(line, sizeof line, "%-20s %12.4f %12.4f %6s %10.4f\n",
                  name.c_str(), r.mean_norm_reward, r.mean_norm_cost,
                  r.safe ? "yes" : "no", r.safe_ratio);
    out += line;
  }
  return out;
}

void emit_report(const std::map<std::string, EvalReport>& reports,
                 const std::string& prefix) {
  atomic_write_file(prefix + ".report.json", reports_to_json_text(reports));
  atomic_write_file(prefix + ".report.txt", reports_to_text(reports));
}

}  // namespace presa
