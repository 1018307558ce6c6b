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

#ifndef PRESA_EVAL_H_
#define PRESA_EVAL_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "presa/env.h"
#include "presa/policy.h"

namespace presa {

// (raw - r_min) / (r_max - r_min), unclamped. Throws ConfigError unless
// r_max > r_min.
double normalized_reward(double raw, double r_min, double r_max);

// 0 for kappa > 0, 1 for kappa == 0.
double cost_epsilon(double kappa);
// (raw + eps) / (kappa + eps).
double normalized_cost(double raw, double kappa, double epsilon);
double normalized_cost(double raw, double kappa);

struct EvalRow {
  double kappa = 0.0;
  std::uint64_t seed = 0;
  double raw_return = 0.0;
  double raw_cost = 0.0;
  double norm_reward = 0.0;
  double norm_cost = 0.0;
  double epsilon = 0.0;
  bool operator==(const EvalRow&) const = default;
};

struct ThresholdSummary {
  double kappa = 0.0;
  double mean_raw_cost = 0.0;
  double mean_norm_reward = 0.0;
  double mean_norm_cost = 0.0;
  bool safe = false;  // mean_norm_cost <= 1
  bool operator==(const ThresholdSummary&) const = default;
};

struct EvalReport {
  double r_min = 0.0;
  double r_max = 1.0;
  double epsilon = 1.0;  // the value used at kappa == 0
  int episodes_per = 0;
  std::vector<EvalRow> per_run;
  std::vector<ThresholdSummary> per_threshold;  // ascending kappa
  double mean_norm_reward = 0.0;
  double mean_norm_cost = 0.0;
  bool safe = false;        // mean_norm_cost <= 1
  double safe_ratio = 0.0;  // fraction of thresholds with a safe summary
  bool operator==(const EvalReport&) const = default;
};

struct EvalSettings {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> seeds;
  int episodes_per = 100;
  double r_min = 0.0;
  double r_max = 1.0;
};

// Recomputes per_threshold and the aggregates from per_run.
void recompute_aggregates(EvalReport& report);

// Average raw return/cost over episodes_per rollouts for every (kappa, seed).
EvalReport constraint_variation_eval(const PolicySnapshot& policy,
                                     const EnvSpec& env,
                                     const EvalSettings& settings);

// Pools the rows of several reports that share r_min/r_max.
EvalReport merge_reports(const std::vector<EvalReport>& reports);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Writes <prefix>.report.json and <prefix>.report.txt.
void emit_report(const std::map<std::string, EvalReport>& reports,
                 const std::string& prefix);
std::string reports_to_text(const std::map<std::string, EvalReport>& reports);
std::string reports_to_json_text(
    const std::map<std::string, EvalReport>& reports);
std::map<std::string, EvalReport> reports_from_json_text(
    const std::string& text);

}  // namespace presa

#endif  // PRESA_EVAL_H_
