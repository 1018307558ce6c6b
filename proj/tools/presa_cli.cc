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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "presa/annotate.h"
#include "presa/error.h"
#include "presa/json_io.h"
#include "presa/pipeline.h"
#include "presa/theory.h"

namespace {

using namespace presa;

constexpr int kSweepRuns = 3;

const std::map<std::string, std::string> kSweepKeys = {
    {"alpha", "train.alpha"},
    {"beta", "train.beta"},
    {"eta", "train.eta"},
    {"delta", "train.delta"},
    {"k", "data.k"},
    {"n_pairs", "data.n_pairs"},
    {"noise_pref", "data.noise_preference"},
    {"noise_safety", "data.noise_safety"},
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("--values has an empty entry");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("--values is empty");
  return out;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

int cmd_gen_data(const std::string& config, const std::string& out,
                 const std::uint64_t* seed) {
  const ExperimentConfig cfg = load_experiment(config);
  const FeedbackDataset data =
      generate_dataset(cfg, seed != nullptr ? *seed : cfg.data.seed);
  ensure_parent(out);
  write_dataset(out, data);
  std::printf("wrote %zu pairs over %zu segments to %s\n", data.pairs.size(),
              data.num_segments(), out.c_str());
  return 0;
}

int cmd_train(const std::string& config, const std::string& dataset,
              const std::string& method_name, const std::string& out) {
  const ExperimentConfig cfg = load_experiment(config);
  const Method method = method_from_string(method_name);
  const FeedbackDataset data = read_dataset(dataset);
  const TrainResult r =
      train_method(method, data, dataset_env(data, cfg), cfg.train);
  ensure_parent(out);
  write_snapshot(out + ".snapshot", r.policy);
  atomic_write_file(out + ".log.jsonl", train_log_to_jsonl(r.log));
  std::printf("%s: %zu steps, nu %.6g -> %s.snapshot\n",
              to_string(method).c_str(), r.log.size(), r.dual.nu, out.c_str());
  return 0;
}

int cmd_eval(const std::string& config, const std::string& snapshot,
             const std::string& dataset, const std::string& out) {
  const ExperimentConfig cfg = load_experiment(config);
  std::optional<FeedbackDataset> data;
  if (!dataset.empty()) data = read_dataset(dataset);
  if (!cfg.eval_range_given && !data) {
    throw ConfigError(
        "eval needs eval.r_min/eval.r_max in the config or --dataset");
  }
  const EnvSpec env = data ? dataset_env(*data, cfg) : cfg.env;
  const EvalSettings settings =
      resolve_eval_settings(cfg, data ? &*data : nullptr);
  const PolicySnapshot policy = read_snapshot(snapshot);
  std::map<std::string, EvalReport> reports;
  reports.emplace(std::filesystem::path(snapshot).stem().string(),
                  constraint_variation_eval(policy, env, settings));
  ensure_parent(out);
  emit_report(reports, out);
  std::fputs(reports_to_text(reports).c_str(), stdout);
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& param,
              const std::string& values, const std::string& out) {
  const auto key = kSweepKeys.find(param);
  if (key == kSweepKeys.end()) throw ConfigError("unknown --param " + param);
  const KeyValueFile base = KeyValueFile::load(config);
  std::filesystem::create_directories(out);
  std::ostringstream summary;
  summary << param << "\tmean_norm_reward\tmean_norm_cost\tsafe_runs\n";
  for (const std::string& v : split_csv(values)) {
    KeyValueFile file = base;
    file.set(key->second, v);
    const ExperimentConfig cfg = experiment_from_file(file);
    const auto runs = run_seeds(cfg, Method::kPresa, kSweepRuns);
    std::map<std::string, EvalReport> reports;
    std::vector<EvalReport> all;
    int safe_runs = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      reports.emplace("presa.run" + std::to_string(i), runs[i].report);
      all.push_back(runs[i].report);
      safe_runs += runs[i].report.safe ? 1 : 0;
    }
    const EvalReport pooled = merge_reports(all);
    reports.emplace("presa", pooled);
    emit_report(reports, out + "/" + param + "_" + v);
    char line[160];
    std::snprintf(line, sizeof line, "%s\t%.6f\t%.6f\t%d/%d\n", v.c_str(),
                  pooled.mean_norm_reward, pooled.mean_norm_cost, safe_runs,
                  kSweepRuns);
    summary << line;
    std::fputs(line, stdout);
    std::fflush(stdout);
  }
  atomic_write_file(out + "/sweep_" + param + ".tsv", summary.str());
  return 0;
}

int cmd_bound(const std::string& config, int grid_size, int trials,
              double tau, const std::string& out) {
  ExperimentConfig cfg = load_experiment(config);
  if (grid_size > 0) cfg.bound.grid_size = grid_size;
  if (trials > 0) cfg.bound.trials = trials;
  if (tau > 0.0) cfg.bound.tau = tau;
  const CoverageSetup setup = make_coverage_setup(cfg);
  const TruthTable truth =
      compute_truth(setup, hash_combine(cfg.bound.seed, 1));
  const BoundReport report =
      coverage_experiment(setup, truth, cfg.bound.n, cfg.bound.tau,
                          cfg.bound.trials, hash_combine(cfg.bound.seed, 2));
  ensure_parent(out);
  atomic_write_file(out, bound_report_to_json(report).dump(2) + "\n");
  std::fputs(bound_report_table(report).c_str(), stdout);
  return 0;
}

int cmd_serve(const std::string& dataset_out, const std::string& corpus,
              int port, const std::string& mode) {
  AnnotationService service(read_dataset(corpus), dataset_out,
                            label_mode_from_string(mode));
  std::printf("annotation service on 127.0.0.1:%d (%s)\n", port, mode.c_str());
  std::fflush(stdout);
  run_annotation_server(service, "127.0.0.1", port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"presa: offline safe policy optimisation from feedback"};
  app.require_subcommand(1);

  std::string config, out, dataset, method, snapshot, param, values;
  std::string dataset_out, corpus, mode = "preference";
  std::uint64_t seed = 0;
  int grid_size = 0, trials = 0, port = 8080;
  double tau = 0.0;

  auto* gen = app.add_subcommand("gen-data", "generate a labelled dataset");
  gen->add_option("--config", config, "config file")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", out, "dataset path")->required();
  auto* seed_opt = gen->add_option("--seed", seed, "dataset seed");

  auto* train = app.add_subcommand("train", "train one method");
  train->add_option("--config", config)->required()->check(CLI::ExistingFile);
  train->add_option("--dataset", dataset)
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--method", method)
      ->required()
      ->check(CLI::IsMember({"presa", "bc-all", "bc-safe-seg", "binary",
                             "cpl"}));
  train->add_option("--out", out, "output prefix")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a policy snapshot");
  eval->add_option("--config", config)->required()->check(CLI::ExistingFile);
  eval->add_option("--snapshot", snapshot)
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--dataset", dataset, "dataset giving r_min/r_max")
      ->check(CLI::ExistingFile);
  eval->add_option("--out", out, "report prefix")->required();

  auto* sweep = app.add_subcommand("sweep", "ablation over one parameter");
  sweep->add_option("--config", config)->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param)
      ->required()
      ->check(CLI::IsMember({"alpha", "beta", "eta", "delta", "k", "n_pairs",
                             "noise_pref", "noise_safety"}));
  sweep->add_option("--values", values, "comma separated")->required();
  sweep->add_option("--out", out, "output directory")->required();

  auto* bound = app.add_subcommand("bound", "feasibility bound coverage");
  bound->add_option("--config", config)->required()->check(CLI::ExistingFile);
  bound->add_option("--grid-size", grid_size)->check(CLI::PositiveNumber);
  bound->add_option("--trials", trials)->check(CLI::PositiveNumber);
  bound->add_option("--tau", tau)->check(CLI::Range(0.0, 1.0));
  bound->add_option("--out", out, "report json")->required();

  auto* serve = app.add_subcommand("serve", "run the annotation service");
  serve->add_option("--dataset-out", dataset_out)->required();
  serve->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));
  serve->add_option("--mode", mode)
      ->check(CLI::IsMember({"preference", "safety", "general"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(config, out, *seed_opt ? &seed : nullptr);
    if (*train) return cmd_train(config, dataset, method, out);
    if (*eval) return cmd_eval(config, snapshot, dataset, out);
    if (*sweep) return cmd_sweep(config, param, values, out);
    if (*bound) return cmd_bound(config, grid_size, trials, tau, out);
    if (*serve) return cmd_serve(dataset_out, corpus, port, mode);
  } catch (const presa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const presa::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const presa::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
