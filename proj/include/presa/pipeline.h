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

#ifndef PRESA_PIPELINE_H_
#define PRESA_PIPELINE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "presa/config.h"
#include "presa/env.h"
#include "presa/eval.h"
#include "presa/feedback.h"
#include "presa/presa.h"
#include "presa/theory.h"

namespace presa {

enum class Method { kPresa, kBcAll, kBcSafeSeg, kBinary, kCpl };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

// Epsilon-greedy tabular policy: (1 - eps) on the table's argmax, eps spread
// uniformly.
ActionTable epsilon_greedy(const ActionTable& greedy, double epsilon);
Actor table_actor(const ActionTable& table);

// Scripted point-mass behaviours. `detour` steers around the hazard disc via
// a waypoint beside it; `noise` scales gaussian action noise by max_step.
Actor point_mass_direct_actor(const PointMassSpec& spec, double noise);
Actor point_mass_detour_actor(const PointMassSpec& spec, double noise);
Actor point_mass_random_actor(const PointMassSpec& spec);

// Offline corpus from a seeded mixture of reward-seeking, cost-avoiding and
// random behaviour. Each trajectory picks one behaviour.
std::vector<Trajectory> generate_corpus(const EnvSpec& env,
                                        const BehaviorConfig& behavior,
                                        std::uint64_t seed);

// Corpus -> segments -> labelled pairs -> optional noise. r_min/r_max are the
// corpus's full-trajectory return extremes.
FeedbackDataset generate_dataset(const ExperimentConfig& cfg,
                                 std::uint64_t seed);

// Trains one method. BC methods return the cloned policy as both policy and
// reference with an empty log.
TrainResult train_method(Method method, const FeedbackDataset& dataset,
                         const EnvSpec& env, const TrainConfig& cfg);

// Eval settings with the normalisation range taken from the config when
// given there, else from the dataset meta.
EvalSettings resolve_eval_settings(const ExperimentConfig& cfg,
                                   const FeedbackDataset* dataset);

// Environment of a dataset, falling back to the config's.
EnvSpec dataset_env(const FeedbackDataset& dataset,
                    const ExperimentConfig& cfg);

struct SeedRun {
  std::uint64_t data_seed = 0;
  std::uint64_t train_seed = 0;
  TrainResult train;
  EvalReport report;
};

// `runs` independent generate/train/evaluate passes; run i uses data.seed + i
// and train.seed + i.
std::vector<SeedRun> run_seeds(const ExperimentConfig& cfg, Method method,
                               int runs);

// Per-state average of the three grid behaviours, weighted as in the corpus.
ActionTable grid_behavior_mixture(const GridSpec& spec,
                                  const BehaviorConfig& behavior);

// Coverage experiment over the logit-bonus grid around the behaviour mixture.
CoverageSetup make_coverage_setup(const ExperimentConfig& cfg);

}  // namespace presa

#endif  // PRESA_PIPELINE_H_
