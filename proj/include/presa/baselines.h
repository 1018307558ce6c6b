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

#ifndef PRESA_BASELINES_H_
#define PRESA_BASELINES_H_

#include <vector>

#include "presa/env.h"
#include "presa/feedback.h"
#include "presa/policy.h"
#include "presa/presa.h"

namespace presa {

// Behaviour cloning on every stored segment.
PolicySnapshot train_bc_all(const TrainingView& view, const EnvSpec& env,
                            const TrainConfig& cfg);

// Segments labelled safe in at least one pair occurrence.
std::vector<const Segment*> safe_segments(const TrainingView& view);

// Behaviour cloning on safe segments only. Throws ConfigError when none.
PolicySnapshot train_bc_safe_seg(const TrainingView& view, const EnvSpec& env,
                                 const TrainConfig& cfg);

// Collapses (preference, y+, y-) to one label per member: the preferred
// member keeps +1 only when it is safe, the other member is always -1.
struct BinaryLabels {
  int plus;
  int minus;
};
BinaryLabels binary_relabel(int y_plus, int y_minus);
TrainingView binary_alignment_view(const TrainingView& view);

// BC pretraining then the safety objective alone on relabelled pairs, with
// class weights recomputed from the relabelled counts.
TrainResult train_binary_alignment(const TrainingView& view, const EnvSpec& env,
                                   const TrainConfig& cfg);

// Phase two with the preference loss only.
TrainResult train_cpl_constrained_free(const TrainingView& view,
                                       PolicySnapshot pi,
                                       const PolicySnapshot& pi_ref,
                                       const TrainConfig& cfg);

// BC pretraining then pure preference alignment (nu pinned to 0).
TrainResult train_cpl_only(const TrainingView& view, const EnvSpec& env,
                           const TrainConfig& cfg);

}  // namespace presa

#endif  // PRESA_BASELINES_H_
