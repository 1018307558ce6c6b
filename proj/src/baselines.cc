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

#include "presa/baselines.h"

#include <cmath>
#include <string>
#include <unordered_set>

#include "presa/error.h"

namespace presa {
namespace {

void require_finite(double v, const char* what, long step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at step " +
                       std::to_string(step));
  }
}

void require_finite(std::span<const double> v, const char* what, long step) {
  for (double x : v) require_finite(x, what, step);
}

PolicySnapshot pretrained_reference(const TrainingView& view,
                                    const EnvSpec& env,
                                    const TrainConfig& cfg) {
  return pretrain_bc(all_segments(view), make_initial_policy(env, cfg), cfg)
      .clone_as_reference();
}

AdamConfig adam_for(const TrainConfig& cfg) {
  AdamConfig adam;
  adam.lr = cfg.policy_lr;
  adam.clip_norm = cfg.clip_norm;
  return adam;
}

}  // namespace

PolicySnapshot train_bc_all(const TrainingView& view, const EnvSpec& env,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (view.segments.empty()) throw ConfigError("bc-all: empty dataset");
  return pretrain_bc(all_segments(view), make_initial_policy(env, cfg), cfg);
}

std::vector<const Segment*> safe_segments(const TrainingView& view) {
  std::vector<bool> safe(view.segments.size(), false);
  for (const TrainPair& p : view.pairs) {
    if (p.y_plus > 0) safe[p.plus] = true;
    if (p.y_minus > 0) safe[p.minus] = true;
  }
  std::vector<const Segment*> out;
  for (std::size_t i = 0; i < view.segments.size(); ++i) {
    if (safe[i]) out.push_back(&view.segments[i]);
  }
  return out;
}

PolicySnapshot train_bc_safe_seg(const TrainingView& view, const EnvSpec& env,
                                 const TrainConfig& cfg) {
  cfg.validate();
  const auto segs = safe_segments(view);
  if (segs.empty()) throw ConfigError("bc-safe-seg: no safe segments");
  return pretrain_bc(segs, make_initial_policy(env, cfg), cfg);
}

BinaryLabels binary_relabel(int y_plus, int /*y_minus*/) {
  return {y_plus > 0 ? 1 : -1, -1};
}

TrainingView binary_alignment_view(const TrainingView& view) {
  TrainingView out = view;
  for (TrainPair& p : out.pairs) {
    const BinaryLabels b = binary_relabel(p.y_plus, p.y_minus);
    p.y_plus = b.plus;
    p.y_minus = b.minus;
  }
  return out;
}

TrainResult train_binary_alignment(const TrainingView& view, const EnvSpec& env,
                                   const TrainConfig& cfg) {
  cfg.validate();
  const TrainingView relabelled = binary_alignment_view(view);
  const ClassCounts counts = count_label_occurrences(relabelled);
  if (counts.n_s == 0 || counts.n_u == 0) {
    throw ConfigError("binary alignment: relabelled data has a single class");
  }
  const ClassWeights weights =
      cfg.class_weighting ? class_weights(counts.n_s, counts.n_u, cfg.eta)
                          : ClassWeights{1.0, 1.0};

  const PolicySnapshot ref = pretrained_reference(relabelled, env, cfg);
  PolicySnapshot pi = ref;
  CounterRng rng = CounterRng(cfg.seed).fork(kPhase2Stream);
  AdamOptimizer opt(pi.num_params(), adam_for(cfg));
  const bool use_dropout = pi.arch().dropout > 0.0;
  const std::uint64_t dseed = CounterRng(cfg.seed).fork(kDropoutStream).next();
  const long epoch_steps = static_cast<long>(
      (relabelled.pairs.size() + static_cast<std::size_t>(cfg.batch_size) -
       1) /
      static_cast<std::size_t>(cfg.batch_size));

  TrainResult result;
  std::optional<ReferencePoint> z_fixed;
  std::vector<LabeledSegmentRef> members;
  for (long step = 0; step < cfg.train_steps; ++step) {
    if (cfg.zref_mode == ZrefMode::kFullDatasetPeriodic &&
        step % std::max(epoch_steps, 1L) == 0) {
      z_fixed = dataset_reference_point(pi, ref, relabelled, cfg);
    }
    const auto idx = sample_pair_batch(relabelled, cfg.batch_size, rng);
    members.clear();
    for (const PairRef& p : pair_refs(relabelled, idx)) {
      members.push_back({p.plus, p.y_plus});
      members.push_back({p.minus, p.y_minus});
    }
    const DropoutKey key{dseed, hash_combine(kPhase2Stream, static_cast<std::uint64_t>(step))};
    LossResult r = safety_loss(pi, ref, members, weights, cfg, z_fixed,
                               use_dropout ? &key : nullptr);
    require_finite(r.loss, "loss", step);
    require_finite(r.grad, "gradient", step);
    const double grad_norm = opt.step(pi.mutable_params(), r.grad);
    result.log.push_back({step, 0.0, 0.0, 0.0, r.loss, grad_norm});
  }
  result.policy = std::move(pi);
  result.reference = ref;
  return result;
}

TrainResult train_cpl_constrained_free(const TrainingView& view,
                                       PolicySnapshot pi,
                                       const PolicySnapshot& pi_ref,
                                       const TrainConfig& cfg) {
  cfg.validate();
  CounterRng rng = CounterRng(cfg.seed).fork(kPhase2Stream);
  AdamOptimizer opt(pi.num_params(), adam_for(cfg));
  const bool use_dropout = pi.arch().dropout > 0.0;
  const std::uint64_t dseed = CounterRng(cfg.seed).fork(kDropoutStream).next();

  TrainResult result;
  for (long step = 0; step < cfg.train_steps; ++step) {
    const auto idx = sample_pair_batch(view, cfg.batch_size, rng);
    const auto batch = pair_refs(view, idx);
    const DropoutKey key{dseed, hash_combine(kPhase2Stream, static_cast<std::uint64_t>(step))};
    LossResult r = cpl_loss(pi, pi_ref, batch, cfg, use_dropout ? &key : nullptr);
    require_finite(r.loss, "loss", step);
    require_finite(r.grad, "gradient", step);
    const double grad_norm = opt.step(pi.mutable_params(), r.grad);
    result.log.push_back({step, r.loss, 0.0, 0.0, r.loss, grad_norm});
  }
  result.policy = std::move(pi);
  result.reference = pi_ref;
  return result;
}

TrainResult train_cpl_only(const TrainingView& view, const EnvSpec& env,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (view.pairs.empty()) throw ConfigError("cpl: dataset has no pairs");
  const PolicySnapshot ref = pretrained_reference(view, env, cfg);
  return train_cpl_constrained_free(view, ref, ref, cfg);
}

}  // namespace presa
