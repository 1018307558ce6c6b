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

#include "presa/presa.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "presa/error.h"

namespace presa {
namespace {

DropoutKey child_key(const DropoutKey& parent, std::uint64_t index) {
  return {parent.seed, hash_combine(parent.key, index)};
}

// grad += coef * d/dtheta sum_t gamma^t log pi(a_t | s_t).
void accumulate_segment_grad(const PolicySnapshot& pi, const Segment& seg,
                             double coef, double gamma, std::span<double> grad,
                             const DropoutKey* dropout) {
  double g = 1.0;
  for (int t = 0; t < seg.k(); ++t) {
    DropoutKey key;
    const DropoutKey* kp = nullptr;
    if (dropout != nullptr) {
      key = child_key(*dropout, static_cast<std::uint64_t>(t));
      kp = &key;
    }
    pi.accumulate_log_prob_grad(seg.states[t], seg.actions[t], coef * g, grad,
                                kp);
    g *= gamma;
  }
}

std::optional<DropoutKey> segment_key(const DropoutKey* batch_key,
                                      std::uint64_t ordinal) {
  if (batch_key == nullptr) return std::nullopt;
  return child_key(*batch_key, ordinal);
}

const DropoutKey* ptr(const std::optional<DropoutKey>& k) {
  return k ? &*k : nullptr;
}

void require_finite(double v, const char* what, long step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + what + " at step " +
                       std::to_string(step));
  }
}

void require_finite(std::span<const double> v, const char* what, long step) {
  for (double x : v) require_finite(x, what, step);
}

std::uint64_t dropout_seed(const TrainConfig& cfg) {
  return CounterRng(cfg.seed).fork(kDropoutStream).next();
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(eta, "eta");
  positive(policy_lr, "policy_lr");
  if (!(gamma_loss > 0.0 && gamma_loss <= 1.0)) {
    throw ConfigError("gamma_loss must lie in (0, 1]");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  if (!(nu_lr >= 0.0)) throw ConfigError("nu_lr must be >= 0");
  if (!(nu_init >= 0.0)) throw ConfigError("nu_init must be >= 0");
  if (!(bc_lr >= 0.0)) throw ConfigError("bc_lr must be >= 0");
  if (dual_every < 1) throw ConfigError("dual_every must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train_steps < 0 || pretrain_steps < 0) {
    throw ConfigError("step counts must be >= 0");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

SegmentScore segment_score(const PolicySnapshot& pi,
                           const PolicySnapshot& pi_ref, const Segment& seg,
                           const TrainConfig& cfg, const DropoutKey* dropout) {
  if (seg.k() == 0) throw UsageError("segment_score: empty segment");
  if (pi.arch().obs_dim != pi_ref.arch().obs_dim ||
      pi.arch().act_dim != pi_ref.arch().act_dim) {
    throw UsageError("policy and reference dimensions differ");
  }
  SegmentScore score;
  score.per_step_log_ratio.reserve(static_cast<std::size_t>(seg.k()));
  double g = 1.0;
  for (int t = 0; t < seg.k(); ++t) {
    DropoutKey key;
    const DropoutKey* kp = nullptr;
    if (dropout != nullptr) {
      key = child_key(*dropout, static_cast<std::uint64_t>(t));
      kp = &key;
    }
    const double lp = pi.log_prob(seg.states[t], seg.actions[t], kp);
    const double lp_ref = pi_ref.log_prob(seg.states[t], seg.actions[t]);
    const double ratio = lp - lp_ref;
    if (!std::isfinite(ratio)) {
      throw NumericError("non-finite log-probability in segment " +
                         format_id(seg.id) + " at step " + std::to_string(t));
    }
    score.per_step_log_ratio.push_back(ratio);
    score.advantage_sum += g * cfg.alpha * ratio;
    score.psi += g * cfg.beta * ratio;
    g *= cfg.gamma_loss;
  }
  return score;
}

ReferencePoint reference_point(std::span<const double> psis) {
  if (psis.empty()) throw UsageError("reference_point: empty score list");
  double sum = 0.0;
  for (double p : psis) sum += p;
  return {sum / static_cast<double>(psis.size())};
}

double preference_prob(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                       const Segment& plus, const Segment& minus,
                       const TrainConfig& cfg) {
  const double s_plus = segment_score(pi, pi_ref, plus, cfg).advantage_sum;
  const double s_minus = segment_score(pi, pi_ref, minus, cfg).advantage_sum;
  return sigmoid(s_plus - s_minus);
}

LossResult cpl_loss(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                    std::span<const PairRef> batch, const TrainConfig& cfg,
                    const DropoutKey* dropout) {
  if (batch.empty()) throw UsageError("cpl_loss: empty batch");
  LossResult out;
  out.grad.assign(pi.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto kp = segment_key(dropout, 2 * i);
    const auto km = segment_key(dropout, 2 * i + 1);
    const double s_plus =
        segment_score(pi, pi_ref, *batch[i].plus, cfg, ptr(kp)).advantage_sum;
    const double s_minus =
        segment_score(pi, pi_ref, *batch[i].minus, cfg, ptr(km)).advantage_sum;
    const double margin = s_plus - s_minus;
    out.loss -= log_sigmoid(margin);
    // d(-log sigmoid(m))/dm = -sigmoid(-m)
    const double d_margin = -sigmoid(-margin) * scale;
    accumulate_segment_grad(pi, *batch[i].plus, d_margin * cfg.alpha,
                            cfg.gamma_loss, out.grad, ptr(kp));
    accumulate_segment_grad(pi, *batch[i].minus, -d_margin * cfg.alpha,
                            cfg.gamma_loss, out.grad, ptr(km));
  }
  out.loss *= scale;
  return out;
}

ClassWeights class_weights(int n_s, int n_u, double eta) {
  if (n_s <= 0) throw ConfigError("class_weights: no safe segments (n_s = 0)");
  if (n_u <= 0) {
    throw ConfigError("class_weights: no unsafe segments (n_u = 0)");
  }
  if (!(eta > 0.0)) throw ConfigError("class_weights: eta must be positive");
  return {eta * static_cast<double>(n_u) / static_cast<double>(n_s), 1.0};
}

double safety_prob(double psi, ReferencePoint z_ref, int y) {
  if (y != 1 && y != -1) throw UsageError("safety label must be +1 or -1");
  return sigmoid(static_cast<double>(y) * (psi - z_ref.value));
}

LossResult safety_loss(const PolicySnapshot& pi, const PolicySnapshot& pi_ref,
                       std::span<const LabeledSegmentRef> batch,
                       const ClassWeights& weights, const TrainConfig& cfg,
                       std::optional<ReferencePoint> z_ref,
                       const DropoutKey* dropout) {
  if (batch.empty()) throw UsageError("safety_loss: empty batch");
  std::vector<double> psi(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto key = segment_key(dropout, i);
    psi[i] = segment_score(pi, pi_ref, *batch[i].segment, cfg, ptr(key)).psi;
  }
  const ReferencePoint z = z_ref ? *z_ref : reference_point(psi);
  LossResult out;
  out.grad.assign(pi.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int y = batch[i].y;
    const double w = weights.weight(y);
    const double p = safety_prob(psi[i], z, y);
    out.loss += w * (1.0 - p);
    const double d_psi = -w * p * (1.0 - p) * y * scale;
    const auto key = segment_key(dropout, i);
    accumulate_segment_grad(pi, *batch[i].segment, d_psi * cfg.beta,
                            cfg.gamma_loss, out.grad, ptr(key));
  }
  out.loss *= scale;
  return out;
}

LagrangianResult lagrangian_loss(const PolicySnapshot& pi,
                                 const PolicySnapshot& pi_ref,
                                 std::span<const PairRef> batch,
                                 const DualState& dual,
                                 const ClassWeights& weights,
                                 const TrainConfig& cfg,
                                 std::optional<ReferencePoint> z_ref,
                                 const DropoutKey* dropout) {
  if (!(dual.nu >= 0.0)) throw UsageError("lagrangian_loss: nu must be >= 0");
  LossResult cpl = cpl_loss(pi, pi_ref, batch, cfg, dropout);

  // Both members of every pair, each with its own label; ordinals match the
  // ones cpl_loss used so dropout masks agree.
  const std::size_t m = 2 * batch.size();
  std::vector<const Segment*> segs(m);
  std::vector<int> labels(m);
  std::vector<double> psi(m);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    segs[2 * i] = batch[i].plus;
    labels[2 * i] = batch[i].y_plus;
    segs[2 * i + 1] = batch[i].minus;
    labels[2 * i + 1] = batch[i].y_minus;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto key = segment_key(dropout, j);
    psi[j] = segment_score(pi, pi_ref, *segs[j], cfg, ptr(key)).psi;
  }
  const ReferencePoint z = z_ref ? *z_ref : reference_point(psi);

  std::vector<double> gap_grad(pi.num_params(), 0.0);
  double gap = 0.0;
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const int y = labels[j];
    const double w = weights.weight(y);
    const double p = safety_prob(psi[j], z, y);
    gap += w * (cfg.delta - p);
    const double d_psi = -w * p * (1.0 - p) * y * scale;
    const auto key = segment_key(dropout, j);
    accumulate_segment_grad(pi, *segs[j], d_psi * cfg.beta, cfg.gamma_loss,
                            gap_grad, ptr(key));
  }
  gap *= scale;

  LagrangianResult out;
  out.cpl = cpl.loss;
  out.constraint_gap = gap;
  out.z_ref = z.value;
  out.loss = cpl.loss + dual.nu * gap;
  out.policy_grad = std::move(cpl.grad);
  for (std::size_t i = 0; i < out.policy_grad.size(); ++i) {
    out.policy_grad[i] += dual.nu * gap_grad[i];
  }
  return out;
}

DualState dual_update(const DualState& dual, double constraint_gap,
                      const TrainConfig& cfg, long step) {
  DualState out = dual;
  out.nu = std::max(0.0, dual.nu + cfg.nu_lr * constraint_gap);
  out.history.push_back({step, out.nu, constraint_gap});
  return out;
}

PolicySnapshot make_initial_policy(const EnvSpec& env, const TrainConfig& cfg) {
  if (is_tabular(env)) {
    return PolicySnapshot::tabular(observation_dim(env), action_dim(env));
  }
  return PolicySnapshot::gaussian_mlp(observation_dim(env), action_dim(env),
                                      cfg.hidden, cfg.fixed_log_std,
                                      cfg.dropout,
                                      CounterRng(cfg.seed).fork(0).next());
}

PolicySnapshot pretrain_bc(std::span<const Segment* const> segments,
                           PolicySnapshot init, const TrainConfig& cfg) {
  if (segments.empty()) throw ConfigError("behaviour cloning needs segments");
  CounterRng rng = CounterRng(cfg.seed).fork(kBcStream);
  AdamConfig adam;
  adam.lr = cfg.bc_lr > 0.0 ? cfg.bc_lr : cfg.policy_lr;
  adam.clip_norm = cfg.clip_norm;
  AdamOptimizer opt(init.num_params(), adam);
  const bool use_dropout = init.arch().dropout > 0.0;
  const std::uint64_t dseed = dropout_seed(cfg);
  std::vector<StateActionRef> batch;
  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Segment* seg = segments[rng.uniform_int(segments.size())];
      for (int t = 0; t < seg->k(); ++t) {
        batch.push_back({&seg->states[t], &seg->actions[t]});
      }
    }
    const DropoutKey key{dseed, hash_combine(kBcStream, static_cast<std::uint64_t>(step))};
    LossResult r = bc_loss(init, batch, use_dropout ? &key : nullptr);
    require_finite(r.loss, "behaviour cloning loss", step);
    require_finite(r.grad, "behaviour cloning gradient", step);
    opt.step(init.mutable_params(), r.grad);
  }
  return init;
}

std::vector<std::size_t> sample_pair_batch(const TrainingView& view,
                                           int batch_size, CounterRng& rng) {
  if (view.pairs.empty()) throw ConfigError("training view has no pairs");
  std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
  for (auto& i : idx) i = rng.uniform_int(view.pairs.size());
  return idx;
}

std::vector<PairRef> pair_refs(const TrainingView& view,
                               std::span<const std::size_t> indices) {
  std::vector<PairRef> refs;
  refs.reserve(indices.size());
  for (std::size_t i : indices) {
    const TrainPair& p = view.pairs[i];
    refs.push_back({&view.segments[p.plus], &view.segments[p.minus], p.y_plus,
                    p.y_minus});
  }
  return refs;
}

ReferencePoint dataset_reference_point(const PolicySnapshot& pi,
                                       const PolicySnapshot& pi_ref,
                                       const TrainingView& view,
                                       const TrainConfig& cfg) {
  std::vector<double> psi;
  psi.reserve(view.segments.size());
  for (const Segment& s : view.segments) {
    psi.push_back(segment_score(pi, pi_ref, s, cfg).psi);
  }
  return reference_point(psi);
}

TrainResult train_constrained(const TrainingView& view, PolicySnapshot pi,
                              const PolicySnapshot& pi_ref,
                              const TrainConfig& cfg, DualState dual) {
  cfg.validate();
  const ClassCounts counts = count_label_occurrences(view);
  const ClassWeights weights = cfg.class_weighting
                                   ? class_weights(counts.n_s, counts.n_u,
                                                   cfg.eta)
                                   : ClassWeights{1.0, 1.0};
  CounterRng rng = CounterRng(cfg.seed).fork(kPhase2Stream);
  AdamConfig adam;
  adam.lr = cfg.policy_lr;
  adam.clip_norm = cfg.clip_norm;
  AdamOptimizer opt(pi.num_params(), adam);
  const bool use_dropout = pi.arch().dropout > 0.0;
  const std::uint64_t dseed = dropout_seed(cfg);
  const long epoch_steps = static_cast<long>(
      (view.pairs.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
      static_cast<std::size_t>(cfg.batch_size));

  TrainResult result;
  std::optional<ReferencePoint> z_fixed;
  for (long step = 0; step < cfg.train_steps; ++step) {
    if (cfg.zref_mode == ZrefMode::kFullDatasetPeriodic &&
        step % std::max(epoch_steps, 1L) == 0) {
      z_fixed = dataset_reference_point(pi, pi_ref, view, cfg);
    }
    const auto idx = sample_pair_batch(view, cfg.batch_size, rng);
    const auto batch = pair_refs(view, idx);
    const DropoutKey key{dseed, hash_combine(kPhase2Stream, static_cast<std::uint64_t>(step))};
    LagrangianResult r = lagrangian_loss(pi, pi_ref, batch, dual, weights, cfg,
                                         z_fixed, use_dropout ? &key : nullptr);
    require_finite(r.loss, "loss", step);
    require_finite(r.policy_grad, "gradient", step);
    const double grad_norm = opt.step(pi.mutable_params(), r.policy_grad);
    if ((step + 1) % cfg.dual_every == 0) {
      dual = dual_update(dual, r.constraint_gap, cfg, step);
    }
    result.log.push_back(
        {step, r.cpl, r.constraint_gap, dual.nu, r.loss, grad_norm});
  }
  result.policy = std::move(pi);
  result.reference = pi_ref;
  result.dual = std::move(dual);
  return result;
}

std::vector<const Segment*> all_segments(const TrainingView& view) {
  std::vector<const Segment*> out;
  out.reserve(view.segments.size());
  for (const Segment& s : view.segments) out.push_back(&s);
  return out;
}

TrainResult train(const TrainingView& view, const EnvSpec& env,
                  const TrainConfig& cfg) {
  cfg.validate();
  const auto segs = all_segments(view);
  PolicySnapshot ref =
      pretrain_bc(segs, make_initial_policy(env, cfg), cfg).clone_as_reference();
  DualState dual;
  dual.nu = cfg.nu_init;
  return train_constrained(view, ref, ref, cfg, std::move(dual));
}

std::string train_log_to_jsonl(const std::vector<TrainLogEntry>& log) {
  std::string out;
  for (const TrainLogEntry& e : log) {
    out += nlohmann::json{{"step", e.step},
                          {"cpl", e.cpl},
                          {"safety_gap", e.safety_gap},
                          {"nu", e.nu},
                          {"loss", e.loss},
                          {"grad_norm", e.grad_norm}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace presa
