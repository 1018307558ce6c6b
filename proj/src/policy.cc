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

#include "presa/policy.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "presa/error.h"

namespace presa {
namespace {

struct LayerShape {
  int in;
  int out;
  std::size_t w_offset;  // row-major out x in
  std::size_t b_offset;
};

std::vector<LayerShape> mlp_layers(const PolicyArch& arch) {
  std::vector<LayerShape> layers;
  int in = arch.obs_dim;
  std::size_t offset = 0;
  auto add = [&](int out) {
    LayerShape l{in, out, offset,
                 offset + static_cast<std::size_t>(in) * out};
    offset = l.b_offset + static_cast<std::size_t>(out);
    layers.push_back(l);
    in = out;
  };
  for (int h : arch.hidden) add(h);
  add(arch.act_dim);
  return layers;
}

double dropout_multiplier(const DropoutKey& key, std::size_t layer,
                          std::size_t unit, double rate) {
  const std::uint64_t h =
      hash_combine(hash_combine(hash_combine(key.seed, key.key), layer), unit);
  const double u = static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
  return u < rate ? 0.0 : 1.0 / (1.0 - rate);
}

struct MlpPass {
  std::vector<Vec> inputs;       // input to each layer
  std::vector<Vec> multipliers;  // relu'(z) * dropout mask, hidden layers
  Vec out;
};

MlpPass mlp_forward(const PolicyArch& arch, std::span<const double> params,
                    const Vec& obs, const DropoutKey* dropout) {
  const auto layers = mlp_layers(arch);
  MlpPass pass;
  Vec a = obs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& s = layers[l];
    Vec z(static_cast<std::size_t>(s.out));
    for (int o = 0; o < s.out; ++o) {
      const double* w = params.data() + s.w_offset +
                        static_cast<std::size_t>(o) * s.in;
      double acc = params[s.b_offset + o];
      for (int i = 0; i < s.in; ++i) acc += w[i] * a[i];
      z[o] = acc;
    }
    pass.inputs.push_back(std::move(a));
    if (l + 1 == layers.size()) {
      pass.out = std::move(z);
      break;
    }
    Vec mult(z.size());
    for (std::size_t o = 0; o < z.size(); ++o) {
      double m = z[o] > 0.0 ? 1.0 : 0.0;
      if (dropout != nullptr && arch.dropout > 0.0 && m != 0.0) {
        m *= dropout_multiplier(*dropout, l, o, arch.dropout);
      }
      mult[o] = m;
      z[o] *= m;
    }
    pass.multipliers.push_back(std::move(mult));
    a = std::move(z);
  }
  return pass;
}

void mlp_backward(const PolicyArch& arch, std::span<const double> params,
                  const MlpPass& pass, Vec d_out, std::span<double> grad) {
  const auto layers = mlp_layers(arch);
  Vec delta = std::move(d_out);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerShape& s = layers[l];
    if (l + 1 < layers.size()) {
      const Vec& mult = pass.multipliers[l];
      for (std::size_t o = 0; o < delta.size(); ++o) delta[o] *= mult[o];
    }
    const Vec& in = pass.inputs[l];
    Vec d_in(static_cast<std::size_t>(s.in), 0.0);
    for (int o = 0; o < s.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const std::size_t row = s.w_offset + static_cast<std::size_t>(o) * s.in;
      for (int i = 0; i < s.in; ++i) {
        grad[row + i] += d * in[i];
        d_in[i] += d * params[row + i];
      }
      grad[s.b_offset + o] += d;
    }
    delta = std::move(d_in);
  }
}

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Little-endian byte helpers.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t uint(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) {
      throw ParseError("snapshot truncated at byte " + std::to_string(pos_), 0);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    }
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  double f64() { return std::bit_cast<double>(uint(8)); }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'P', 'R', 'S', 'A'};

}  // namespace

std::string to_string(PolicyKind kind) {
  return kind == PolicyKind::kTabularSoftmax ? "tabular_softmax"
                                             : "gaussian_mlp";
}

std::size_t mlp_param_count(int obs_dim, int act_dim,
                            const std::vector<int>& hidden) {
  PolicyArch arch;
  arch.obs_dim = obs_dim;
  arch.act_dim = act_dim;
  arch.hidden = hidden;
  const auto layers = mlp_layers(arch);
  return layers.back().b_offset + static_cast<std::size_t>(layers.back().out);
}

PolicySnapshot::PolicySnapshot(PolicyKind kind, PolicyArch arch,
                               std::vector<double> params)
    : kind_(kind), arch_(std::move(arch)), params_(std::move(params)) {}

PolicySnapshot PolicySnapshot::from_parts(PolicyKind kind, PolicyArch arch,
                                          std::vector<double> params) {
  if (arch.obs_dim <= 0 || arch.act_dim <= 0) {
    throw ConfigError("policy dimensions must be positive");
  }
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) {
    throw ConfigError("policy dropout must lie in [0, 1)");
  }
  if (!std::isfinite(arch.fixed_log_std)) {
    throw ConfigError("policy fixed_log_std must be finite");
  }
  std::size_t expected = 0;
  if (kind == PolicyKind::kTabularSoftmax) {
    if (!arch.hidden.empty()) {
      throw ConfigError("tabular policy takes no hidden layers");
    }
    expected = static_cast<std::size_t>(arch.obs_dim) * arch.act_dim;
  } else if (kind == PolicyKind::kGaussianMlp) {
    for (int h : arch.hidden) {
      if (h <= 0) throw ConfigError("hidden widths must be positive");
    }
    expected = mlp_param_count(arch.obs_dim, arch.act_dim, arch.hidden);
  } else {
    throw ConfigError("unknown policy kind");
  }
  if (params.size() != expected) {
    throw ConfigError("policy params length " + std::to_string(params.size()) +
                      " does not match architecture (" +
                      std::to_string(expected) + ")");
  }
  return PolicySnapshot(kind, std::move(arch), std::move(params));
}

PolicySnapshot PolicySnapshot::tabular(int n_states, int n_actions) {
  PolicyArch arch;
  arch.obs_dim = n_states;
  arch.act_dim = n_actions;
  return from_parts(PolicyKind::kTabularSoftmax, arch,
                    std::vector<double>(static_cast<std::size_t>(n_states) *
                                            std::max(n_actions, 0),
                                        0.0));
}

PolicySnapshot PolicySnapshot::gaussian_mlp(int obs_dim, int act_dim,
                                            std::vector<int> hidden,
                                            double fixed_log_std,
                                            double dropout,
                                            std::uint64_t init_seed) {
  PolicyArch arch;
  arch.obs_dim = obs_dim;
  arch.act_dim = act_dim;
  arch.hidden = std::move(hidden);
  arch.dropout = dropout;
  arch.fixed_log_std = fixed_log_std;
  std::vector<double> params(
      obs_dim > 0 && act_dim > 0
          ? mlp_param_count(obs_dim, act_dim, arch.hidden)
          : 0,
      0.0);
  if (!params.empty()) {
    CounterRng rng(init_seed);
    for (const LayerShape& l : mlp_layers(arch)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (std::size_t i = l.w_offset; i < l.b_offset; ++i) {
        params[i] = bound * (2.0 * rng.uniform() - 1.0);
      }
    }
  }
  return from_parts(PolicyKind::kGaussianMlp, std::move(arch),
                    std::move(params));
}

void PolicySnapshot::check_observation(const Vec& observation) const {
  if (static_cast<int>(observation.size()) != arch_.obs_dim) {
    throw UsageError("observation dimension " +
                     std::to_string(observation.size()) + " != policy obs_dim " +
                     std::to_string(arch_.obs_dim));
  }
}

int PolicySnapshot::tabular_state(const Vec& observation) const {
  check_observation(observation);
  return grid_cell(observation);
}

int PolicySnapshot::tabular_action(const Vec& action) const {
  if (action.size() != 1 || !(action[0] >= 0.0) ||
      action[0] >= arch_.act_dim || action[0] != std::floor(action[0])) {
    throw UsageError("tabular action must be a single index in [0, " +
                     std::to_string(arch_.act_dim) + ")");
  }
  return static_cast<int>(action[0]);
}

std::vector<double> PolicySnapshot::action_probs(const Vec& observation) const {
  if (kind_ != PolicyKind::kTabularSoftmax) {
    throw UsageError("action_probs requires a tabular policy");
  }
  const int s = tabular_state(observation);
  std::span<const double> logits(params_.data() +
                                     static_cast<std::size_t>(s) * arch_.act_dim,
                                 static_cast<std::size_t>(arch_.act_dim));
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t a = 0; a < p.size(); ++a) p[a] = std::exp(logits[a] - lse);
  return p;
}

Vec PolicySnapshot::mean_action(const Vec& observation) const {
  if (kind_ != PolicyKind::kGaussianMlp) {
    throw UsageError("mean_action requires a gaussian policy");
  }
  check_observation(observation);
  return mlp_forward(arch_, params_, observation, nullptr).out;
}

double PolicySnapshot::log_prob(const Vec& observation, const Vec& action,
                                const DropoutKey* dropout) const {
  if (kind_ == PolicyKind::kTabularSoftmax) {
    const int s = tabular_state(observation);
    const int a = tabular_action(action);
    std::span<const double> logits(
        params_.data() + static_cast<std::size_t>(s) * arch_.act_dim,
        static_cast<std::size_t>(arch_.act_dim));
    return logits[a] - log_sum_exp(logits);
  }
  check_observation(observation);
  if (static_cast<int>(action.size()) != arch_.act_dim) {
    throw UsageError("action dimension mismatch for gaussian policy");
  }
  const Vec mu = mlp_forward(arch_, params_, observation, dropout).out;
  double sq = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] - action[i];
    sq += d * d;
  }
  return -sq;
}

void PolicySnapshot::accumulate_log_prob_grad(const Vec& observation,
                                              const Vec& action, double coef,
                                              std::span<double> grad,
                                              const DropoutKey* dropout) const {
  if (grad.size() != params_.size()) {
    throw UsageError("gradient buffer length does not match params");
  }
  if (kind_ == PolicyKind::kTabularSoftmax) {
    const int s = tabular_state(observation);
    const int a = tabular_action(action);
    const auto p = action_probs(observation);
    const std::size_t base = static_cast<std::size_t>(s) * arch_.act_dim;
    for (int b = 0; b < arch_.act_dim; ++b) {
      grad[base + b] += coef * ((b == a ? 1.0 : 0.0) - p[b]);
    }
    return;
  }
  check_observation(observation);
  if (static_cast<int>(action.size()) != arch_.act_dim) {
    throw UsageError("action dimension mismatch for gaussian policy");
  }
  const MlpPass pass = mlp_forward(arch_, params_, observation, dropout);
  Vec d_out(pass.out.size());
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    d_out[i] = -2.0 * coef * (pass.out[i] - action[i]);
  }
  mlp_backward(arch_, params_, pass, std::move(d_out), grad);
}

Vec PolicySnapshot::sample(const Vec& observation, CounterRng& rng,
                           double action_bound) const {
  if (kind_ == PolicyKind::kTabularSoftmax) {
    const auto p = action_probs(observation);
    return {static_cast<double>(rng.categorical(p))};
  }
  Vec a = mean_action(observation);
  const double std_dev = std::exp(arch_.fixed_log_std);
  for (double& v : a) v += std_dev * rng.normal();
  double norm = 0.0;
  for (double v : a) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > action_bound) {
    for (double& v : a) v *= action_bound / norm;
  }
  return a;
}

ActionTable action_table(const PolicySnapshot& policy) {
  if (policy.kind() != PolicyKind::kTabularSoftmax ||
      policy.arch().act_dim != kNumGridActions) {
    throw UsageError("action_table requires a tabular policy over grid actions");
  }
  const int n = policy.arch().obs_dim;
  ActionTable table(static_cast<std::size_t>(n));
  Vec obs(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    obs[s] = 1.0;
    const auto p = policy.action_probs(obs);
    std::copy(p.begin(), p.end(), table[s].begin());
    obs[s] = 0.0;
  }
  return table;
}

Actor make_actor(const PolicySnapshot& policy, const EnvSpec& spec) {
  double bound = std::numeric_limits<double>::infinity();
  if (const auto* pm = std::get_if<PointMassSpec>(&spec)) bound = pm->max_step;
  return [policy, bound](const Vec& obs, CounterRng& rng) {
    return policy.sample(obs, rng, bound);
  };
}

LossResult bc_loss(const PolicySnapshot& policy,
                   std::span<const StateActionRef> batch,
                   const DropoutKey* dropout) {
  if (batch.empty()) throw UsageError("bc_loss: empty batch");
  LossResult out;
  out.grad.assign(policy.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    DropoutKey key;
    const DropoutKey* kp = nullptr;
    if (dropout != nullptr) {
      key = {dropout->seed, hash_combine(dropout->key, i)};
      kp = &key;
    }
    out.loss -= policy.log_prob(*batch[i].observation, *batch[i].action, kp);
    policy.accumulate_log_prob_grad(*batch[i].observation, *batch[i].action,
                                    -scale, out.grad, kp);
  }
  out.loss *= scale;
  return out;
}

GradReport grad_check(const PolicySnapshot& policy, const LossFn& loss_fn,
                      double h) {
  GradReport report;
  report.analytic = loss_fn(policy).grad;
  if (report.analytic.size() != policy.num_params()) {
    throw UsageError("loss gradient length does not match params");
  }
  report.numeric.resize(policy.num_params());
  PolicySnapshot probe = policy;
  for (std::size_t i = 0; i < policy.num_params(); ++i) {
    const double orig = probe.mutable_params()[i];
    probe.mutable_params()[i] = orig + h;
    const double up = loss_fn(probe).loss;
    probe.mutable_params()[i] = orig - h;
    const double down = loss_fn(probe).loss;
    probe.mutable_params()[i] = orig;
    report.numeric[i] = (up - down) / (2.0 * h);
    const double a = report.analytic[i];
    const double n = report.numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    report.max_rel_err = std::max(report.max_rel_err, std::abs(a - n) / denom);
  }
  return report;
}

AdamOptimizer::AdamOptimizer(std::size_t n, AdamConfig cfg)
    : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

double AdamOptimizer::step(std::vector<double>& params,
                           std::span<const double> grad) {
  if (grad.size() != params.size() || params.size() != m_.size()) {
    throw UsageError("optimizer size mismatch");
  }
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  norm = std::sqrt(norm);
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] * scale;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
  return norm;
}

std::vector<std::uint8_t> encode_snapshot(const PolicySnapshot& policy) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kSnapshotVersion);
  out.push_back(static_cast<std::uint8_t>(policy.kind()));
  const PolicyArch& arch = policy.arch();
  put_u32(out, static_cast<std::uint32_t>(arch.obs_dim));
  put_u32(out, static_cast<std::uint32_t>(arch.act_dim));
  put_u32(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int h : arch.hidden) put_u32(out, static_cast<std::uint32_t>(h));
  put_f64(out, arch.dropout);
  put_f64(out, arch.fixed_log_std);
  put_u64(out, policy.num_params());
  for (double p : policy.params()) put_f64(out, p);
  return out;
}

PolicySnapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("not a policy snapshot (bad magic)", 0);
  }
  ByteReader in(bytes.subspan(4));
  const std::uint32_t version = in.u32();
  if (version != kSnapshotVersion) {
    throw ParseError("unsupported snapshot version " + std::to_string(version),
                     0);
  }
  const auto kind = static_cast<PolicyKind>(in.uint(1));
  PolicyArch arch;
  arch.obs_dim = static_cast<int>(in.u32());
  arch.act_dim = static_cast<int>(in.u32());
  const std::uint32_t n_hidden = in.u32();
  if (n_hidden > 64) throw ParseError("implausible hidden layer count", 0);
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    arch.hidden.push_back(static_cast<int>(in.u32()));
  }
  arch.dropout = in.f64();
  arch.fixed_log_std = in.f64();
  const std::uint64_t n = in.uint(8);
  if (n > (bytes.size() / 8)) throw ParseError("snapshot truncated", 0);
  std::vector<double> params(n);
  for (auto& p : params) p = in.f64();
  if (!in.at_end()) throw ParseError("trailing bytes after snapshot", 0);
  try {
    return PolicySnapshot::from_parts(kind, std::move(arch), std::move(params));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid snapshot: ") + e.what(), 0);
  }
}

void write_snapshot(const std::string& path, const PolicySnapshot& policy) {
  const auto bytes = encode_snapshot(policy);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

PolicySnapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace presa
