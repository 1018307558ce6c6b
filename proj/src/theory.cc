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

#include "presa/theory.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "presa/error.h"
#include "presa/rng.h"

namespace presa {

std::pair<double, double> lemma1_residual(
    const Segment& seg, std::span<const Segment> reference_set,
    const PolicySnapshot& pi_a, const PolicySnapshot& pi_b,
    const PolicySnapshot& pi_ref, const TrainConfig& cfg) {
  auto residual = [&](const PolicySnapshot& pi) {
    std::vector<double> psis;
    psis.reserve(reference_set.size());
    for (const Segment& s : reference_set) {
      psis.push_back(segment_score(pi, pi_ref, s, cfg).psi);
    }
    const ReferencePoint z = reference_point(psis);
    const double u = segment_score(pi, pi_ref, seg, cfg).psi - z.value;
    double sum_log = 0.0;
    double g = 1.0;
    for (int t = 0; t < seg.k(); ++t) {
      sum_log += g * pi.log_prob(seg.states[t], seg.actions[t]);
      g *= cfg.gamma_loss;
    }
    return u + z.value - cfg.beta * sum_log;
  };
  return {residual(pi_a), residual(pi_b)};
}

double lemma1_closed_form(const Segment& seg, const PolicySnapshot& pi_ref,
                          const TrainConfig& cfg) {
  double sum_log = 0.0;
  double g = 1.0;
  for (int t = 0; t < seg.k(); ++t) {
    sum_log += g * pi_ref.log_prob(seg.states[t], seg.actions[t]);
    g *= cfg.gamma_loss;
  }
  return -cfg.beta * sum_log;
}

RademacherEstimate empirical_rademacher(
    const std::vector<std::vector<double>>& values, int m_signs,
    std::uint64_t seed) {
  if (values.empty()) throw ConfigError("empirical_rademacher: empty grid");
  if (m_signs < 1) throw ConfigError("empirical_rademacher: m_signs < 1");
  const std::size_t n = values.front().size();
  if (n == 0) throw ConfigError("empirical_rademacher: no samples");
  for (const auto& row : values) {
    if (row.size() != n) throw UsageError("empirical_rademacher: ragged rows");
  }
  CounterRng rng(seed);
  std::vector<double> eps(n);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int m = 0; m < m_signs; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      eps[i] = (rng.next() >> 63) != 0 ? 1.0 : -1.0;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& row : values) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += eps[i] * row[i];
      best = std::max(best, s / static_cast<double>(n));
    }
    sum += best;
    sum_sq += best * best;
  }
  RademacherEstimate out;
  out.m_signs = m_signs;
  out.value = sum / m_signs;
  if (m_signs > 1) {
    const double var =
        std::max(0.0, (sum_sq - m_signs * out.value * out.value) /
                          (m_signs - 1));
    out.std_error = std::sqrt(var / m_signs);
  }
  return out;
}

std::vector<std::vector<double>> safety_prob_matrix(
    std::span<const PolicySnapshot> grid, const PolicySnapshot& pi_ref,
    std::span<const LabeledSegmentRef> samples, const TrainConfig& cfg,
    std::span<const double> z_refs) {
  if (grid.empty()) throw ConfigError("safety_prob_matrix: empty grid");
  if (!z_refs.empty() && z_refs.size() != grid.size()) {
    throw UsageError("safety_prob_matrix: one z_ref per policy required");
  }
  std::vector<std::vector<double>> out(grid.size());
  std::vector<double> psi(samples.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      psi[i] = segment_score(grid[j], pi_ref, *samples[i].segment, cfg).psi;
    }
    const ReferencePoint z =
        z_refs.empty() ? reference_point(psi) : ReferencePoint{z_refs[j]};
    out[j].resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      out[j][i] = safety_prob(psi[i], z, samples[i].y);
    }
  }
  return out;
}

RademacherEstimate empirical_rademacher(
    std::span<const PolicySnapshot> grid, const PolicySnapshot& pi_ref,
    std::span<const LabeledSegmentRef> samples, const TrainConfig& cfg,
    int m_signs, std::uint64_t seed) {
  return empirical_rademacher(
      safety_prob_matrix(grid, pi_ref, samples, cfg), m_signs, seed);
}

double hoeffding_term(long n, double tau) {
  if (n < 1) throw ConfigError("bound: N must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("bound: tau must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / tau) / (2.0 * static_cast<double>(n)));
}

double feasibility_bound(long n, double tau, double rademacher_hat) {
  return 2.0 * rademacher_hat + hoeffding_term(n, tau);
}

PolicySnapshot policy_from_table(const ActionTable& table) {
  PolicySnapshot p =
      PolicySnapshot::tabular(static_cast<int>(table.size()), kNumGridActions);
  auto& theta = p.mutable_params();
  for (std::size_t s = 0; s < table.size(); ++s) {
    for (int a = 0; a < kNumGridActions; ++a) {
      if (!(table[s][a] > 0.0)) {
        throw ConfigError("policy_from_table: probabilities must be positive");
      }
      theta[s * kNumGridActions + a] = std::log(table[s][a]);
    }
  }
  return p;
}

std::vector<PolicySnapshot> logit_bonus_grid(const GridSpec& spec,
                                             const PolicySnapshot& pi_ref,
                                             int grid_size) {
  int d = 1;
  while ((d + 1) * (d + 1) * (d + 1) <= grid_size) ++d;
  if (d * d * d != grid_size) {
    throw ConfigError("grid_size must be a perfect cube");
  }
  std::vector<double> lattice(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    lattice[i] = d == 1 ? 0.0 : -2.0 + 4.0 * i / (d - 1);
  }
  const auto up = static_cast<int>(GridAction::kUp);
  const auto right = static_cast<int>(GridAction::kRight);
  const auto stay = static_cast<int>(GridAction::kStay);
  std::vector<PolicySnapshot> grid;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int l = 0; l < d; ++l) {
        PolicySnapshot p = pi_ref;
        auto& theta = p.mutable_params();
        for (int s = 0; s < spec.num_cells(); ++s) {
          for (int a = 0; a < kNumGridActions; ++a) {
            GridSpec det = spec;
            det.slip_prob = 0.0;
            const int next = grid_transitions(det, s, a).front().next_cell;
            double bonus = 0.0;
            if (spec.is_hazard(next)) bonus += lattice[i];
            if (a == up || a == right) bonus += lattice[j];
            if (a == stay) bonus += lattice[l];
            theta[static_cast<std::size_t>(s) * kNumGridActions + a] += bonus;
          }
        }
        grid.push_back(std::move(p));
      }
    }
  }
  return grid;
}

namespace {

// Exact transition model flattened for fast sampling.
struct FastGrid {
  std::vector<std::vector<GridOutcome>> outcomes;  // [cell * A + action]
  const GridSpec* spec;

  explicit FastGrid(const GridSpec& g) : spec(&g) {
    outcomes.resize(static_cast<std::size_t>(g.num_cells()) * kNumGridActions);
    for (int s = 0; s < g.num_cells(); ++s) {
      for (int a = 0; a < kNumGridActions; ++a) {
        outcomes[static_cast<std::size_t>(s) * kNumGridActions + a] =
            grid_transitions(g, s, a);
      }
    }
  }
};

}  // namespace

SegmentSample sample_segments(const GridSpec& spec, const ActionTable& behavior,
                              long n, int k, double kappa, int t_max,
                              std::uint64_t seed) {
  validate(spec);
  if (k < 1 || k > spec.horizon) {
    throw ConfigError("sample_segments: k must lie in [1, horizon]");
  }
  if (static_cast<int>(behavior.size()) != spec.num_cells()) {
    throw UsageError("sample_segments: behaviour table size mismatch");
  }
  const FastGrid fg(spec);
  SegmentSample out;
  out.k = k;
  out.cells.reserve(static_cast<std::size_t>(n) * k);
  out.actions.reserve(static_cast<std::size_t>(n) * k);
  out.labels.reserve(static_cast<std::size_t>(n));
  CounterRng rng(seed);
  std::vector<std::uint8_t> cells;
  std::vector<std::uint8_t> actions;
  std::vector<double> costs;
  long attempts = 0;
  while (static_cast<long>(out.labels.size()) < n) {
    if (++attempts > 100 * n + 1000) {
      throw ConfigError("sample_segments: behaviour rarely lasts k steps");
    }
    cells.clear();
    actions.clear();
    costs.clear();
    int cell = spec.start_cells[rng.uniform_int(spec.start_cells.size())];
    for (int t = 0; t < spec.horizon; ++t) {
      const int a = static_cast<int>(rng.categorical(behavior[cell]));
      const auto& outs =
          fg.outcomes[static_cast<std::size_t>(cell) * kNumGridActions + a];
      double u = rng.uniform();
      int next = outs.back().next_cell;
      for (const GridOutcome& o : outs) {
        if (u < o.prob) {
          next = o.next_cell;
          break;
        }
        u -= o.prob;
      }
      cells.push_back(static_cast<std::uint8_t>(cell));
      actions.push_back(static_cast<std::uint8_t>(a));
      costs.push_back(spec.is_hazard(next) ? spec.hazard_cost : 0.0);
      cell = next;
      if (spec.is_goal(cell)) break;
    }
    if (static_cast<int>(cells.size()) < k) continue;
    const std::size_t off = rng.uniform_int(cells.size() - k + 1);
    double cost = 0.0;
    for (int t = 0; t < k; ++t) {
      out.cells.push_back(cells[off + t]);
      out.actions.push_back(actions[off + t]);
      cost += costs[off + t];
    }
    out.labels.push_back(
        static_cast<std::int8_t>(label_safety(cost, k, kappa, t_max)));
  }
  return out;
}

namespace {

// Per-policy log-ratio table indexed cell * A + a.
std::vector<std::vector<double>> log_ratio_tables(
    const std::vector<PolicySnapshot>& grid, const PolicySnapshot& pi_ref,
    const GridSpec& spec) {
  const int n_cells = spec.num_cells();
  std::vector<std::vector<double>> out;
  for (const PolicySnapshot& p : grid) {
    std::vector<double> t(static_cast<std::size_t>(n_cells) * kNumGridActions);
    for (int s = 0; s < n_cells; ++s) {
      const auto lp = p.action_probs(grid_observation(spec, s));
      const auto lr = pi_ref.action_probs(grid_observation(spec, s));
      for (int a = 0; a < kNumGridActions; ++a) {
        t[static_cast<std::size_t>(s) * kNumGridActions + a] =
            std::log(lp[a]) - std::log(lr[a]);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

double sample_psi(const std::vector<double>& table, const SegmentSample& s,
                  std::size_t i, const TrainConfig& cfg) {
  double psi = 0.0;
  double g = 1.0;
  const std::size_t base = i * static_cast<std::size_t>(s.k);
  for (int t = 0; t < s.k; ++t) {
    psi += g * table[static_cast<std::size_t>(s.cells[base + t]) *
                         kNumGridActions +
                     s.actions[base + t]];
    g *= cfg.gamma_loss;
  }
  return cfg.beta * psi;
}

}  // namespace

TruthTable compute_truth(const CoverageSetup& setup, std::uint64_t seed) {
  const SegmentSample big =
      sample_segments(setup.env, setup.behavior, setup.n_truth, setup.k,
                      setup.kappa, setup.t_max, seed);
  const auto tables =
      log_ratio_tables(setup.grid, setup.pi_ref, setup.env);
  TruthTable truth;
  truth.n_truth = setup.n_truth;
  std::vector<double> psi(big.size());
  for (const auto& table : tables) {
    double sum = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i) {
      psi[i] = sample_psi(table, big, i, setup.cfg);
      sum += psi[i];
    }
    const ReferencePoint z{sum / static_cast<double>(big.size())};
    double f = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i) {
      f += safety_prob(psi[i], z, big.labels[i]);
    }
    truth.z_ref.push_back(z.value);
    truth.f.push_back(f / static_cast<double>(big.size()));
  }
  return truth;
}

BoundReport coverage_experiment(const CoverageSetup& setup,
                                const TruthTable& truth, long n, double tau,
                                int trials, std::uint64_t seed) {
  if (setup.grid.empty()) throw ConfigError("coverage: empty policy grid");
  if (trials < 1) throw ConfigError("coverage: trials must be >= 1");
  if (truth.f.size() != setup.grid.size()) {
    throw UsageError("coverage: truth table does not match the grid");
  }
  BoundReport rep;
  rep.n = n;
  rep.tau = tau;
  rep.trials = trials;
  rep.m_signs = setup.m_signs;
  rep.n_truth = truth.n_truth;
  rep.hoeffding_term = hoeffding_term(n, tau);
  rep.note =
      "empirical (conditional) Rademacher complexity estimated with m_signs "
      "sign draws; sup exact over the finite policy grid; z_ref frozen per "
      "policy at the truth-sample mean";
  const auto tables =
      log_ratio_tables(setup.grid, setup.pi_ref, setup.env);
  const std::size_t n_pol = setup.grid.size();
  std::vector<std::vector<double>> deviations(n_pol);
  CounterRng root(seed);
  int covered = 0;
  double rad_sum = 0.0;
  std::vector<std::vector<double>> g(n_pol);
  for (int trial = 0; trial < trials; ++trial) {
    const SegmentSample sample = sample_segments(
        setup.env, setup.behavior, n, setup.k, setup.kappa, setup.t_max,
        root.fork(2 * static_cast<std::uint64_t>(trial)).next());
    double max_dev = 0.0;
    for (std::size_t j = 0; j < n_pol; ++j) {
      g[j].resize(sample.size());
      double f_hat = 0.0;
      for (std::size_t i = 0; i < sample.size(); ++i) {
        g[j][i] = safety_prob(sample_psi(tables[j], sample, i, setup.cfg),
                              ReferencePoint{truth.z_ref[j]},
                              sample.labels[i]);
        f_hat += g[j][i];
      }
      f_hat /= static_cast<double>(sample.size());
      const double dev = std::abs(truth.f[j] - f_hat);
      deviations[j].push_back(dev);
      max_dev = std::max(max_dev, dev);
    }
    const RademacherEstimate rad = empirical_rademacher(
        g, setup.m_signs,
        root.fork(2 * static_cast<std::uint64_t>(trial) + 1).next());
    const double bound = feasibility_bound(n, tau, rad.value);
    rad_sum += rad.value;
    rep.trial_rademacher.push_back(rad.value);
    rep.trial_bound.push_back(bound);
    rep.trial_max_deviation.push_back(max_dev);
    if (max_dev <= bound) ++covered;
  }
  rep.rademacher_hat = rad_sum / trials;
  rep.bound = 2.0 * rep.rademacher_hat + rep.hoeffding_term;
  rep.coverage = static_cast<double>(covered) / trials;
  for (std::size_t j = 0; j < n_pol; ++j) {
    auto d = deviations[j];
    std::sort(d.begin(), d.end());
    const auto idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(d.size()))) - 1;
    rep.empirical_deviation_quantiles.emplace_back(static_cast<int>(j),
                                                   d[std::min(idx, d.size() - 1)]);
  }
  return rep;
}

nlohmann::json bound_report_to_json(const BoundReport& r) {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& [id, dev] : r.empirical_deviation_quantiles) {
    q.push_back({{"policy", id}, {"deviation_q95", dev}});
  }
  return {{"N", r.n},
          {"tau", r.tau},
          {"trials", r.trials},
          {"m_signs", r.m_signs},
          {"n_truth", r.n_truth},
          {"rademacher_hat", r.rademacher_hat},
          {"hoeffding_term", r.hoeffding_term},
          {"bound", r.bound},
          {"coverage", r.coverage},
          {"trial_rademacher", r.trial_rademacher},
          {"trial_bound", r.trial_bound},
          {"trial_max_deviation", r.trial_max_deviation},
          {"empirical_deviation_quantiles", q},
          {"note", r.note}};
}

std::string bound_report_table(const BoundReport& r) {
  double worst = 0.0;
  for (double d : r.trial_max_deviation) worst = std::max(worst, d);
  char line[200];
  std::snprintf(line, sizeof line, "%8s %8s %7s %14s %10s %10s %10s %9s\n", "N",
                "tau", "trials", "rademacher", "hoeffding", "bound",
                "max_dev", "coverage");
  std::string out = line;
  std::snprintf(line, sizeof line,
                "%8ld %8.4f %7d %14.6f %10.6f %10.6f %10.6f %9.4f\n", r.n,
                r.tau, r.trials, r.rademacher_hat, r.hoeffding_term, r.bound,
                worst, r.coverage);
  return out + line;
}

}  // namespace presa
