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

#ifndef PRESA_TESTS_TEST_SUPPORT_H_
#define PRESA_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <string>
#include <vector>

#include "presa/env.h"
#include "presa/feedback.h"
#include "presa/policy.h"
#include "presa/presa.h"
#include "presa/rng.h"

namespace presa::testing {

inline Vec one_hot(int n, int i) {
  Vec v(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

inline PolicySnapshot random_tabular(int n_states, int n_actions,
                                     CounterRng& rng, double scale = 1.0) {
  PolicySnapshot p = PolicySnapshot::tabular(n_states, n_actions);
  for (double& w : p.mutable_params()) w = scale * rng.normal();
  return p;
}

inline PolicySnapshot random_gaussian(int obs_dim, int act_dim,
                                      CounterRng& rng,
                                      std::vector<int> hidden = {6, 5}) {
  return PolicySnapshot::gaussian_mlp(obs_dim, act_dim, std::move(hidden), 0.0,
                                      0.0, rng.next());
}

// Nudges every parameter so that pi differs from its reference.
inline PolicySnapshot perturbed(const PolicySnapshot& p, CounterRng& rng,
                                double scale) {
  PolicySnapshot q = p;
  for (double& w : q.mutable_params()) w += scale * rng.normal();
  return q;
}

inline Segment random_tabular_segment(int n_states, int n_actions, int k,
                                      CounterRng& rng, SegmentId id) {
  Segment s;
  s.id = id;
  s.env_id = "test";
  for (int t = 0; t < k; ++t) {
    s.states.push_back(
        one_hot(n_states, static_cast<int>(rng.uniform_int(n_states))));
    s.actions.push_back(
        {static_cast<double>(rng.uniform_int(n_actions))});
  }
  return s;
}

inline Segment random_gaussian_segment(int obs_dim, int act_dim, int k,
                                       CounterRng& rng, SegmentId id) {
  Segment s;
  s.id = id;
  s.env_id = "test";
  for (int t = 0; t < k; ++t) {
    Vec o(static_cast<std::size_t>(obs_dim));
    for (double& x : o) x = rng.normal();
    Vec a(static_cast<std::size_t>(act_dim));
    for (double& x : a) x = 0.5 * rng.normal();
    s.states.push_back(o);
    s.actions.push_back(a);
  }
  return s;
}

// Straight re-summation of beta sum_t gamma^t log-ratio.
inline double psi_oracle(const PolicySnapshot& pi, const PolicySnapshot& ref,
                         const Segment& s, double beta, double gamma) {
  double total = 0.0;
  double g = 1.0;
  for (int t = 0; t < s.k(); ++t) {
    total += g * beta *
             (pi.log_prob(s.states[t], s.actions[t]) -
              ref.log_prob(s.states[t], s.actions[t]));
    g *= gamma;
  }
  return total;
}

inline double plain_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace presa::testing

#endif  // PRESA_TESTS_TEST_SUPPORT_H_
