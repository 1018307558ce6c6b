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

#include <cmath>

#include <gtest/gtest.h>

#include "presa/baselines.h"
#include "presa/error.h"
#include "presa/presa.h"
#include "test_support.h"

namespace presa {
namespace {

Segment fixed_action(int state, int action, int k, SegmentId id) {
  Segment s;
  s.id = id;
  s.env_id = "t";
  for (int t = 0; t < k; ++t) {
    s.states.push_back(testing::one_hot(3, state));
    s.actions.push_back({double(action)});
  }
  return s;
}

GridSpec three_cells() {
  GridSpec g;
  g.width = 3;
  g.height = 1;
  g.start_cells = {0};
  g.horizon = 6;
  return g;
}

TrainingView mixed_view(CounterRng& rng, int n_pairs) {
  TrainingView v;
  for (int i = 0; i < 2 * n_pairs; ++i) {
    v.segments.push_back(
        fixed_action(int(rng.uniform_int(3)), int(rng.uniform_int(5)), 3, i));
  }
  for (int i = 0; i < n_pairs; ++i) {
    v.pairs.push_back({std::size_t(2 * i), std::size_t(2 * i + 1),
                       rng.bernoulli(0.5) ? 1 : -1,
                       rng.bernoulli(0.5) ? 1 : -1});
  }
  return v;
}

TrainConfig small_config() {
  TrainConfig c;
  c.pretrain_steps = 30;
  c.train_steps = 20;
  c.batch_size = 4;
  c.policy_lr = 0.05;
  c.bc_lr = 0.05;
  c.seed = 11;
  return c;
}

TEST(BinaryRelabel, RuleTable) {
  const struct {
    int y_plus, y_minus, plus, minus;
  } rows[] = {
      {1, 1, 1, -1}, {1, -1, 1, -1}, {-1, 1, -1, -1}, {-1, -1, -1, -1}};
  for (const auto& r : rows) {
    const BinaryLabels b = binary_relabel(r.y_plus, r.y_minus);
    EXPECT_EQ(b.plus, r.plus) << r.y_plus << "," << r.y_minus;
    EXPECT_EQ(b.minus, r.minus) << r.y_plus << "," << r.y_minus;
  }
}

TEST(BinaryRelabelProperty, SafeCountNeverGrows) {
  CounterRng rng(1);
  for (int draw = 0; draw < 50; ++draw) {
    const TrainingView v = mixed_view(rng, 5 + int(rng.uniform_int(30)));
    const TrainingView r = binary_alignment_view(v);
    ASSERT_EQ(r.pairs.size(), v.pairs.size());
    EXPECT_LE(count_label_occurrences(r).n_s, count_label_occurrences(v).n_s);
    for (std::size_t i = 0; i < v.pairs.size(); ++i) {
      EXPECT_EQ(r.pairs[i].y_minus, -1);
      EXPECT_EQ(r.pairs[i].y_plus, v.pairs[i].y_plus);
      EXPECT_EQ(r.pairs[i].plus, v.pairs[i].plus);
    }
  }
}

TEST(BcAll, EqualsPhaseOneReference) {
  CounterRng rng(2);
  const TrainingView v = mixed_view(rng, 10);
  const TrainConfig cfg = small_config();
  const PolicySnapshot bc = train_bc_all(v, three_cells(), cfg);
  const TrainResult full = train(v, three_cells(), cfg);
  EXPECT_TRUE(bc == full.reference);
}

TEST(BcSafeSeg, AllSafeEqualsBcAll) {
  CounterRng rng(3);
  TrainingView v = mixed_view(rng, 10);
  for (auto& p : v.pairs) p.y_plus = p.y_minus = 1;
  const TrainConfig cfg = small_config();
  EXPECT_TRUE(train_bc_safe_seg(v, three_cells(), cfg) ==
              train_bc_all(v, three_cells(), cfg));
}

TEST(BcSafeSeg, NoSafeSegmentsIsConfigError) {
  CounterRng rng(4);
  TrainingView v = mixed_view(rng, 6);
  for (auto& p : v.pairs) p.y_plus = p.y_minus = -1;
  EXPECT_TRUE(safe_segments(v).empty());
  EXPECT_THROW(train_bc_safe_seg(v, three_cells(), small_config()),
               ConfigError);
}

TEST(BcSafeSeg, SafeInAnyOccurrenceCounts) {
  TrainingView v;
  v.segments = {fixed_action(0, 0, 2, 1), fixed_action(1, 1, 2, 2),
                fixed_action(2, 2, 2, 3)};
  v.pairs = {{0, 1, 1, -1}, {1, 2, -1, -1}, {2, 0, -1, -1}};
  const auto safe = safe_segments(v);
  ASSERT_EQ(safe.size(), 1u);
  EXPECT_EQ(safe[0]->id, 1u);
}

TEST(CplOnly, IdenticalScorePairsKeepLogTwo) {
  // Both members of every pair are the same trajectory, so S+ = S- for any
  // policy and the preference loss stays at ln 2 throughout training.
  TrainingView v;
  for (int i = 0; i < 4; ++i) {
    v.segments.push_back(fixed_action(i % 3, i % 5, 3, 2 * i));
    v.segments.push_back(fixed_action(i % 3, i % 5, 3, 2 * i + 1));
    v.pairs.push_back({std::size_t(2 * i), std::size_t(2 * i + 1), 1, -1});
  }
  const TrainResult r = train_cpl_only(v, three_cells(), small_config());
  ASSERT_FALSE(r.log.empty());
  for (const auto& e : r.log) EXPECT_NEAR(e.cpl, std::log(2.0), 1e-12);
}

TEST(Baselines, DeterministicGivenSeed) {
  CounterRng rng(5);
  const TrainingView v = mixed_view(rng, 12);
  const TrainConfig cfg = small_config();
  EXPECT_TRUE(train_bc_all(v, three_cells(), cfg) ==
              train_bc_all(v, three_cells(), cfg));
  EXPECT_TRUE(train_bc_safe_seg(v, three_cells(), cfg) ==
              train_bc_safe_seg(v, three_cells(), cfg));
  EXPECT_TRUE(train_cpl_only(v, three_cells(), cfg).policy ==
              train_cpl_only(v, three_cells(), cfg).policy);
  const TrainResult a = train_binary_alignment(v, three_cells(), cfg);
  const TrainResult b = train_binary_alignment(v, three_cells(), cfg);
  EXPECT_TRUE(a.policy == b.policy);
  EXPECT_EQ(train_log_to_jsonl(a.log), train_log_to_jsonl(b.log));
}

TEST(BinaryAlignment, ReferenceIsSharedPhaseOne) {
  CounterRng rng(6);
  const TrainingView v = mixed_view(rng, 12);
  const TrainConfig cfg = small_config();
  const TrainResult b = train_binary_alignment(v, three_cells(), cfg);
  EXPECT_TRUE(b.reference == train_bc_all(v, three_cells(), cfg));
  for (const auto& e : b.log) {
    EXPECT_EQ(e.cpl, 0.0);
    EXPECT_EQ(e.nu, 0.0);
  }
}

TEST(BinaryAlignment, SingleRelabelledClassIsConfigError) {
  CounterRng rng(7);
  TrainingView v = mixed_view(rng, 6);
  for (auto& p : v.pairs) p.y_plus = -1;
  EXPECT_THROW(train_binary_alignment(v, three_cells(), small_config()),
               ConfigError);
}

}  // namespace
}  // namespace presa
