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

#include <algorithm>
#include <set>
#include <sstream>
#include <type_traits>

#include <gtest/gtest.h>

#include "json.hpp"
#include "presa/config.h"
#include "presa/error.h"
#include "presa/feedback.h"
#include "presa/pipeline.h"
#include "presa/presa.h"
#include "test_support.h"

namespace presa {
namespace {

Trajectory constant_trajectory(int len, double reward, double cost,
                               double start = 0.0) {
  Trajectory t;
  for (int i = 0; i < len; ++i) {
    t.steps.push_back({{start + i}, {0.0}, reward, cost});
  }
  return t;
}

// Segments with the given hidden (return, cost) totals and distinct ids.
SegmentationResult handmade(const std::vector<std::pair<double, double>>& rc,
                            int k = 2) {
  SegmentationResult out;
  for (std::size_t i = 0; i < rc.size(); ++i) {
    Segment s;
    s.id = 1000 + i;
    s.env_id = "hand";
    for (int t = 0; t < k; ++t) {
      s.states.push_back({double(i), double(t)});
      s.actions.push_back({0.0});
    }
    out.segments.push_back(s);
    out.hidden.push_back({rc[i].first, rc[i].second});
  }
  return out;
}

FeedbackDataset shortcut_dataset(int n_pairs = 1000) {
  ExperimentConfig cfg;
  cfg.env = shortcut_grid();
  cfg.behavior.epsilon = 0.2;
  cfg.data.n_pairs = n_pairs;
  cfg.data.t_max = 20;
  return generate_dataset(cfg, 5);
}

TEST(Segmentation, FullWindowEqualsTrajectorySums) {
  const std::vector<Trajectory> trajs{constant_trajectory(8, 1.5, 0.25)};
  const SegmentationResult r = segment_trajectories(trajs, "e", 8, 3);
  ASSERT_EQ(r.segments.size(), 1u);
  EXPECT_DOUBLE_EQ(r.hidden[0].hidden_return, trajs[0].total_return());
  EXPECT_DOUBLE_EQ(r.hidden[0].hidden_cost, trajs[0].total_cost());
}

TEST(Segmentation, ConstantRewardSums) {
  const std::vector<Trajectory> trajs{constant_trajectory(12, 1.0, 0.0)};
  const SegmentationResult r = segment_trajectories(trajs, "e", 5, 9);
  ASSERT_EQ(r.segments.size(), 1u);
  EXPECT_DOUBLE_EQ(r.hidden[0].hidden_return, 5.0);
  EXPECT_EQ(r.segments[0].k(), 5);
}

TEST(Segmentation, ShortTrajectoriesAreCountedAndSkipped) {
  const std::vector<Trajectory> trajs{constant_trajectory(3, 1, 0),
                                      constant_trajectory(9, 1, 0),
                                      constant_trajectory(2, 1, 0)};
  const SegmentationResult r = segment_trajectories(trajs, "e", 4, 1);
  EXPECT_EQ(r.segments.size(), 1u);
  EXPECT_EQ(r.skipped_short, 2);
}

TEST(Segmentation, SeededRegenerationIsByteIdentical) {
  GridSpec g = shortcut_grid();
  g.slip_prob = 0.1;
  BehaviorConfig b;
  b.n_trajectories = 1000;
  b.weight_random = 1.0;
  const auto corpus = generate_corpus(g, b, 17);
  const auto a = segment_trajectories(corpus, env_id(g), 4, 99);
  const auto c = segment_trajectories(corpus, env_id(g), 4, 99);
  ASSERT_GE(a.segments.size(), 900u);
  EXPECT_EQ(a.segments, c.segments);
  EXPECT_EQ(a.hidden, c.hidden);
  const auto ds_a = build_dataset(a, 500, 4, 20, 1);
  const auto ds_c = build_dataset(c, 500, 4, 20, 1);
  EXPECT_EQ(dataset_to_jsonl(ds_a), dataset_to_jsonl(ds_c));
}

TEST(LabelPreference, LargerReturnWins) {
  CounterRng rng(0);
  const auto r = label_preference({3.0, 0.0}, {1.0, 0.0}, rng);
  EXPECT_TRUE(r.first_preferred);
  EXPECT_FALSE(r.tie);
}

TEST(LabelPreference, TieUsesSeededCoin) {
  int first = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng a(seed);
    CounterRng b(seed);
    const auto x = label_preference({2.0, 0.0}, {2.0, 0.0}, a);
    const auto y = label_preference({2.0, 0.0}, {2.0, 0.0}, b);
    EXPECT_TRUE(x.tie);
    EXPECT_EQ(x.first_preferred, y.first_preferred);
    first += x.first_preferred;
  }
  EXPECT_GT(first, 60);
  EXPECT_LT(first, 140);
}

TEST(LabelPreference, OrderIndependentWhenReturnsDiffer) {
  CounterRng rng(7);
  for (int i = 0; i < 100; ++i) {
    const HiddenTotals a{rng.normal(), 0.0};
    const HiddenTotals b{rng.normal(), 0.0};
    const auto ab = label_preference(a, b, rng);
    const auto ba = label_preference(b, a, rng);
    EXPECT_NE(ab.first_preferred, ba.first_preferred);
  }
}

TEST(LabelSafety, ProportionalThreshold) {
  EXPECT_EQ(label_safety(3.0, 8, 10.0, 32), -1);
  EXPECT_EQ(label_safety(0.0, 8, 0.0, 32), 1);
  EXPECT_EQ(label_safety(0.0, 8, 10.0, 32), 1);
  EXPECT_EQ(label_safety(2.5, 8, 10.0, 32), 1);
  EXPECT_EQ(label_safety(2.5000001, 8, 10.0, 32), -1);
  EXPECT_THROW(label_safety(1.0, 8, 10.0, 0), ConfigError);
}

TEST(BuildDataset, ReproduciblePairIds) {
  const auto segs = handmade({{1, 0}, {2, 0}, {3, 5}, {4, 0}});
  const auto a = build_dataset(segs, 2, 4.0, 4, 11);
  const auto b = build_dataset(segs, 2, 4.0, 4, 11);
  ASSERT_EQ(a.pairs.size(), 2u);
  EXPECT_EQ(a.pairs[0].pair_id, b.pairs[0].pair_id);
  EXPECT_EQ(a.pairs[1].pair_id, b.pairs[1].pair_id);
}

TEST(BuildDataset, AllSafeMeansNoUnsafeAndWeightsFail) {
  const auto segs = handmade({{1, 0}, {2, 0}, {3, 0}});
  const auto ds = build_dataset(segs, 10, 4.0, 4, 1);
  EXPECT_EQ(ds.meta.n_u, 0);
  EXPECT_THROW(class_weights(ds.meta.n_s, ds.meta.n_u, 1.0), ConfigError);
}

TEST(BuildDataset, TooManyPairsWithoutReplacement) {
  const auto segs = handmade({{1, 0}, {2, 0}, {3, 0}});
  EXPECT_NO_THROW(build_dataset(segs, 3, 4.0, 4, 1, false));
  EXPECT_THROW(build_dataset(segs, 4, 4.0, 4, 1, false), ConfigError);
}

TEST(BuildDataset, NeverPairsSegmentWithItself) {
  const auto segs = handmade({{1, 0}, {2, 0}});
  const auto ds = build_dataset(segs, 50, 4.0, 4, 3);
  for (const auto& p : ds.pairs) EXPECT_NE(p.seg_plus, p.seg_minus);
}

TEST(BuildDataset, ClassBalanceMatchesExhaustiveLabelling) {
  ExperimentConfig cfg;
  cfg.env = shortcut_grid();
  cfg.behavior.epsilon = 0.2;
  cfg.data.t_max = 20;
  const auto corpus = generate_corpus(cfg.env, cfg.behavior, 21);
  const auto segs = segment_trajectories(corpus, env_id(cfg.env), 8, 22);
  int safe = 0;
  for (std::size_t i = 0; i < segs.segments.size(); ++i) {
    safe += label_safety(segs.hidden[i].hidden_cost, 8, 4.0, 20) > 0;
  }
  const double truth = double(safe) / segs.segments.size();
  const auto ds = build_dataset(segs, 2000, 4.0, 20, 23);
  const double observed = double(ds.meta.n_s) / (ds.meta.n_s + ds.meta.n_u);
  EXPECT_NEAR(observed, truth, 0.03);
}

TEST(DatasetProperty, ClassCountsCoverDistinctSegments) {
  const auto ds = shortcut_dataset();
  EXPECT_EQ(std::size_t(ds.meta.n_s + ds.meta.n_u), ds.num_segments());
  for (const auto& p : ds.pairs) {
    EXPECT_TRUE(ds.has_segment(p.seg_plus));
    EXPECT_TRUE(ds.has_segment(p.seg_minus));
    EXPECT_NE(p.seg_plus, p.seg_minus);
    EXPECT_TRUE(p.y_plus == 1 || p.y_plus == -1);
    EXPECT_TRUE(p.y_minus == 1 || p.y_minus == -1);
  }
}

TEST(DatasetProperty, StoredLabelsAreReproducible) {
  const auto ds = shortcut_dataset();
  for (const auto& p : ds.pairs) {
    for (auto [id, y] : {std::pair{p.seg_plus, p.y_plus},
                         std::pair{p.seg_minus, p.y_minus}}) {
      EXPECT_EQ(label_safety(ds.hidden(id).hidden_cost, ds.segment(id).k(),
                             ds.meta.kappa_data, ds.meta.t_max),
                y);
    }
  }
}

TEST(DatasetProperty, PreferenceFollowsHiddenReturn) {
  const auto ds = shortcut_dataset();
  for (const auto& p : ds.pairs) {
    const double rp = ds.hidden(p.seg_plus).hidden_return;
    const double rm = ds.hidden(p.seg_minus).hidden_return;
    if (p.tie) {
      EXPECT_EQ(rp, rm);
    } else {
      EXPECT_GT(rp, rm);
    }
  }
}

TEST(Noise, LevelZeroIsIdentity) {
  const auto ds = shortcut_dataset(200);
  EXPECT_TRUE(inject_noise(ds, NoiseChannel::kSafety, 0.0, 3).pairs ==
              ds.pairs);
  EXPECT_TRUE(inject_noise(ds, NoiseChannel::kPreference, 0.0, 3).pairs ==
              ds.pairs);
}

TEST(Noise, FullSafetyFlip) {
  const auto ds = shortcut_dataset(200);
  const auto flipped = inject_noise(ds, NoiseChannel::kSafety, 1.0, 3);
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    EXPECT_EQ(flipped.pairs[i].y_plus, -ds.pairs[i].y_plus);
    EXPECT_EQ(flipped.pairs[i].y_minus, -ds.pairs[i].y_minus);
  }
}

TEST(Noise, FloorCountOfRecordsFlipped) {
  const auto ds = shortcut_dataset(1000);
  for (auto channel : {NoiseChannel::kSafety, NoiseChannel::kPreference}) {
    const auto noisy = inject_noise(ds, channel, 0.3, 8);
    int changed = 0;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
      changed += !(noisy.pairs[i] == ds.pairs[i]);
    }
    EXPECT_EQ(changed, 300);
  }
  const auto before = dataset_to_jsonl(ds);
  (void)inject_noise(ds, NoiseChannel::kSafety, 0.5, 1);
  EXPECT_EQ(dataset_to_jsonl(ds), before);
}

TEST(Noise, PreferenceFlipSwapsSides) {
  const auto ds = shortcut_dataset(100);
  const auto noisy = inject_noise(ds, NoiseChannel::kPreference, 1.0, 2);
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    EXPECT_EQ(noisy.pairs[i].seg_plus, ds.pairs[i].seg_minus);
    EXPECT_EQ(noisy.pairs[i].y_plus, ds.pairs[i].y_minus);
  }
}

std::set<std::size_t> changed_records(const FeedbackDataset& a,
                                      const FeedbackDataset& b) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    if (!(a.pairs[i] == b.pairs[i])) out.insert(i);
  }
  return out;
}

TEST(NoiseProperty, TwoRoundsComposeBySymmetricDifference) {
  const auto ds = shortcut_dataset(400);
  const std::size_t n = ds.pairs.size();
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    for (auto channel : {NoiseChannel::kSafety, NoiseChannel::kPreference}) {
      const auto once = inject_noise(ds, channel, p, 100);
      const auto twice = inject_noise(once, channel, p, 200);
      const auto a = changed_records(ds, once);
      const auto b = changed_records(once, twice);
      const std::size_t m = static_cast<std::size_t>(p * n);
      ASSERT_EQ(a.size(), m);
      ASSERT_EQ(b.size(), m);
      std::set<std::size_t> sym;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                    std::inserter(sym, sym.end()));
      EXPECT_EQ(changed_records(ds, twice), sym);
      EXPECT_LE(sym.size(), std::min(2 * m, 2 * (n - m)));
    }
  }
}

TEST(DatasetFile, RoundTrip) {
  auto ds = shortcut_dataset(300);
  ds.pairs[0].general_pref = Side::kMinus;
  ds.pairs[1].pref_source = LabelSource::kHuman;
  const auto back = dataset_from_jsonl(dataset_to_jsonl(ds));
  EXPECT_TRUE(back == ds);
}

TEST(DatasetFile, UnknownVersionIsParseError) {
  std::string text = dataset_to_jsonl(shortcut_dataset(10));
  const auto pos = text.find("\"version\":1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "\"version\":9");
  try {
    dataset_from_jsonl(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(DatasetFile, TruncatedFinalLineNamesTheLine) {
  std::string text = dataset_to_jsonl(shortcut_dataset(10));
  const std::size_t lines = std::count(text.begin(), text.end(), '\n');
  text.resize(text.size() - 5);
  try {
    dataset_from_jsonl(text);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), lines);
  }
}

TEST(DatasetFile, HiddenFieldsOnlyInsideHiddenObject) {
  std::istringstream in(dataset_to_jsonl(shortcut_dataset(10)));
  std::string line;
  int segs = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (!j.contains("seg")) continue;
    ++segs;
    const auto& seg = j["seg"];
    EXPECT_FALSE(seg.contains("hidden_return"));
    EXPECT_FALSE(seg.contains("hidden_cost"));
    ASSERT_TRUE(seg.contains("hidden"));
    EXPECT_TRUE(seg["hidden"].contains("hidden_return"));
    EXPECT_TRUE(seg["hidden"].contains("hidden_cost"));
  }
  EXPECT_GT(segs, 0);
}

template <typename T>
concept ExposesHiddenTotals = requires(const T& t) { t.hidden_return; } ||
                              requires(const T& t) { t.hidden_cost; };

TEST(Firewall, TrainingTypesCarryNoHiddenTotals) {
  static_assert(!ExposesHiddenTotals<Segment>);
  static_assert(!ExposesHiddenTotals<TrainPair>);
  static_assert(!ExposesHiddenTotals<TrainingView>);
  static_assert(ExposesHiddenTotals<HiddenTotals>);
  using TrainFn = TrainResult (*)(const TrainingView&, const EnvSpec&,
                                  const TrainConfig&);
  static_assert(std::is_same_v<decltype(&train), TrainFn>);
  SUCCEED();
}

TEST(TrainingView, LabelsLiveOnOccurrences) {
  const auto ds = shortcut_dataset(200);
  const TrainingView v = make_training_view(ds);
  ASSERT_EQ(v.pairs.size(), ds.pairs.size());
  for (std::size_t i = 0; i < v.pairs.size(); ++i) {
    EXPECT_EQ(v.segments[v.pairs[i].plus].id, ds.pairs[i].seg_plus);
    EXPECT_EQ(v.segments[v.pairs[i].minus].id, ds.pairs[i].seg_minus);
    EXPECT_EQ(v.pairs[i].y_plus, ds.pairs[i].y_plus);
  }
  const ClassCounts c = count_label_occurrences(v);
  EXPECT_EQ(std::size_t(c.n_s + c.n_u), 2 * v.pairs.size());
}

TEST(TrainingView, GeneralChannelNeedsGeneralLabels) {
  auto ds = shortcut_dataset(20);
  EXPECT_THROW(make_training_view(ds, PreferenceChannel::kGeneral),
               ConfigError);
  ds.pairs[3].general_pref = Side::kMinus;
  const TrainingView v = make_training_view(ds, PreferenceChannel::kGeneral);
  ASSERT_EQ(v.pairs.size(), 1u);
  EXPECT_EQ(v.segments[v.pairs[0].plus].id, ds.pairs[3].seg_minus);
}

TEST(Subsample, KeepsOnlyReferencedSegments) {
  const auto ds = shortcut_dataset(500);
  const auto sub = subsample_pairs(ds, 50, 4);
  EXPECT_EQ(sub.pairs.size(), 50u);
  EXPECT_EQ(sub.meta.subsample, "pairs");
  std::set<SegmentId> used;
  for (const auto& p : sub.pairs) {
    used.insert(p.seg_plus);
    used.insert(p.seg_minus);
  }
  EXPECT_EQ(used.size(), sub.num_segments());
}

}  // namespace
}  // namespace presa
