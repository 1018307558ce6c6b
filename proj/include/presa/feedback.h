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

#ifndef PRESA_FEEDBACK_H_
#define PRESA_FEEDBACK_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "presa/env.h"
#include "presa/rng.h"

namespace presa {

using SegmentId = std::uint64_t;

// A contiguous length-k window of (state, action) pairs. Ground-truth totals
// are deliberately not members; see HiddenTotals.
struct Segment {
  SegmentId id = 0;
  std::string env_id;
  std::vector<Vec> states;
  std::vector<Vec> actions;

  int k() const { return static_cast<int>(states.size()); }
  bool operator==(const Segment&) const = default;
};

// Sidecar with the ground truth used by synthetic labelling and evaluation.
struct HiddenTotals {
  double hidden_return = 0.0;
  double hidden_cost = 0.0;
  bool operator==(const HiddenTotals&) const = default;
};

enum class LabelSource { kSynthetic, kHuman };
enum class Side { kPlus, kMinus };

struct PairRecord {
  std::uint64_t pair_id = 0;
  SegmentId seg_plus = 0;
  SegmentId seg_minus = 0;
  int y_plus = 1;
  int y_minus = 1;
  LabelSource pref_source = LabelSource::kSynthetic;
  LabelSource safety_source = LabelSource::kSynthetic;
  std::optional<Side> general_pref;  // stored only; PreSa does not train on it
  bool tie = false;                  // preference decided by a coin
  bool operator==(const PairRecord&) const = default;
};

struct DatasetMeta {
  int t_max = 0;
  double kappa_data = 0.0;  // trajectory-level cost threshold
  int n_s = 0;              // distinct safe segments
  int n_u = 0;              // distinct unsafe segments
  int k = 0;
  std::uint64_t seed = 0;
  // Empirical full-trajectory return extremes of the source corpus.
  double r_min = 0.0;
  double r_max = 0.0;
  std::string subsample = "pairs";  // unit used when subsampling feedback
  double noise_preference = 0.0;
  double noise_safety = 0.0;
  int skipped_short = 0;
  std::optional<EnvSpec> env;
  bool operator==(const DatasetMeta&) const;
};

class FeedbackDataset {
 public:
  DatasetMeta meta;
  std::vector<PairRecord> pairs;

  // Inserts a segment and its sidecar; re-adding an id is a no-op.
  void add_segment(Segment segment, HiddenTotals hidden);
  bool has_segment(SegmentId id) const;
  const Segment& segment(SegmentId id) const;
  const HiddenTotals& hidden(SegmentId id) const;
  // Segments in insertion order.
  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t num_segments() const { return segments_.size(); }

  // Recomputes meta.n_s / meta.n_u over distinct segments, each taking the
  // label of its first occurrence in `pairs`.
  void recount_classes();

  bool operator==(const FeedbackDataset& other) const;

 private:
  std::vector<Segment> segments_;
  std::vector<HiddenTotals> hidden_;
  std::unordered_map<SegmentId, std::size_t> index_;
};

struct SegmentationResult {
  std::vector<Segment> segments;
  std::vector<HiddenTotals> hidden;  // parallel to segments
  int skipped_short = 0;
};

// One uniformly placed window of length k per trajectory (windows_per
// trajectory when > 1). Trajectories shorter than k are counted and skipped.
SegmentationResult segment_trajectories(std::span<const Trajectory> trajectories,
                                        const std::string& env_id, int k,
                                        std::uint64_t seed,
                                        int windows_per_trajectory = 1);

struct PreferenceOutcome {
  bool first_preferred = true;
  bool tie = false;
};

// Strictly larger hidden return wins; exact ties go to a fair coin.
PreferenceOutcome label_preference(const HiddenTotals& a, const HiddenTotals& b,
                                   CounterRng& rng);

// +1 iff hidden_cost <= kappa_data * k / t_max.
int label_safety(double hidden_cost, int k, double kappa_data, int t_max);

// Samples n_pairs unordered pairs of distinct segments and labels them.
FeedbackDataset build_dataset(const SegmentationResult& segments, int n_pairs,
                              double kappa_data, int t_max, std::uint64_t seed,
                              bool with_replacement = true);

enum class NoiseChannel { kPreference, kSafety };

// Flips floor(level * n) uniformly chosen records of the channel. Preference
// flips swap the two sides; safety flips negate both labels of the record.
// The chosen records are a prefix of one seeded permutation, so for a fixed
// seed a lower level flips a subset of a higher level's records.
FeedbackDataset inject_noise(const FeedbackDataset& dataset,
                             NoiseChannel channel, double level,
                             std::uint64_t seed);

// Keeps n uniformly chosen pairs (and only the segments they reference).
FeedbackDataset subsample_pairs(const FeedbackDataset& dataset, int n,
                                std::uint64_t seed);

inline constexpr int kDatasetVersion = 1;
void write_dataset(const std::string& path, const FeedbackDataset& dataset);
FeedbackDataset read_dataset(const std::string& path);
std::string dataset_to_jsonl(const FeedbackDataset& dataset);
FeedbackDataset dataset_from_jsonl(const std::string& text);

std::string format_id(std::uint64_t id);
std::uint64_t parse_id(const std::string& text);

// ---------------------------------------------------------------------------
// Training view: what optimisation code is allowed to see. Segments carry
// states and actions only; labels live on the pair occurrences.

struct TrainPair {
  std::size_t plus = 0;   // index into TrainingView::segments
  std::size_t minus = 0;
  int y_plus = 1;
  int y_minus = 1;
};

enum class PreferenceChannel { kReward, kGeneral };

struct TrainingView {
  std::vector<Segment> segments;
  std::vector<TrainPair> pairs;
};

// kGeneral keeps only pairs with a general preference, oriented by it, and
// throws ConfigError when none exist.
TrainingView make_training_view(const FeedbackDataset& dataset,
                                PreferenceChannel channel =
                                    PreferenceChannel::kReward);

struct ClassCounts {
  int n_s = 0;
  int n_u = 0;
};
// Label occurrences over both members of every pair.
ClassCounts count_label_occurrences(const TrainingView& view);

}  // namespace presa

#endif  // PRESA_FEEDBACK_H_
