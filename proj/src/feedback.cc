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

#include "presa/feedback.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "presa/error.h"
#include "presa/json_io.h"

namespace presa {
namespace {

using nlohmann::json;

std::uint64_t hash_doubles(std::uint64_t h, const std::vector<Vec>& rows) {
  for (const Vec& row : rows) {
    h = hash_combine(h, row.size());
    for (double v : row) h = hash_combine(h, std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::uint64_t hash_string(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) h = hash_combine(h, c);
  return h;
}

const char* source_name(LabelSource s) {
  return s == LabelSource::kHuman ? "human" : "synthetic";
}

LabelSource parse_source(const std::string& s, std::size_t line) {
  if (s == "human") return LabelSource::kHuman;
  if (s == "synthetic") return LabelSource::kSynthetic;
  throw ParseError("unknown label source '" + s + "'", line);
}

void check_label(int y, std::size_t line) {
  if (y != 1 && y != -1) {
    throw ParseError("safety label must be +1 or -1", line);
  }
}

std::size_t floor_count(double level, std::size_t n) {
  // Guard against products like 0.3 * 1000 landing just below an integer.
  return static_cast<std::size_t>(
      std::floor(level * static_cast<double>(n) + 1e-9));
}

}  // namespace

bool DatasetMeta::operator==(const DatasetMeta& o) const {
  auto env_eq = [](const std::optional<EnvSpec>& a,
                   const std::optional<EnvSpec>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return env_to_json(*a) == env_to_json(*b);
  };
  return t_max == o.t_max && kappa_data == o.kappa_data && n_s == o.n_s &&
         n_u == o.n_u && k == o.k && seed == o.seed && r_min == o.r_min &&
         r_max == o.r_max && subsample == o.subsample &&
         noise_preference == o.noise_preference &&
         noise_safety == o.noise_safety && skipped_short == o.skipped_short &&
         env_eq(env, o.env);
}

void FeedbackDataset::add_segment(Segment segment, HiddenTotals hidden) {
  if (index_.count(segment.id) != 0) return;
  index_.emplace(segment.id, segments_.size());
  segments_.push_back(std::move(segment));
  hidden_.push_back(hidden);
}

bool FeedbackDataset::has_segment(SegmentId id) const {
  return index_.count(id) != 0;
}

const Segment& FeedbackDataset::segment(SegmentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UsageError("unknown segment " + format_id(id));
  return segments_[it->second];
}

const HiddenTotals& FeedbackDataset::hidden(SegmentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw UsageError("unknown segment " + format_id(id));
  return hidden_[it->second];
}

void FeedbackDataset::recount_classes() {
  std::unordered_map<SegmentId, int> label;
  for (const auto& p : pairs) {
    label.emplace(p.seg_plus, p.y_plus);
    label.emplace(p.seg_minus, p.y_minus);
  }
  meta.n_s = meta.n_u = 0;
  for (const auto& s : segments_) {
    auto it = label.find(s.id);
    // Unpaired segments can only come from hand-built datasets; count them
    // as safe so n_s + n_u still equals the number of distinct segments.
    const int y = it == label.end() ? 1 : it->second;
    (y > 0 ? meta.n_s : meta.n_u) += 1;
  }
}

bool FeedbackDataset::operator==(const FeedbackDataset& o) const {
  return meta == o.meta && pairs == o.pairs && segments_ == o.segments_ &&
         hidden_ == o.hidden_;
}

SegmentationResult segment_trajectories(std::span<const Trajectory> trajectories,
                                        const std::string& env_id, int k,
                                        std::uint64_t seed,
                                        int windows_per_trajectory) {
  if (k < 1) throw ConfigError("segment length k must be >= 1");
  if (windows_per_trajectory < 1) {
    throw ConfigError("windows_per_trajectory must be >= 1");
  }
  SegmentationResult out;
  CounterRng rng(seed);
  std::set<SegmentId> seen;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const Trajectory& traj = trajectories[ti];
    const int len = static_cast<int>(traj.steps.size());
    if (len < k) {
      ++out.skipped_short;
      continue;
    }
    for (int w = 0; w < windows_per_trajectory; ++w) {
      const int offset =
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(len - k + 1)));
      Segment seg;
      seg.env_id = env_id;
      HiddenTotals hidden;
      for (int t = offset; t < offset + k; ++t) {
        const Transition& step = traj.steps[static_cast<std::size_t>(t)];
        seg.states.push_back(step.observation);
        seg.actions.push_back(step.action);
        hidden.hidden_return += step.reward;
        hidden.hidden_cost += step.cost;
      }
      std::uint64_t h = hash_string(mix64(0x5E6D), env_id);
      h = hash_combine(hash_combine(h, ti), static_cast<std::uint64_t>(offset));
      h = hash_doubles(hash_doubles(h, seg.states), seg.actions);
      seg.id = h;
      if (!seen.insert(seg.id).second) continue;  // same window drawn twice
      out.segments.push_back(std::move(seg));
      out.hidden.push_back(hidden);
    }
  }
  return out;
}

PreferenceOutcome label_preference(const HiddenTotals& a, const HiddenTotals& b,
                                   CounterRng& rng) {
  if (a.hidden_return > b.hidden_return) return {true, false};
  if (b.hidden_return > a.hidden_return) return {false, false};
  return {rng.bernoulli(0.5), true};
}

int label_safety(double hidden_cost, int k, double kappa_data, int t_max) {
  if (t_max <= 0) throw ConfigError("T_max must be positive");
  if (!(kappa_data >= 0.0)) throw ConfigError("kappa_data must be >= 0");
  if (t_max < k) throw ConfigError("T_max must be >= segment length k");
  const double kappa_seg = kappa_data * k / t_max;
  return hidden_cost <= kappa_seg ? 1 : -1;
}

FeedbackDataset build_dataset(const SegmentationResult& segs, int n_pairs,
                              double kappa_data, int t_max, std::uint64_t seed,
                              bool with_replacement) {
  const std::size_t n = segs.segments.size();
  if (n < 2) throw ConfigError("build_dataset needs at least 2 segments");
  if (n_pairs < 0) throw ConfigError("n_pairs must be >= 0");
  if (!with_replacement &&
      static_cast<double>(n_pairs) > static_cast<double>(n) * (n - 1) / 2.0) {
    throw ConfigError("n_pairs exceeds the number of distinct segment pairs");
  }
  CounterRng rng(seed);
  CounterRng pick = rng.fork(1);
  CounterRng coin = rng.fork(2);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = label_safety(segs.hidden[i].hidden_cost,
                             segs.segments[i].k(), kappa_data, t_max);
  }

  FeedbackDataset ds;
  ds.meta.t_max = t_max;
  ds.meta.kappa_data = kappa_data;
  ds.meta.seed = seed;
  ds.meta.skipped_short = segs.skipped_short;
  ds.meta.k = n > 0 ? segs.segments.front().k() : 0;
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (int p = 0; p < n_pairs; ++p) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      i = pick.uniform_int(n);
      j = pick.uniform_int(n - 1);
      if (j >= i) ++j;
      if (with_replacement) break;
      if (used.insert({std::min(i, j), std::max(i, j)}).second) break;
    }
    const PreferenceOutcome pref =
        label_preference(segs.hidden[i], segs.hidden[j], coin);
    const std::size_t plus = pref.first_preferred ? i : j;
    const std::size_t minus = pref.first_preferred ? j : i;
    PairRecord rec;
    rec.seg_plus = segs.segments[plus].id;
    rec.seg_minus = segs.segments[minus].id;
    rec.y_plus = labels[plus];
    rec.y_minus = labels[minus];
    rec.tie = pref.tie;
    rec.pair_id = hash_combine(
        hash_combine(hash_combine(mix64(seed), static_cast<std::uint64_t>(p)),
                     rec.seg_plus),
        rec.seg_minus);
    ds.add_segment(segs.segments[plus], segs.hidden[plus]);
    ds.add_segment(segs.segments[minus], segs.hidden[minus]);
    ds.pairs.push_back(rec);
  }
  ds.recount_classes();
  return ds;
}

FeedbackDataset inject_noise(const FeedbackDataset& dataset,
                             NoiseChannel channel, double level,
                             std::uint64_t seed) {
  if (!(level >= 0.0 && level <= 1.0)) {
    throw ConfigError("noise level must lie in [0, 1]");
  }
  FeedbackDataset out = dataset;
  const std::size_t n = out.pairs.size();
  const std::size_t m = floor_count(level, n);
  CounterRng rng(seed);
  const auto order = permutation(n, rng);
  for (std::size_t i = 0; i < m; ++i) {
    PairRecord& rec = out.pairs[order[i]];
    if (channel == NoiseChannel::kPreference) {
      std::swap(rec.seg_plus, rec.seg_minus);
      std::swap(rec.y_plus, rec.y_minus);
    } else {
      rec.y_plus = -rec.y_plus;
      rec.y_minus = -rec.y_minus;
    }
  }
  if (channel == NoiseChannel::kPreference) {
    out.meta.noise_preference = level;
  } else {
    out.meta.noise_safety = level;
    out.recount_classes();
  }
  return out;
}

FeedbackDataset subsample_pairs(const FeedbackDataset& dataset, int n,
                                std::uint64_t seed) {
  if (n < 0 || static_cast<std::size_t>(n) > dataset.pairs.size()) {
    throw ConfigError("subsample size out of range");
  }
  CounterRng rng(seed);
  auto order = permutation(dataset.pairs.size(), rng);
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());
  FeedbackDataset out;
  out.meta = dataset.meta;
  out.meta.subsample = "pairs";
  for (std::size_t idx : order) {
    const PairRecord& rec = dataset.pairs[idx];
    out.add_segment(dataset.segment(rec.seg_plus), dataset.hidden(rec.seg_plus));
    out.add_segment(dataset.segment(rec.seg_minus),
                    dataset.hidden(rec.seg_minus));
    out.pairs.push_back(rec);
  }
  out.recount_classes();
  return out;
}

std::string format_id(std::uint64_t id) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(id));
  return buf;
}

std::uint64_t parse_id(const std::string& text) {
  if (text.empty() || text.size() > 16 ||
      text.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw ParseError("malformed id '" + text + "'", 0);
  }
  return std::stoull(text, nullptr, 16);
}

std::string dataset_to_jsonl(const FeedbackDataset& ds) {
  json meta{{"T_max", ds.meta.t_max},
            {"trajectory_cost_threshold", ds.meta.kappa_data},
            {"n_s", ds.meta.n_s},
            {"n_u", ds.meta.n_u},
            {"k", ds.meta.k},
            {"seed", ds.meta.seed},
            {"r_min", ds.meta.r_min},
            {"r_max", ds.meta.r_max},
            {"subsample", ds.meta.subsample},
            {"noise", {{"preference", ds.meta.noise_preference},
                       {"safety", ds.meta.noise_safety}}},
            {"skipped_short", ds.meta.skipped_short},
            {"env", ds.meta.env ? env_to_json(*ds.meta.env) : json(nullptr)}};
  std::string out =
      json{{"format", "presa-feedback"}, {"version", kDatasetVersion},
           {"meta", meta}}
          .dump();
  out += '\n';
  for (const Segment& s : ds.segments()) {
    const HiddenTotals& h = ds.hidden(s.id);
    json seg{{"id", format_id(s.id)},
             {"env_id", s.env_id},
             {"k", s.k()},
             {"states", s.states},
             {"actions", s.actions},
             {"hidden", {{"hidden_return", h.hidden_return},
                         {"hidden_cost", h.hidden_cost}}}};
    out += json{{"seg", seg}}.dump();
    out += '\n';
  }
  for (const PairRecord& p : ds.pairs) {
    json pair{{"pair_id", format_id(p.pair_id)},
              {"seg_plus", format_id(p.seg_plus)},
              {"seg_minus", format_id(p.seg_minus)},
              {"y_plus", p.y_plus},
              {"y_minus", p.y_minus},
              {"pref_source", source_name(p.pref_source)},
              {"safety_source", source_name(p.safety_source)},
              {"general_pref",
               p.general_pref ? json(*p.general_pref == Side::kPlus ? "plus"
                                                                    : "minus")
                              : json(nullptr)},
              {"tie", p.tie}};
    out += json{{"pair", pair}}.dump();
    out += '\n';
  }
  return out;
}

FeedbackDataset dataset_from_jsonl(const std::string& text) {
  FeedbackDataset ds;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    ++line_no;
    if (end == std::string::npos) {
      throw ParseError("truncated final line (no newline terminator)", line_no);
    }
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) throw ParseError("empty line", line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (!header_seen) {
        if (!j.is_object() || j.value("format", "") != "presa-feedback") {
          throw ParseError("missing presa-feedback header", line_no);
        }
        const int version = j.at("version").get<int>();
        if (version != kDatasetVersion) {
          throw ParseError("unsupported dataset version " +
                               std::to_string(version) + " (expected " +
                               std::to_string(kDatasetVersion) + ")",
                           line_no);
        }
        const json& m = j.at("meta");
        ds.meta.t_max = m.at("T_max").get<int>();
        ds.meta.kappa_data = m.at("trajectory_cost_threshold").get<double>();
        ds.meta.n_s = m.at("n_s").get<int>();
        ds.meta.n_u = m.at("n_u").get<int>();
        ds.meta.k = m.value("k", 0);
        ds.meta.seed = m.value("seed", std::uint64_t{0});
        ds.meta.r_min = m.value("r_min", 0.0);
        ds.meta.r_max = m.value("r_max", 0.0);
        ds.meta.subsample = m.value("subsample", std::string("pairs"));
        if (m.contains("noise")) {
          ds.meta.noise_preference = m["noise"].value("preference", 0.0);
          ds.meta.noise_safety = m["noise"].value("safety", 0.0);
        }
        ds.meta.skipped_short = m.value("skipped_short", 0);
        if (m.contains("env") && !m["env"].is_null()) {
          try {
            ds.meta.env = env_from_json(m["env"]);
          } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
          }
        }
        header_seen = true;
      } else if (j.contains("seg")) {
        const json& s = j["seg"];
        Segment seg;
        seg.id = parse_id(s.at("id").get<std::string>());
        seg.env_id = s.at("env_id").get<std::string>();
        seg.states = s.at("states").get<std::vector<Vec>>();
        seg.actions = s.at("actions").get<std::vector<Vec>>();
        const int k = s.at("k").get<int>();
        if (k < 1 || seg.k() != k || static_cast<int>(seg.actions.size()) != k) {
          throw ParseError("segment length does not match k", line_no);
        }
        HiddenTotals h;
        h.hidden_return = s.at("hidden").at("hidden_return").get<double>();
        h.hidden_cost = s.at("hidden").at("hidden_cost").get<double>();
        if (ds.has_segment(seg.id)) {
          throw ParseError("duplicate segment id", line_no);
        }
        ds.add_segment(std::move(seg), h);
      } else if (j.contains("pair")) {
        const json& p = j["pair"];
        PairRecord rec;
        rec.pair_id = parse_id(p.at("pair_id").get<std::string>());
        rec.seg_plus = parse_id(p.at("seg_plus").get<std::string>());
        rec.seg_minus = parse_id(p.at("seg_minus").get<std::string>());
        rec.y_plus = p.at("y_plus").get<int>();
        rec.y_minus = p.at("y_minus").get<int>();
        check_label(rec.y_plus, line_no);
        check_label(rec.y_minus, line_no);
        rec.pref_source = parse_source(p.at("pref_source").get<std::string>(),
                                       line_no);
        rec.safety_source = parse_source(
            p.at("safety_source").get<std::string>(), line_no);
        if (p.contains("general_pref") && !p["general_pref"].is_null()) {
          const std::string g = p["general_pref"].get<std::string>();
          if (g == "plus") {
            rec.general_pref = Side::kPlus;
          } else if (g == "minus") {
            rec.general_pref = Side::kMinus;
          } else {
            throw ParseError("general_pref must be plus or minus", line_no);
          }
        }
        rec.tie = p.value("tie", false);
        if (rec.seg_plus == rec.seg_minus) {
          throw ParseError("pair references the same segment twice", line_no);
        }
        if (!ds.has_segment(rec.seg_plus) || !ds.has_segment(rec.seg_minus)) {
          throw ParseError("pair references an unknown segment", line_no);
        }
        ds.pairs.push_back(rec);
      } else {
        throw ParseError("expected a seg or pair object", line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(e.what(), line_no);
    }
  }
  if (!header_seen) throw ParseError("empty dataset file", 1);
  return ds;
}

void write_dataset(const std::string& path, const FeedbackDataset& dataset) {
  atomic_write_file(path, dataset_to_jsonl(dataset));
}

FeedbackDataset read_dataset(const std::string& path) {
  return dataset_from_jsonl(read_text_file(path));
}

TrainingView make_training_view(const FeedbackDataset& dataset,
                                PreferenceChannel channel) {
  TrainingView view;
  std::unordered_map<SegmentId, std::size_t> index;
  auto intern = [&](SegmentId id) {
    auto [it, inserted] = index.emplace(id, view.segments.size());
    if (inserted) view.segments.push_back(dataset.segment(id));
    return it->second;
  };
  for (const PairRecord& rec : dataset.pairs) {
    bool swap = false;
    if (channel == PreferenceChannel::kGeneral) {
      if (!rec.general_pref) continue;
      swap = *rec.general_pref == Side::kMinus;
    }
    TrainPair p;
    p.plus = intern(swap ? rec.seg_minus : rec.seg_plus);
    p.minus = intern(swap ? rec.seg_plus : rec.seg_minus);
    p.y_plus = swap ? rec.y_minus : rec.y_plus;
    p.y_minus = swap ? rec.y_plus : rec.y_minus;
    view.pairs.push_back(p);
  }
  if (channel == PreferenceChannel::kGeneral && view.pairs.empty()) {
    throw ConfigError("dataset has no general preferences");
  }
  return view;
}

ClassCounts count_label_occurrences(const TrainingView& view) {
  ClassCounts c;
  for (const TrainPair& p : view.pairs) {
    (p.y_plus > 0 ? c.n_s : c.n_u) += 1;
    (p.y_minus > 0 ? c.n_s : c.n_u) += 1;
  }
  return c;
}

}  // namespace presa
