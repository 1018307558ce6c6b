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

#include "presa/annotate.h"

#include <numeric>

#include "httplib.h"
#include "presa/error.h"
#include "presa/json_io.h"
#include "presa/rng.h"

namespace presa {
namespace {

using json = nlohmann::json;

ServiceResponse error(int status, const std::string& message) {
  return {status, json{{"error", message}}};
}

std::uint64_t mode_tag(LabelMode m) {
  switch (m) {
    case LabelMode::kPreference: return 0x70726566;
    case LabelMode::kSafety: return 0x73616665;
    case LabelMode::kGeneral: return 0x67656e72;
  }
  return 0;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  if (s.empty() || s.size() > 20) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    const std::uint64_t d = static_cast<std::uint64_t>(c - '0');
    if (v > (UINT64_MAX - d) / 10) return std::nullopt;
    v = v * 10 + d;
  }
  return v;
}

}  // namespace

LabelMode label_mode_from_string(const std::string& s) {
  if (s == "preference") return LabelMode::kPreference;
  if (s == "safety") return LabelMode::kSafety;
  if (s == "general") return LabelMode::kGeneral;
  throw ConfigError("mode must be preference, safety or general");
}

std::string to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::kPreference: return "preference";
    case LabelMode::kSafety: return "safety";
    case LabelMode::kGeneral: return "general";
  }
  return "?";
}

AnnotationService::AnnotationService(FeedbackDataset corpus,
                                     std::string dataset_out,
                                     LabelMode default_mode)
    : data_(std::move(corpus)),
      dataset_out_(std::move(dataset_out)),
      default_mode_(default_mode) {
  if (data_.pairs.empty()) throw ConfigError("annotation corpus has no pairs");
  persist();
}

FeedbackDataset AnnotationService::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return data_;
}

void AnnotationService::persist() { write_dataset(dataset_out_, data_); }

ServiceResponse AnnotationService::handle(const ServiceRequest& r) {
  try {
    if (r.method == "GET" && r.path == "/session") return open_session(r);
    if (r.method == "GET" && r.path == "/next") return next(r);
    if (r.method == "POST" && r.path == "/label") return label(r);
    if (r.method == "POST" && r.path == "/skip") return skip(r);
    if (r.method == "GET" && r.path == "/progress") return progress(r);
    return error(404, "no such endpoint");
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ServiceResponse AnnotationService::open_session(const ServiceRequest& r) {
  LabelMode mode = default_mode_;
  if (auto it = r.query.find("mode"); it != r.query.end()) {
    try {
      mode = label_mode_from_string(it->second);
    } catch (const ConfigError& e) {
      return error(400, e.what());
    }
  }
  std::uint64_t seed = 0;
  if (auto it = r.query.find("seed"); it != r.query.end()) {
    const auto v = parse_u64(it->second);
    if (!v) return error(400, "seed must be a non-negative integer");
    seed = *v;
  }
  std::lock_guard<std::mutex> lock(mu_);
  LabelSession s;
  s.session_id = "s" + std::to_string(next_session_++);
  s.mode = mode;
  s.seed = seed;
  if (auto it = r.query.find("annotator"); it != r.query.end()) {
    s.annotator_id = it->second;
  }
  const std::size_t n = mode == LabelMode::kSafety ? data_.num_segments()
                                                   : data_.pairs.size();
  CounterRng rng = CounterRng(hash_combine(seed, mode_tag(mode))).fork(1);
  s.order = permutation(n, rng);
  const json out{{"session_id", s.session_id},
                 {"mode", to_string(mode)},
                 {"seed", seed},
                 {"annotator_id", s.annotator_id},
                 {"total", n}};
  sessions_.emplace(s.session_id, std::move(s));
  return {200, out};
}

std::string AnnotationService::item_id(const LabelSession& s,
                                       std::size_t index) const {
  if (s.mode == LabelMode::kSafety) {
    return "g" + format_id(data_.segments()[index].id);
  }
  return "p" + format_id(data_.pairs[index].pair_id);
}

bool AnnotationService::display_swapped(const LabelSession& s,
                                        std::size_t index) const {
  return (mix64(hash_combine(hash_combine(s.seed, mode_tag(s.mode)),
                             data_.pairs[index].pair_id)) &
          1) != 0;
}

json AnnotationService::env_geometry() const {
  if (!data_.meta.env) return json{{"kind", "unknown"}};
  if (const auto* g = std::get_if<GridSpec>(&*data_.meta.env)) {
    return {{"kind", "grid"},
            {"width", g->width},
            {"height", g->height},
            {"start_cells", g->start_cells},
            {"goal_cells", g->goal_cells},
            {"hazard_cells", g->hazard_cells}};
  }
  const auto& p = std::get<PointMassSpec>(*data_.meta.env);
  return {{"kind", "point_mass"},
          {"arena_halfwidth", p.arena_halfwidth},
          {"start", p.start},
          {"goal_center", p.goal_center},
          {"goal_radius", p.goal_radius},
          {"hazard_center", p.hazard_center},
          {"hazard_radius", p.hazard_radius}};
}

json AnnotationService::segment_geometry(const Segment& seg) const {
  const bool grid =
      data_.meta.env && std::holds_alternative<GridSpec>(*data_.meta.env);
  if (grid) {
    std::vector<int> cells;
    std::vector<int> actions;
    for (int t = 0; t < seg.k(); ++t) {
      cells.push_back(grid_cell(seg.states[t]));
      actions.push_back(static_cast<int>(seg.actions[t].at(0)));
    }
    return {{"cells", cells}, {"actions", actions}};
  }
  json points = json::array();
  for (const Vec& s : seg.states) points.push_back(s);
  return {{"points", points}};
}

ServiceResponse AnnotationService::next(const ServiceRequest& r) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = r.query.find("session_id");
  if (it == r.query.end()) return error(400, "session_id is required");
  auto s = sessions_.find(it->second);
  if (s == sessions_.end()) return error(404, "unknown session");
  const LabelSession& sess = s->second;
  json out{{"session_id", sess.session_id}, {"mode", to_string(sess.mode)}};
  if (sess.order.empty()) {
    out["done"] = true;
    return {200, out};
  }
  const std::size_t idx = sess.order.front();
  out["done"] = false;
  out["item_id"] = item_id(sess, idx);
  out["env"] = env_geometry();
  if (sess.mode == LabelMode::kSafety) {
    out["segment"] = segment_geometry(data_.segments()[idx]);
  } else {
    const PairRecord& p = data_.pairs[idx];
    const bool swap = display_swapped(sess, idx);
    out["first"] = segment_geometry(data_.segment(swap ? p.seg_minus : p.seg_plus));
    out["second"] = segment_geometry(data_.segment(swap ? p.seg_plus : p.seg_minus));
  }
  return {200, out};
}

ServiceResponse AnnotationService::label(const ServiceRequest& r) {
  json body;
  try {
    body = json::parse(r.body);
  } catch (const json::exception&) {
    return error(400, "body must be JSON");
  }
  if (!body.is_object() || !body.contains("session_id") ||
      !body.contains("item_id") || !body.contains("value") ||
      !body["session_id"].is_string() || !body["item_id"].is_string() ||
      !body["value"].is_string()) {
    return error(400, "body needs string session_id, item_id and value");
  }
  const std::string value = body["value"].get<std::string>();
  std::lock_guard<std::mutex> lock(mu_);
  auto s = sessions_.find(body["session_id"].get<std::string>());
  if (s == sessions_.end()) return error(404, "unknown session");
  LabelSession& sess = s->second;
  const std::string id = body["item_id"].get<std::string>();
  bool known = false;
  for (std::size_t idx : sess.order) {
    if (item_id(sess, idx) == id) {
      known = true;
      break;
    }
  }
  if (!known) return error(404, "unknown or already labelled item");
  if (item_id(sess, sess.order.front()) != id) {
    return error(409, "item is not the session head");
  }
  const std::size_t idx = sess.order.front();
  if (sess.mode == LabelMode::kSafety) {
    if (value != "safe" && value != "unsafe") {
      return error(400, "value must be safe or unsafe");
    }
    const int y = value == "safe" ? 1 : -1;
    const SegmentId seg = data_.segments()[idx].id;
    human_safety_.insert(seg);
    for (PairRecord& p : data_.pairs) {
      if (p.seg_plus == seg) p.y_plus = y;
      if (p.seg_minus == seg) p.y_minus = y;
      if (human_safety_.count(p.seg_plus) && human_safety_.count(p.seg_minus)) {
        p.safety_source = LabelSource::kHuman;
      }
    }
    data_.recount_classes();
  } else {
    if (value != "plus" && value != "minus") {
      return error(400, "value must be plus or minus");
    }
    PairRecord& p = data_.pairs[idx];
    // "plus" prefers the first displayed segment.
    const bool stored_plus_wins =
        (value == "plus") != display_swapped(sess, idx);
    if (sess.mode == LabelMode::kPreference) {
      if (!stored_plus_wins) {
        std::swap(p.seg_plus, p.seg_minus);
        std::swap(p.y_plus, p.y_minus);
        if (p.general_pref) {
          p.general_pref =
              *p.general_pref == Side::kPlus ? Side::kMinus : Side::kPlus;
        }
      }
      p.pref_source = LabelSource::kHuman;
      p.tie = false;
    } else {
      p.general_pref = stored_plus_wins ? Side::kPlus : Side::kMinus;
    }
  }
  sess.order.erase(sess.order.begin());
  ++sess.labeled;
  persist();
  return {200, json{{"ok", true},
                    {"labeled", sess.labeled},
                    {"remaining", sess.order.size()}}};
}

ServiceResponse AnnotationService::skip(const ServiceRequest& r) {
  json body;
  try {
    body = json::parse(r.body);
  } catch (const json::exception&) {
    return error(400, "body must be JSON");
  }
  if (!body.is_object() || !body.contains("session_id") ||
      !body.contains("item_id") || !body["session_id"].is_string() ||
      !body["item_id"].is_string()) {
    return error(400, "body needs string session_id and item_id");
  }
  std::lock_guard<std::mutex> lock(mu_);
  auto s = sessions_.find(body["session_id"].get<std::string>());
  if (s == sessions_.end()) return error(404, "unknown session");
  LabelSession& sess = s->second;
  const std::string id = body["item_id"].get<std::string>();
  bool known = false;
  for (std::size_t idx : sess.order) {
    if (item_id(sess, idx) == id) {
      known = true;
      break;
    }
  }
  if (!known) return error(404, "unknown or already labelled item");
  if (item_id(sess, sess.order.front()) != id) {
    return error(409, "item is not the session head");
  }
  const std::size_t head = sess.order.front();
  sess.order.erase(sess.order.begin());
  sess.order.push_back(head);
  ++sess.skipped;
  return {200, json{{"ok", true}, {"skipped", sess.skipped}}};
}

ServiceResponse AnnotationService::progress(const ServiceRequest& r) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = r.query.find("session_id");
  if (it == r.query.end()) return error(400, "session_id is required");
  auto s = sessions_.find(it->second);
  if (s == sessions_.end()) return error(404, "unknown session");
  return {200, json{{"session_id", s->second.session_id},
                    {"labeled", s->second.labeled},
                    {"remaining", s->second.order.size()},
                    {"skipped", s->second.skipped}}};
}

void register_routes(httplib::Server& server, AnnotationService& service) {
  auto adapt = [&service](const char* method) {
    return [&service, method](const httplib::Request& req,
                              httplib::Response& res) {
      ServiceRequest r;
      r.method = method;
      r.path = req.path;
      for (const auto& [k, v] : req.params) r.query[k] = v;
      r.body = req.body;
      const ServiceResponse out = service.handle(r);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
  };
  for (const char* path : {"/session", "/next", "/progress"}) {
    server.Get(path, adapt("GET"));
  }
  for (const char* path : {"/label", "/skip"}) {
    server.Post(path, adapt("POST"));
  }
}

void run_annotation_server(AnnotationService& service, const std::string& host,
                           int port) {
  httplib::Server server;
  register_routes(server, service);
  if (!server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" +
                             std::to_string(port));
  }
}

}  // namespace presa
