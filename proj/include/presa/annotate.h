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

#ifndef PRESA_ANNOTATE_H_
#define PRESA_ANNOTATE_H_

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "presa/feedback.h"

namespace httplib {
class Server;
}

namespace presa {

enum class LabelMode { kPreference, kSafety, kGeneral };

LabelMode label_mode_from_string(const std::string& s);
std::string to_string(LabelMode mode);

struct LabelSession {
  std::string session_id;
  LabelMode mode = LabelMode::kPreference;
  std::uint64_t seed = 0;
  std::string annotator_id;
  std::vector<std::size_t> order;  // pending item indices, head first
  std::size_t labeled = 0;
  std::size_t skipped = 0;
};

struct ServiceRequest {
  std::string method;  // "GET" or "POST"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

// Labelling state over one corpus. Preference and general items are the
// corpus pairs; safety items are its distinct segments. Every accepted label
// rewrites `dataset_out` atomically. Thread-safe.
class AnnotationService {
 public:
  AnnotationService(FeedbackDataset corpus, std::string dataset_out,
                    LabelMode default_mode = LabelMode::kPreference);

  ServiceResponse handle(const ServiceRequest& request);

  // The dataset as currently persisted.
  FeedbackDataset snapshot() const;

 private:
  struct Item {
    std::size_t index;     // pair index or segment index
    bool swap_display;     // pair shown as (minus, plus)
  };

  ServiceResponse open_session(const ServiceRequest& r);
  ServiceResponse next(const ServiceRequest& r);
  ServiceResponse label(const ServiceRequest& r);
  ServiceResponse skip(const ServiceRequest& r);
  ServiceResponse progress(const ServiceRequest& r);

  std::string item_id(const LabelSession& s, std::size_t index) const;
  bool display_swapped(const LabelSession& s, std::size_t index) const;
  nlohmann::json segment_geometry(const Segment& seg) const;
  nlohmann::json env_geometry() const;
  void persist();

  mutable std::mutex mu_;
  FeedbackDataset data_;
  std::string dataset_out_;
  LabelMode default_mode_;
  std::map<std::string, LabelSession> sessions_;
  std::set<SegmentId> human_safety_;
  std::uint64_t next_session_ = 1;
};

// Routes the five endpoints of `service` on `server`.
void register_routes(httplib::Server& server, AnnotationService& service);

// Blocks serving on host:port until the server is stopped.
void run_annotation_server(AnnotationService& service, const std::string& host,
                           int port);

}  // namespace presa

#endif  // PRESA_ANNOTATE_H_
