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

#include "presa/json_io.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "presa/error.h"

namespace presa {

using nlohmann::json;

json env_to_json(const EnvSpec& spec) {
  if (const auto* g = std::get_if<GridSpec>(&spec)) {
    return json{{"kind", "grid"},
                {"width", g->width},
                {"height", g->height},
                {"start_cells", g->start_cells},
                {"goal_cells", g->goal_cells},
                {"hazard_cells", g->hazard_cells},
                {"step_reward", g->step_reward},
                {"goal_reward", g->goal_reward},
                {"hazard_cost", g->hazard_cost},
                {"slip_prob", g->slip_prob},
                {"horizon", g->horizon}};
  }
  const auto& p = std::get<PointMassSpec>(spec);
  return json{{"kind", "point_mass"},
              {"arena_halfwidth", p.arena_halfwidth},
              {"start", p.start},
              {"goal_center", p.goal_center},
              {"goal_radius", p.goal_radius},
              {"hazard_center", p.hazard_center},
              {"hazard_radius", p.hazard_radius},
              {"max_step", p.max_step},
              {"horizon", p.horizon},
              {"dynamics_noise_std", p.dynamics_noise_std},
              {"step_reward", p.step_reward},
              {"goal_reward", p.goal_reward},
              {"hazard_cost", p.hazard_cost}};
}

EnvSpec env_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "grid") {
      GridSpec g;
      g.width = j.at("width").get<int>();
      g.height = j.at("height").get<int>();
      g.start_cells = j.at("start_cells").get<std::vector<int>>();
      g.goal_cells = j.at("goal_cells").get<std::vector<int>>();
      g.hazard_cells = j.at("hazard_cells").get<std::vector<int>>();
      g.step_reward = j.at("step_reward").get<double>();
      g.goal_reward = j.at("goal_reward").get<double>();
      g.hazard_cost = j.at("hazard_cost").get<double>();
      g.slip_prob = j.at("slip_prob").get<double>();
      g.horizon = j.at("horizon").get<int>();
      return g;
    }
    if (kind == "point_mass") {
      PointMassSpec p;
      p.arena_halfwidth = j.at("arena_halfwidth").get<double>();
      p.start = j.at("start").get<std::array<double, 2>>();
      p.goal_center = j.at("goal_center").get<std::array<double, 2>>();
      p.goal_radius = j.at("goal_radius").get<double>();
      p.hazard_center = j.at("hazard_center").get<std::array<double, 2>>();
      p.hazard_radius = j.at("hazard_radius").get<double>();
      p.max_step = j.at("max_step").get<double>();
      p.horizon = j.at("horizon").get<int>();
      p.dynamics_noise_std = j.at("dynamics_noise_std").get<double>();
      p.step_reward = j.at("step_reward").get<double>();
      p.goal_reward = j.at("goal_reward").get<double>();
      p.hazard_cost = j.at("hazard_cost").get<double>();
      return p;
    }
    throw ParseError("unknown env kind '" + kind + "'", 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad env description: ") + e.what(), 0);
  }
}

void atomic_write_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace presa
