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

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "presa/config.h"
#include "presa/error.h"

namespace presa {
namespace {

std::string error_of(const std::string& text) {
  try {
    experiment_from_file(KeyValueFile::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(KeyValueFile, Grammar) {
  const KeyValueFile f = KeyValueFile::parse(
      "# leading comment\n"
      "config_version = 1\n"
      "seed = 42   # trailing comment\n"
      "name = \"a # b\"\n"
      "\n"
      "[train]\n"
      "alpha = 0.5\n"
      "hidden = [64, 32]\n"
      "[env.grid]\n"
      "cells = 1, 2, 3\n"
      "flag = true\n");
  EXPECT_EQ(f.get_u64("seed", 0), 42u);
  EXPECT_EQ(f.get_string("name", ""), "a # b");
  EXPECT_EQ(f.get_double("train.alpha", 0), 0.5);
  EXPECT_EQ(f.get_ints("train.hidden", {}), (std::vector<int>{64, 32}));
  EXPECT_EQ(f.get_doubles("env.grid.cells", {}),
            (std::vector<double>{1, 2, 3}));
  EXPECT_TRUE(f.get_bool("env.grid.flag", false));
  EXPECT_EQ(f.get_double("train.missing", 7.5), 7.5);
  EXPECT_TRUE(f.has("train.alpha"));
  EXPECT_FALSE(f.has("alpha"));
}

TEST(KeyValueFile, ErrorsCarryLineNumbers) {
  const struct {
    const char* text;
    const char* needle;
  } cases[] = {
      {"config_version = 1\nbad line\n", "config line 2"},
      {"config_version = 1\n[train\n", "config line 2"},
      {"config_version = 1\n[train]\nalpha = 1\nalpha = 2\n", "config line 4"},
      {"config_version = 1\n[a b]\n", "config line 2"},
  };
  for (const auto& c : cases) {
    try {
      KeyValueFile::parse(c.text);
      ADD_FAILURE() << "accepted: " << c.text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(c.needle), std::string::npos)
          << e.what();
    }
  }
}

TEST(KeyValueFile, VersionMustComeFirst) {
  EXPECT_THROW(KeyValueFile::parse("seed = 1\nconfig_version = 1\n"),
               ConfigError);
  EXPECT_THROW(KeyValueFile::parse("[train]\nconfig_version = 1\n"),
               ConfigError);
  EXPECT_THROW(KeyValueFile::parse("config_version = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueFile::parse("# only a comment\n"), ConfigError);
  EXPECT_NO_THROW(KeyValueFile::parse("\n# c\nconfig_version = 1\n"));
}

TEST(KeyValueFile, TypeErrorsNameTheKey) {
  const KeyValueFile f =
      KeyValueFile::parse("config_version = 1\n[train]\nalpha = abc\nn = 1.5\n");
  try {
    f.get_double("train.alpha", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.alpha"), std::string::npos);
  }
  EXPECT_THROW(f.get_int("train.n", 0), ConfigError);
  EXPECT_THROW(f.get_bool("train.alpha", false), ConfigError);
}

TEST(ExperimentConfig, Defaults) {
  const ExperimentConfig c =
      experiment_from_file(KeyValueFile::parse("config_version = 1\n"));
  ASSERT_TRUE(std::holds_alternative<GridSpec>(c.env));
  EXPECT_EQ(std::get<GridSpec>(c.env).hazard_cells,
            shortcut_grid().hazard_cells);
  EXPECT_EQ(c.data.k, 8);
  EXPECT_FALSE(c.eval_range_given);
}

TEST(ExperimentConfig, ShippedConfigLoads) {
  const ExperimentConfig c =
      load_experiment(std::string(PRESA_SOURCE_DIR) + "/configs/shortcut.ini");
  EXPECT_EQ(c.train.alpha, 3.0);
  EXPECT_EQ(c.train.delta, 0.75);
  EXPECT_EQ(c.eval.thresholds, (std::vector<double>{2, 4, 8}));
  EXPECT_EQ(c.bound.grid_size, 64);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(ExperimentConfig, UnknownKeyRejectedWithLine) {
  const std::string e = error_of("config_version = 1\n[train]\nalpah = 2\n");
  EXPECT_NE(e.find("config line 3"), std::string::npos) << e;
  EXPECT_NE(e.find("train.alpah"), std::string::npos) << e;
  // Point-mass keys are not read for a grid environment.
  EXPECT_NE(error_of("config_version = 1\n[env]\nkind = shortcut_grid\ngoal_radius = 1\n")
                .find("env.goal_radius"),
            std::string::npos);
}

TEST(ExperimentConfig, RangeChecks) {
  EXPECT_NE(error_of("config_version = 1\n[train]\ndelta = 1.5\n"), "");
  EXPECT_NE(error_of("config_version = 1\n[data]\nnoise_safety = 2\n"), "");
  EXPECT_NE(error_of("config_version = 1\n[bound]\ntau = 1\n"), "");
  EXPECT_NE(error_of("config_version = 1\n[eval]\nthresholds = []\n"), "");
  EXPECT_NE(error_of("config_version = 1\n[eval]\nr_min = 0\n"), "");
  EXPECT_NE(error_of("config_version = 1\n[env]\nkind = maze\n"), "");
}

TEST(ExperimentConfig, SeedEnvironmentOverride) {
  const KeyValueFile f =
      KeyValueFile::parse("config_version = 1\nseed = 3\n");
  ::unsetenv("PRESA_SEED");
  EXPECT_EQ(experiment_from_file(f).data.seed, 3u);
  ::setenv("PRESA_SEED", "17", 1);
  const ExperimentConfig c = experiment_from_file(f);
  ::unsetenv("PRESA_SEED");
  EXPECT_EQ(c.data.seed, 17u);
  EXPECT_EQ(c.train.seed, 17u);
}

}  // namespace
}  // namespace presa
