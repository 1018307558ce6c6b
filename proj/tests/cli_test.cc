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

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun presa(const std::string& args) {
  const std::string cmd = std::string(PRESA_CLI) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  CliRun r;
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("presa_cli_" +
            std::string(::testing::UnitTest::GetInstance()
                            ->current_test_info()
                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = (dir_ / "small.ini").string();
    write_config(config_, "0.05");
  }

  void write_config(const std::string& path, const std::string& nu_lr) {
    std::ofstream out(path);
    out << "config_version = 1\nseed = 3\n"
           "[env]\nkind = shortcut_grid\n"
           "[behavior]\nn_trajectories = 40\n"
           "[data]\nk = 6\nn_pairs = 60\nkappa = 4\n"
           "[train]\npretrain_steps = 30\ntrain_steps = 40\nbatch_size = 16\n"
           "policy_lr = 0.01\nbc_lr = 0.05\nnu_lr = "
        << nu_lr
        << "\n"
           "[eval]\nthresholds = [2, 4]\nseeds = [0, 1]\nepisodes_per = 5\n"
           "[bound]\nn = 200\ntrials = 4\ngrid_size = 8\nm_signs = 10\n"
           "n_truth = 5000\n";
  }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  fs::path dir_;
  std::string config_;
};

TEST_F(CliTest, MissingRequiredFlagExitsOne) {
  const CliRun r = presa("train --config " + config_ + " --method presa --out x");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("--dataset is required"), std::string::npos)
      << r.output;
}

TEST_F(CliTest, BadInputsExitOne) {
  EXPECT_EQ(presa("gen-data --config /no/such.ini --out x").code, 1);
  EXPECT_EQ(presa("frobnicate").code, 1);
  const CliRun bad_method = presa("train --config " + config_ + " --dataset " +
                               config_ + " --method magic --out x");
  EXPECT_EQ(bad_method.code, 1);
  std::ofstream(path("broken.ini")) << "seed = 1\n";
  const CliRun broken = presa("gen-data --config " + path("broken.ini") +
                           " --out " + path("d.jsonl"));
  EXPECT_EQ(broken.code, 1);
  EXPECT_NE(broken.output.find("config_version"), std::string::npos);
  std::ofstream(path("junk.jsonl")) << "not a dataset\n";
  EXPECT_EQ(presa("train --config " + config_ + " --dataset " +
                  path("junk.jsonl") + " --method presa --out " + path("m"))
                .code,
            1);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(presa("--help").code, 0); }

TEST_F(CliTest, PipelineIsByteReproducible) {
  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    ASSERT_EQ(presa("gen-data --config " + config_ + " --out " +
                    path("data_" + t + ".jsonl"))
                  .code,
              0);
    ASSERT_EQ(presa("train --config " + config_ + " --dataset " +
                    path("data_" + t + ".jsonl") + " --method presa --out " +
                    path("model_" + t))
                  .code,
              0);
    const CliRun ev = presa("eval --config " + config_ + " --snapshot " +
                         path("model_" + t + ".snapshot") + " --dataset " +
                         path("data_" + t + ".jsonl") + " --out " +
                         path("rep_" + t));
    ASSERT_EQ(ev.code, 0) << ev.output;
  }
  EXPECT_EQ(slurp(path("data_a.jsonl")), slurp(path("data_b.jsonl")));
  EXPECT_EQ(slurp(path("model_a.snapshot")), slurp(path("model_b.snapshot")));
  EXPECT_EQ(slurp(path("model_a.log.jsonl")), slurp(path("model_b.log.jsonl")));
  // Report names come from the snapshot stem; everything else must match.
  std::string text_b = slurp(path("rep_b.report.txt"));
  text_b.replace(text_b.find("model_b"), 7, "model_a");
  EXPECT_EQ(slurp(path("rep_a.report.txt")), text_b);
  const auto ja = nlohmann::json::parse(slurp(path("rep_a.report.json")));
  const auto jb = nlohmann::json::parse(slurp(path("rep_b.report.json")));
  ASSERT_EQ(ja.at("methods").size(), 1u);
  EXPECT_EQ(ja.at("methods").at("model_a"), jb.at("methods").at("model_b"));

  // Forty log lines, one per step.
  const std::string log = slurp(path("model_a.log.jsonl"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 40);

  const CliRun other_seed = presa("gen-data --config " + config_ + " --seed 9 " +
                               "--out " + path("data_c.jsonl"));
  ASSERT_EQ(other_seed.code, 0);
  EXPECT_NE(slurp(path("data_a.jsonl")), slurp(path("data_c.jsonl")));
}

TEST_F(CliTest, CplEqualsPresaWithFrozenMultiplier) {
  const std::string frozen = path("frozen.ini");
  write_config(frozen, "0");
  ASSERT_EQ(presa("gen-data --config " + frozen + " --out " + path("d.jsonl"))
                .code,
            0);
  for (const char* m : {"presa", "cpl"}) {
    ASSERT_EQ(presa("train --config " + frozen + " --dataset " +
                    path("d.jsonl") + " --method " + m + " --out " +
                    path(std::string("m_") + m))
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("m_presa.snapshot")), slurp(path("m_cpl.snapshot")));
}

TEST_F(CliTest, EveryMethodTrains) {
  ASSERT_EQ(presa("gen-data --config " + config_ + " --out " + path("d.jsonl"))
                .code,
            0);
  for (const char* m : {"presa", "bc-all", "bc-safe-seg", "binary", "cpl"}) {
    const CliRun r = presa("train --config " + config_ + " --dataset " +
                        path("d.jsonl") + " --method " + m + " --out " +
                        path(std::string("m_") + m));
    EXPECT_EQ(r.code, 0) << m << ": " << r.output;
    EXPECT_TRUE(fs::exists(path(std::string("m_") + m + ".snapshot"))) << m;
  }
}

TEST_F(CliTest, SweepWritesSummary) {
  const CliRun r = presa("sweep --config " + config_ +
                      " --param delta --values 0.6,0.9 --out " + path("sw"));
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string tsv = slurp(path("sw/sweep_delta.tsv"));
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(path("sw/delta_0.6.report.json")));
  EXPECT_TRUE(fs::exists(path("sw/delta_0.9.report.txt")));
  EXPECT_EQ(presa("sweep --config " + config_ +
                  " --param colour --values 1 --out " + path("sw2"))
                .code,
            1);
}

TEST_F(CliTest, BoundWritesReport) {
  const CliRun r = presa("bound --config " + config_ + " --trials 3 --out " +
                      path("bound.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(path("bound.json")));
  EXPECT_EQ(j.at("trials"), 3);
  EXPECT_NEAR(j.at("bound").get<double>(),
              2 * j.at("rademacher_hat").get<double>() +
                  j.at("hoeffding_term").get<double>(),
              1e-12);
  EXPECT_EQ(presa("bound --config " + config_ + " --tau 1.5 --out " +
                  path("b2.json"))
                .code,
            1);
}

TEST_F(CliTest, ServeRejectsBadMode) {
  EXPECT_EQ(presa("serve --corpus " + config_ + " --dataset-out " +
                  path("o.jsonl") + " --mode colour")
                .code,
            1);
}

}  // namespace
