// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rloop/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"

namespace rloop {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "rloop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "rloop_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.json") << R"({
      "data": {"n_train": 4, "n_val": 2, "n_test": 0},
      "n_prior": 8,
      "mae": {"dim": 32, "decoder_dim": 16, "encoder_depth": 1, "decoder_depth": 1,
              "heads": 2, "decoder_heads": 2},
      "pretrain": {"epochs": 1, "batch_size": 4},
      "dssn": {"stage_dims": [16, 16, 32, 32], "heads": [1, 1, 2, 2], "decoder_dim": 32},
      "train": {"max_epochs": 2, "patience": 1, "lr": 0.001, "batch_size": 2},
      "jpeg": {"kind": "jpeg", "levels": [100, 50]},
      "blur": {"kind": "gaussian_blur", "levels": [0, 19]},
      "ablation_seeds": 1})";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string P(const std::string& name) { return (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, HelpOnEverySubcommand) {
  EXPECT_EQ(RunCli({"--help"}).code, 0);
  for (const char* sub : {"gen-data", "pretrain-mae", "train", "eval", "robustness", "ablate"}) {
    const Result r = RunCli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--config"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << sub;
  }
}

TEST_F(CliTest, UsageErrorsAreNonZero) {
  EXPECT_NE(RunCli({}).code, 0);
  EXPECT_NE(RunCli({"frobnicate"}).code, 0);
  EXPECT_NE(RunCli({"eval", "--data", "x"}).code, 0);
}

TEST_F(CliTest, MissingInputsNameThePath) {
  const std::string ckpt = P("missing.ckpt");
  const Result r = RunCli({"eval", "--data", P("nodata"), "--checkpoint", ckpt, "--out", P("m.csv")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(ckpt), std::string::npos) << r.err;
  const Result c = RunCli({"gen-data", "--config", P("nope.json"), "--out", P("d")});
  EXPECT_NE(c.code, 0);
  EXPECT_NE(c.err.find("nope.json"), std::string::npos) << c.err;
}

TEST_F(CliTest, FullWorkflow) {
  const std::string cfg = P("tiny.json");
  ASSERT_EQ(RunCli({"gen-data", "--config", cfg, "--seed", "4", "--out", P("data")}).code, 0);
  EXPECT_TRUE(fs::exists(P("data/manifest.json")));
  EXPECT_TRUE(fs::exists(P("data/prior/manifest.json")));

  Result r = RunCli({"pretrain-mae", "--config", cfg, "--data", P("data"), "--out", P("mae.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;

  r = RunCli({"train", "--config", cfg, "--data", P("data"), "--mae", P("mae.ckpt"), "--out",
           P("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto log = Lines(P("run/train_log.csv"));
  ASSERT_GE(log.size(), 2u);
  EXPECT_EQ(log[0].rfind("epoch,l_crs,l_ref,l_total,val_iou_crs,val_iou_ref,val_f1_ref", 0), 0u);

  r = RunCli({"eval", "--data", P("data"), "--checkpoint", P("run/model.ckpt"), "--split", "val",
           "--out", P("run/metrics.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = Lines(P("run/metrics.csv"));
  ASSERT_EQ(metrics.size(), 5u);
  EXPECT_EQ(metrics[0], "image_id,iou,f1,stage");

  // The test split is empty in this config.
  r = RunCli({"eval", "--data", P("data"), "--checkpoint", P("run/model.ckpt"), "--out",
           P("run/empty.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Lines(P("run/empty.csv")).size(), 1u);

  r = RunCli({"robustness", "--config", cfg, "--data", P("data"), "--checkpoint",
           P("run/model.ckpt"), "--split", "val", "--out", P("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Lines(P("run/robustness.csv")).size(), 5u);
  EXPECT_TRUE(fs::exists(P("run/robustness_f1.svg")));

  r = RunCli({"ablate", "--config", cfg, "--data", P("data"), "--mae", P("mae.ckpt"), "--out",
           P("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ablation = Lines(P("run/ablation.csv"));
  ASSERT_EQ(ablation.size(), 5u);
  EXPECT_EQ(ablation[1].rfind("I,0,0,0,", 0), 0u);
  EXPECT_EQ(ablation[2].rfind("II,1,0,0,", 0), 0u);
  EXPECT_EQ(ablation[3].rfind("III,1,1,0,", 0), 0u);
  EXPECT_EQ(ablation[4].rfind("IV,1,1,1,", 0), 0u);
}

TEST_F(CliTest, SeedControlsData) {
  const std::string cfg = P("tiny.json");
  ASSERT_EQ(RunCli({"gen-data", "--config", cfg, "--seed", "1", "--out", P("a")}).code, 0);
  ASSERT_EQ(RunCli({"gen-data", "--config", cfg, "--seed", "1", "--out", P("b")}).code, 0);
  ASSERT_EQ(RunCli({"gen-data", "--config", cfg, "--seed", "2", "--out", P("c")}).code, 0);
  EXPECT_EQ(Lines(P("a/manifest.json")), Lines(P("b/manifest.json")));
  EXPECT_NE(Lines(P("a/manifest.json")), Lines(P("c/manifest.json")));
}

}  // namespace
}  // namespace rloop
