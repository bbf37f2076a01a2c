/*
 * Copyright 2026 The duonav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = DUONAV_CLI_PATH;
const fs::path kTiny = fs::path(DUONAV_SOURCE_DIR) / "configs" / "tiny.toml";

/// Runs the CLI from the parent of `root` with DUONAV_DATA_ROOT pointing at
/// `root`; returns the exit code.
int run(const fs::path& root, const std::string& args) {
  const std::string cmd = "cd '" + root.parent_path().string() + "' && DUONAV_DATA_ROOT='" + root.string() + "' '" + kCli.string() + "' " + args + " > '" +
                          (root.parent_path() / "last.log").string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    base_ = fs::temp_directory_path() / ("duonav_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(base_);
    root_ = base_ / "data";
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(base_); }

  std::string tiny(const std::string& cmd) const { return cmd + " --config '" + kTiny.string() + "'"; }
  int make_data() {
    const int a = run(root_, tiny("gen-world"));
    return a ? a : run(root_, tiny("gen-data"));
  }

  fs::path base_, root_;
};

}  // namespace

TEST_F(Cli, FullPipeline) {
  ASSERT_EQ(make_data(), 0);
  for (const char* f : {"world.json", "train.jsonl", "val_seen.jsonl", "val_unseen.jsonl"})
    EXPECT_TRUE(fs::exists(root_ / f)) << f;
  const auto pre = base_ / "pre", ft = base_ / "ft", rep = base_ / "rep";
  ASSERT_EQ(run(root_, tiny("pretrain") + " --out '" + pre.string() + "'"), 0);
  EXPECT_TRUE(fs::exists(pre / "model.ckpt"));
  EXPECT_TRUE(fs::exists(pre / "loss.csv"));
  ASSERT_EQ(run(root_, tiny("finetune") + " --init '" + (pre / "model.ckpt").string() + "' --regime mt --out '" +
                           ft.string() + "'"),
            0);
  const std::string ck = " --checkpoint '" + (ft / "model.ckpt").string() + "'";
  EXPECT_EQ(run(root_, tiny("follow") + ck + " --split val_unseen --record 0"), 0);
  EXPECT_EQ(run(root_, tiny("describe") + ck + " --split val_unseen --record 0 --prefix"), 0);
  ASSERT_EQ(run(root_, tiny("evaluate") + ck + " --split val_unseen --baseline --out '" + rep.string() + "'"), 0);
  for (const char* f : {"val_unseen_follow.json", "val_unseen_follow.csv", "val_unseen_generate.json",
                        "val_unseen_random.json"})
    EXPECT_TRUE(fs::exists(rep / f)) << f;
  EXPECT_NE(slurp(rep / "val_unseen_follow.json").find("\"sr\""), std::string::npos);
}

TEST_F(Cli, SameSeedSameArtifacts) {
  ASSERT_EQ(make_data(), 0);
  const auto world = slurp(root_ / "world.json");
  const auto train = slurp(root_ / "train.jsonl");
  ASSERT_EQ(make_data(), 0);
  EXPECT_EQ(slurp(root_ / "world.json"), world);
  EXPECT_EQ(slurp(root_ / "train.jsonl"), train);
  ASSERT_EQ(run(root_, tiny("pretrain") + " --out '" + (base_ / "a").string() + "'"), 0);
  ASSERT_EQ(run(root_, tiny("pretrain") + " --out '" + (base_ / "b").string() + "'"), 0);
  EXPECT_EQ(slurp(base_ / "a" / "model.ckpt"), slurp(base_ / "b" / "model.ckpt"));
  ASSERT_EQ(run(root_, tiny("gen-world") + " --seed 5 --out '" + (base_ / "w5").string() + "'"), 0);
  EXPECT_NE(slurp(base_ / "w5" / "world.json"), world);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run(root_, tiny("gen-world") + " --set world.bogus=1"), 2);
  EXPECT_EQ(run(root_, "gen-world --config '" + (base_ / "none.toml").string() + "'"), 2);
  EXPECT_EQ(run(root_, "no-such-command"), 2);
  ASSERT_EQ(make_data(), 0);
  EXPECT_EQ(run(root_, tiny("finetune")), 2);
  EXPECT_EQ(run(root_, tiny("finetune") + " --init x --regime both"), 2);
  EXPECT_EQ(run(root_, tiny("gradcheck") + " --order 3"), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  EXPECT_EQ(run(root_, tiny("gen-data")), 3);
  ASSERT_EQ(make_data(), 0);
  {
    std::ofstream(root_ / "train.jsonl", std::ios::app) << "{\"graph\": \n";
  }
  EXPECT_EQ(run(root_, tiny("pretrain") + " --out '" + (base_ / "p").string() + "'"), 3);
  EXPECT_EQ(run(root_, tiny("evaluate") + " --checkpoint '" + (base_ / "missing.ckpt").string() + "'"), 3);
}

TEST_F(Cli, NumericFailuresExitFour) {
  ASSERT_EQ(make_data(), 0);
  EXPECT_EQ(run(root_, tiny("pretrain") + " --set pretrain.lr=1e30 --out '" + (base_ / "p").string() + "'"), 4);
  EXPECT_EQ(run(root_, "gradcheck --tolerance 1e-300 --max-entries 1"), 4);
}

TEST_F(Cli, GradcheckPasses) { EXPECT_EQ(run(root_, "gradcheck --max-entries 2"), 0); }
