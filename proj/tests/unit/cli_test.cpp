/* Copyright 2026 The TimeMoE Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "common/test_util.h"
#include "json.hpp"
#include "timemoe/data/csv.h"
#include "timemoe/data/store.h"
#include "timemoe/model/model.h"
#include "timemoe/train/checkpoint.h"

namespace timemoe {
namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr together
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(TIMEMOE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

TEST(CliTest, ParamsBase) {
  const auto r = cli("params --config base");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto c = model::count_params(model::base_config());
  EXPECT_EQ(r.out, "total: " + std::to_string(c.total) + "\nactivated: " +
                       std::to_string(c.activated) + "\n");
  const auto tiny = cli(std::string("params --config ") + TIMEMOE_CONFIG_DIR + "/tiny.json");
  EXPECT_EQ(tiny.code, 0) << tiny.out;
}

TEST(CliTest, UnknownFlagFails) {
  EXPECT_NE(cli("params --config base --frobnicate").code, 0);
  EXPECT_NE(cli("nonsense").code, 0);
}

TEST(CliTest, LibraryErrorsExitWithTwo) {
  testing::TempDir dir("cli");
  write_file(dir.path() / "bad.json", R"({"model": {"d_model": 30}})");
  const auto r = cli("params --config " + q(dir.path() / "bad.json"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("error:"), std::string::npos);
}

TEST(CliTest, CleanAllNanWarnsAndWritesEmptyStore) {
  testing::TempDir dir("cli");
  std::string text = "value\n";
  for (int i = 0; i < 50; ++i) text += "nan\n";
  write_file(dir.path() / "raw.csv", text);
  const auto r = cli("clean " + q(dir.path() / "raw.csv") + " " + q(dir.path() / "out"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("warning"), std::string::npos) << r.out;
  EXPECT_TRUE(data::SequenceStore::open(dir.path() / "out", "clean").empty());
}

TEST(CliTest, CleanPackTrainForecastEval) {
  testing::TempDir dir("cli");
  // Two channels with gaps; one survives cleaning in two pieces.
  std::mt19937_64 rng(1);
  std::ostringstream raw;
  raw << "date,a,b\n";
  for (int i = 0; i < 900; ++i) {
    raw << "t" << i << "," << (i == 400 ? std::string("") : std::to_string(std::sin(i * 0.2)))
        << "," << std::cos(i * 0.05) + 0.01 * testing::random_series(rng, 1)[0] << "\n";
  }
  write_file(dir.path() / "raw.csv", raw.str());
  auto r = cli("clean " + q(dir.path() / "raw.csv") + " " + q(dir.path() / "clean") +
               " --domain toy");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto counts = nlohmann::json::parse(r.out);
  EXPECT_EQ(counts["sequences"], 3);

  r = cli("pack " + q(dir.path() / "clean") + " " + q(dir.path() / "store"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(data::SequenceStore::open(dir.path() / "store").size(), 3u);

  model::ModelConfig mc;
  mc.d_model = 8;
  mc.d_ff = 16;
  mc.d_expert = 8;
  mc.max_context = 256;
  nlohmann::json cfg = {{"model", mc},
                        {"train", {{"steps", 3}, {"batch", 2}, {"context", 64},
                                   {"warmup_steps", 1}, {"checkpoint_every", 2}}}};
  write_file(dir.path() / "cfg.json", cfg.dump());
  r = cli("--seed 4 train --config " + q(dir.path() / "cfg.json") + " --store " +
          q(dir.path() / "store") + " --out " + q(dir.path() / "m.ckpt") + " --metrics " +
          q(dir.path() / "log.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream log(dir.path() / "log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    EXPECT_TRUE(nlohmann::json::parse(line).contains("loss_aux"));
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(train::load_checkpoint<float>(dir.path() / "m.ckpt").step, 3);

  std::ostringstream ctx;
  ctx << "date,x,y\n";
  for (int i = 0; i < 120; ++i) ctx << "t" << i << "," << std::sin(i * 0.2) << "," << i << "\n";
  write_file(dir.path() / "ctx.csv", ctx.str());
  r = cli("forecast --ckpt " + q(dir.path() / "m.ckpt") + " --input " +
          q(dir.path() / "ctx.csv") + " --horizon 96 --out " + q(dir.path() / "f.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto f = data::load_csv(dir.path() / "f.csv");
  EXPECT_EQ(f.rows, 96u);
  EXPECT_EQ(f.columns, (std::vector<std::string>{"x", "y"}));

  nlohmann::json spec = {{"dataset", (dir.path() / "ctx.csv").string()},
                         {"horizons", {8}}, {"contexts", {32}}, {"stride", 4}};
  write_file(dir.path() / "spec.json", spec.dump());
  r = cli("eval --ckpt " + q(dir.path() / "m.ckpt") + " --spec " + q(dir.path() / "spec.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report["rows"].size(), 1u);
  EXPECT_EQ(report["meta"]["model_hash"].get<std::string>().size(), 16u);

  // Resuming a finished run with a different schedule is refused.
  cfg["train"]["lr"] = 0.1;
  write_file(dir.path() / "cfg2.json", cfg.dump());
  r = cli("--seed 4 train --config " + q(dir.path() / "cfg2.json") + " --store " +
          q(dir.path() / "store") + " --out " + q(dir.path() / "m2.ckpt") + " --resume " +
          q(dir.path() / "m.ckpt"));
  EXPECT_EQ(r.code, 2) << r.out;
}

}  // namespace
}  // namespace timemoe
