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

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "common/test_util.h"
#include "timemoe/data/store.h"
#include "timemoe/data/synthetic.h"
#include "timemoe/error.h"
#include "timemoe/train/checkpoint.h"
#include "timemoe/train/trainer.h"

namespace timemoe::train {
namespace {

model::ModelConfig small_config() {
  auto c = testing::grad_check_config();
  c.max_context = 256;
  return c;
}

TrainConfig short_run(std::int64_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch = 2;
  t.context = 64;
  t.lr = 5e-3;
  t.warmup_steps = 1;
  t.seed = 3;
  return t;
}

data::SequenceStore sine_store(const std::filesystem::path& dir, std::size_t count = 12) {
  std::mt19937_64 rng(1);
  const auto corpus = data::synthetic_corpus(rng, count, 300, false);
  std::vector<data::StoreInput> in;
  for (const auto& s : corpus) in.push_back({s.values, s.domain});
  return data::write_store(dir, in);
}

void expect_same_params(const model::Model<float>& a, const model::Model<float>& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i].name, pb[i].name);
    ASSERT_EQ(pa[i].tensor.shape(), pb[i].tensor.shape());
    ASSERT_EQ(std::memcmp(pa[i].tensor.data().data(), pb[i].tensor.data().data(),
                          pa[i].tensor.numel() * sizeof(float)),
              0)
        << pa[i].name;
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  testing::TempDir dir("ckpt");
  auto m = model::Model<float>::initialized(small_config(), 1);
  auto opt = OptimizerState<float>::for_params(m.parameters());
  opt.step = 4;
  opt.m[0][0] = 0.25f;
  opt.v[3][1] = 1e-7f;
  save_checkpoint(dir.path() / "a.ckpt", m, &opt, 4, nlohmann::json(short_run(9)));
  auto back = load_checkpoint<float>(dir.path() / "a.ckpt");
  expect_same_params(m, back.model);
  EXPECT_EQ(back.model.config(), m.config());
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 4);
  EXPECT_EQ(back.optimizer->m, opt.m);
  EXPECT_EQ(back.optimizer->v, opt.v);
  EXPECT_EQ(back.step, 4);
  EXPECT_EQ(back.train_config.get<TrainConfig>(), short_run(9));
}

TEST(CheckpointTest, WithoutOptimizer) {
  testing::TempDir dir("ckpt");
  auto m = model::Model<float>::initialized(small_config(), 2);
  save_checkpoint<float>(dir.path() / "m.ckpt", m, nullptr, 0);
  auto back = load_checkpoint<float>(dir.path() / "m.ckpt");
  EXPECT_FALSE(back.optimizer.has_value());
  EXPECT_TRUE(back.train_config.is_null());
}

TEST(CheckpointTest, BadMagicVersionAndTruncation) {
  testing::TempDir dir("ckpt");
  auto m = model::Model<float>::initialized(small_config(), 2);
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint<float>(path, m, nullptr, 0);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  auto bad = bytes;
  bad[0] = 'X';
  write(bad);
  EXPECT_THROW(read_checkpoint_file(path), FormatError);
  bad = bytes;
  bad[4] = 9;
  write(bad);
  EXPECT_THROW(read_checkpoint_file(path), FormatError);
  write(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint_file(path), FormatError);
  write(bytes.substr(0, 10));
  EXPECT_THROW(read_checkpoint_file(path), FormatError);
}

TEST(CheckpointTest, MissingTensorIsFormatError) {
  testing::TempDir dir("ckpt");
  auto m = model::Model<float>::initialized(small_config(), 2);
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint<float>(path, m, nullptr, 0);
  auto file = read_checkpoint_file(path);
  file.tensors.pop_back();
  write_checkpoint_file(path, file);
  EXPECT_THROW(load_checkpoint<float>(path), FormatError);
  file = read_checkpoint_file(path);
  file.tensors.front().dims = {8, 1};  // right size, wrong shape
  write_checkpoint_file(path, file);
  EXPECT_THROW(load_checkpoint<float>(path), FormatError);
}

TEST(TrainConfigTest, JsonRoundTripAndValidation) {
  TrainConfig t = short_run(17);
  t.domain_weights = {{"a", 0.9}, {"b", 0.1}};
  nlohmann::json j = t;
  EXPECT_EQ(j.get<TrainConfig>(), t);
  j["learning_rate"] = 1.0;
  EXPECT_THROW(j.get<TrainConfig>(), ConfigError);
  TrainConfig bad;
  bad.beta2 = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.alpha = -0.1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainerTest, ResumeEqualsUninterrupted) {
  testing::TempDir dir("resume");
  const auto store = sine_store(dir.path() / "store");
  const auto cfg = short_run(2);
  auto init = model::Model<float>::initialized(small_config(), 5);

  Trainer<float> straight(init.clone(), cfg);
  straight.run(store);
  ASSERT_EQ(straight.steps_done(), 2);

  Trainer<float> first(init.clone(), cfg);
  first.step(first.batch_for_step(store, 0).stream());
  first.save(dir.path() / "half.ckpt");
  auto resumed = Trainer<float>::resume(load_checkpoint<float>(dir.path() / "half.ckpt"), cfg);
  EXPECT_EQ(resumed.steps_done(), 1);
  resumed.run(store);
  EXPECT_EQ(resumed.steps_done(), 2);
  expect_same_params(straight.model(), resumed.model());
  EXPECT_EQ(straight.optimizer().m, resumed.optimizer().m);
}

TEST(TrainerTest, SeedChangesTrajectory) {
  testing::TempDir dir("seed");
  const auto store = sine_store(dir.path() / "store");
  auto init = model::Model<float>::initialized(small_config(), 5);
  auto a_cfg = short_run(2), b_cfg = short_run(2);
  b_cfg.seed = 4;
  Trainer<float> a(init.clone(), a_cfg), b(init.clone(), b_cfg);
  a.run(store);
  b.run(store);
  EXPECT_NE(a.model().params().embed_w.at(0), b.model().params().embed_w.at(0));
}

TEST(TrainerTest, ResumeRejectsIncompatibleCheckpoints) {
  testing::TempDir dir("compat");
  const auto store = sine_store(dir.path() / "store");
  auto cfg = short_run(3);
  Trainer<float> t(model::Model<float>::initialized(small_config(), 5), cfg);
  t.step(t.batch_for_step(store, 0).stream());
  t.save(dir.path() / "t.ckpt");
  auto other = cfg;
  other.lr *= 2;
  EXPECT_THROW(Trainer<float>::resume(load_checkpoint<float>(dir.path() / "t.ckpt"), other),
               CompatibilityError);
  auto periodic = cfg;
  periodic.checkpoint_every = 1;  // only the checkpoint cadence changed
  EXPECT_NO_THROW(
      Trainer<float>::resume(load_checkpoint<float>(dir.path() / "t.ckpt"), periodic));
  save_checkpoint<float>(dir.path() / "bare.ckpt", t.model(), nullptr, 1,
                         nlohmann::json(cfg));
  EXPECT_THROW(Trainer<float>::resume(load_checkpoint<float>(dir.path() / "bare.ckpt"), cfg),
               CompatibilityError);
  save_checkpoint<float>(dir.path() / "nocfg.ckpt", t.model(), &t.optimizer(), 1);
  EXPECT_THROW(Trainer<float>::resume(load_checkpoint<float>(dir.path() / "nocfg.ckpt"), cfg),
               CompatibilityError);
}

TEST(TrainerTest, PeriodicCheckpointsAndMetrics) {
  testing::TempDir dir("periodic");
  const auto store = sine_store(dir.path() / "store");
  auto cfg = short_run(4);
  cfg.checkpoint_every = 2;
  Trainer<float> t(model::Model<float>::initialized(small_config(), 5), cfg);
  std::vector<StepMetrics> seen;
  t.run(store, [&](const StepMetrics& m) { seen.push_back(m); }, dir.path() / "run.ckpt");
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_EQ(seen[0].step, 1);
  EXPECT_EQ(seen[0].lr, 0.0);  // first update sits at the warmup start
  EXPECT_GT(seen[1].lr, 0.0);
  for (const auto& m : seen) {
    EXPECT_TRUE(std::isfinite(m.loss));
    EXPECT_NEAR(m.loss, m.loss_ar + cfg.alpha * m.loss_aux, 1e-5);
    EXPECT_EQ(m.f.size(), 2u);
    EXPECT_LE(m.f_min, m.f_max);
    const auto j = m.to_json();
    for (const char* key : {"step", "lr", "loss", "loss_ar", "loss_aux", "f_min", "f_max"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
  }
  EXPECT_EQ(load_checkpoint<float>(dir.path() / "run.ckpt").step, 4);
}

TEST(TrainerTest, DenseModelReportsNoRouting) {
  testing::TempDir dir("dense");
  const auto store = sine_store(dir.path() / "store");
  auto mc = small_config();
  mc.use_moe = false;
  Trainer<float> t(model::Model<float>::initialized(mc, 5), short_run(1));
  const auto m = t.step(t.batch_for_step(store, 0).stream());
  EXPECT_TRUE(std::isnan(m.f_gap()));
  EXPECT_TRUE(m.to_json()["f_min"].is_null());
}

TEST(TrainerTest, LossHalvesOnLearnableSinusoid) {
  testing::TempDir dir("learn");
  const auto store = sine_store(dir.path() / "store", 32);
  auto cfg = short_run(200);
  cfg.batch = 4;
  cfg.context = 128;
  cfg.warmup_steps = 10;
  model::ModelConfig mc;  // two layers, D = 32, N = 4, K = 2
  mc.max_context = 256;
  auto init = model::Model<float>::initialized(mc, 6);
  // Same held-out stream before and after.
  std::mt19937_64 rng(99);
  const auto held_out = data::sample_batch(store, rng, 4, 128).stream();
  const double before = evaluate_loss(init, held_out, 0.0, 1.0).loss_ar;
  Trainer<float> t(init.clone(), cfg);
  t.run(store);
  const double after = evaluate_loss(t.model(), held_out, 0.0, 1.0).loss_ar;
  EXPECT_LT(after, 0.5 * before) << before << " -> " << after;
}

}  // namespace
}  // namespace timemoe::train
