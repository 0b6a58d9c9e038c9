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
#include <random>

#include "common/test_util.h"
#include "timemoe/error.h"
#include "timemoe/model/model.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::model {
namespace {

std::int64_t allocated(const ModelConfig& c) {
  Model<float> m(c);
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += static_cast<std::int64_t>(p.tensor.numel());
  return n;
}

std::vector<double> flat(const ForwardResult<double>& r) {
  std::vector<double> out;
  for (const auto& f : r.forecasts) out.insert(out.end(), f.data().begin(), f.data().end());
  return out;
}

TEST(ConfigTest, RejectsBadShapes) {
  ModelConfig c;
  c.top_k = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.head_horizons = {2, 8};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.d_model = 30;  // d_head 15 is odd
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigTest, JsonRoundTripAndUnknownKey) {
  ModelConfig c = base_config();
  nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
  j["d_modle"] = 3;
  EXPECT_THROW(j.get<ModelConfig>(), ConfigError);
}

TEST(CountParamsTest, MatchesAllocation) {
  ModelConfig moe = testing::grad_check_config();
  ModelConfig dense = moe;
  dense.use_moe = false;
  ModelConfig bare = moe;
  bare.shared_expert = false;
  for (const auto& c : {moe, dense, bare, ModelConfig{}}) {
    EXPECT_EQ(count_params(c).total, allocated(c));
  }
}

TEST(CountParamsTest, TinyHandCount) {
  // embed 2*8; per layer: norms 16, attention 4*64 + 24, router 8*5,
  // five experts of 3*8*16; final norm 8; heads 8*(1+8+32+64).
  const std::int64_t layer = 16 + 280 + 40 + 5 * 384;
  const auto count = count_params(testing::grad_check_config());
  EXPECT_EQ(count.total, 16 + 2 * layer + 8 + 840);
  EXPECT_EQ(count.total, 5376);
  EXPECT_EQ(count.activated, 5376 - 2 * 2 * 384);
}

TEST(CountParamsTest, AllExpertsActiveWhenKEqualsN) {
  ModelConfig c = testing::grad_check_config();
  c.top_k = c.num_experts;
  const auto count = count_params(c);
  EXPECT_EQ(count.total, count.activated);
}

TEST(CountParamsTest, BaseConfigReported) {
  const auto count = count_params(base_config());
  const double total_ratio = count.total / 113e6;
  const double active_ratio = count.activated / 50e6;
  RecordProperty("base_total", std::to_string(count.total));
  RecordProperty("base_activated", std::to_string(count.activated));
  std::printf("base: total %lld (%.3fx of 113M), activated %lld (%.3fx of 50M)\n",
              static_cast<long long>(count.total), total_ratio,
              static_cast<long long>(count.activated), active_ratio);
  EXPECT_GT(count.total, count.activated);
}

TEST(FlopsTest, SparseBelowDenseWhenRoutedWidthIsSmaller) {
  ModelConfig moe;
  ModelConfig dense = moe;
  dense.use_moe = false;
  dense.d_ff = 98;
  ASSERT_LT(moe.top_k * moe.d_expert, dense.d_ff);
  EXPECT_LT(flops_per_token(moe, 256), flops_per_token(dense, 256));
  EXPECT_DOUBLE_EQ(flops_per_token(moe, 256),
                   2.0 * count_params(moe).activated + 4.0 * 2 * 256 * 32);
}

TEST(BlockTest, ZeroWeightsPassResidualThrough) {
  ModelConfig c = testing::grad_check_config();
  Model<double> m(c);
  std::mt19937_64 rng(1);
  auto x = testing::random_series(rng, 10 * 8);
  HiddenState<double> h{num::Tensor<double>::from_vector({10, 8}, x), 0};
  auto out = block_forward(h, m.params().layers[0], c, SegmentLayout::single(10));
  EXPECT_EQ(out.layer_index, 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(out.values.at(i), x[i]);
}

TEST(BlockTest, DenseEqualsSingleExpertMoe) {
  ModelConfig dense = testing::grad_check_config();
  dense.use_moe = false;
  ModelConfig moe = dense;
  moe.use_moe = true;
  moe.num_experts = 1;
  moe.top_k = 1;
  moe.shared_expert = false;
  moe.d_expert = dense.d_ff;
  auto a = Model<double>::initialized(dense, 4);
  auto b = Model<double>::initialized(moe, 5);
  // Share everything except the FFN; the lone expert takes the dense weights.
  auto& la = a.mutable_params().layers[0];
  auto& lb = b.mutable_params().layers[0];
  lb.attn = la.attn;
  lb.attn_norm = la.attn_norm;
  lb.ffn_norm = la.ffn_norm;
  lb.mixture.experts[0] = la.dense;
  std::mt19937_64 rng(2);
  auto x = testing::random_series(rng, 12 * 8);
  HiddenState<double> h{num::Tensor<double>::from_vector({12, 8}, x), 0};
  const auto layout = SegmentLayout::single(12);
  moe::RouterOutput<double> routing;
  auto ya = block_forward(h, la, dense, layout);
  auto yb = block_forward(h, lb, moe, layout, &routing);
  for (std::size_t t = 0; t < 12; ++t) EXPECT_EQ(routing.gates.at(t, 0), 1.0);
  for (std::size_t i = 0; i < ya.values.numel(); ++i) {
    EXPECT_NEAR(ya.values.at(i), yb.values.at(i), 1e-5);
  }
}

class ModelForwardTest : public ::testing::Test {
 protected:
  ModelForwardTest() : model_(Model<double>::initialized(testing::grad_check_config(), 7)) {}
  Model<double> model_;
};

TEST_F(ModelForwardTest, ShapesPerHead) {
  std::mt19937_64 rng(3);
  auto x = testing::random_series(rng, 40);
  auto r = model_.forward(x);
  ASSERT_EQ(r.forecasts.size(), 4u);
  const std::vector<std::size_t> p = {1, 8, 32, 64};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(r.forecasts[j].shape(), (num::Shape{40, p[j]}));
  }
  EXPECT_EQ(r.routing.size(), 2u);
  EXPECT_EQ(r.hidden.shape(), (num::Shape{40, 8}));
}

TEST_F(ModelForwardTest, CausalBitIdentical) {
  std::mt19937_64 rng(4);
  auto x = testing::random_series(rng, 48);
  num::NoGradGuard guard;
  auto base = model_.forward(x);
  for (std::size_t t : {0u, 10u, 30u, 46u}) {
    auto y = x;
    y[t + 1] += 3.0;
    auto r = model_.forward(y);
    for (std::size_t j = 0; j < base.forecasts.size(); ++j) {
      const std::size_t p = base.forecasts[j].dim(1);
      for (std::size_t i = 0; i < (t + 1) * p; ++i) {
        ASSERT_EQ(r.forecasts[j].at(i), base.forecasts[j].at(i)) << "t=" << t;
      }
    }
  }
}

TEST_F(ModelForwardTest, PackedSequencesAreIsolated) {
  std::mt19937_64 rng(5);
  auto x = testing::random_series(rng, 60);
  std::vector<std::int32_t> ids(60, 0);
  for (std::size_t i = 20; i < 45; ++i) ids[i] = 1;
  for (std::size_t i = 45; i < 60; ++i) ids[i] = 2;
  const auto layout = SegmentLayout::from_seq_ids(ids);
  num::NoGradGuard guard;
  auto base = model_.forward(x, layout);
  auto zeroed = x;
  for (std::size_t i = 20; i < 45; ++i) zeroed[i] = 0.0;
  auto r = model_.forward(zeroed, layout);
  for (std::size_t j = 0; j < base.forecasts.size(); ++j) {
    const std::size_t p = base.forecasts[j].dim(1);
    for (std::size_t t = 0; t < 60; ++t) {
      if (ids[t] == 1) continue;
      for (std::size_t i = 0; i < p; ++i) {
        ASSERT_EQ(r.forecasts[j].at(t * p + i), base.forecasts[j].at(t * p + i));
      }
    }
  }
  // The last segment also matches an unpacked run of the same values.
  std::vector<double> tail(x.begin() + 45, x.end());
  auto alone = model_.forward(tail);
  for (std::size_t t = 0; t < 15; ++t) {
    EXPECT_NEAR(alone.forecasts[3].at(t * 64), base.forecasts[3].at((45 + t) * 64), 1e-12);
  }
}

TEST_F(ModelForwardTest, FiniteUpToMaxContext) {
  std::mt19937_64 rng(6);
  auto x = testing::random_series(rng, 512, 10.0);
  num::NoGradGuard guard;
  for (double v : flat(model_.forward(x))) ASSERT_TRUE(std::isfinite(v));
  x.push_back(0.0);
  EXPECT_THROW(model_.forward(x), UsageError);
}

TEST_F(ModelForwardTest, CloneIsDeepCopyIsShallow) {
  auto copy = model_;
  auto deep = model_.clone();
  copy.mutable_params().embed_w.mutable_data()[0] += 1.0;
  EXPECT_EQ(copy.params().embed_w.at(0), model_.params().embed_w.at(0));
  EXPECT_NE(deep.params().embed_w.at(0), model_.params().embed_w.at(0));
}

TEST(InitTest, ReproducibleFromSeed) {
  auto a = Model<float>::initialized(testing::grad_check_config(), 9);
  auto b = Model<float>::initialized(testing::grad_check_config(), 9);
  auto c = Model<float>::initialized(testing::grad_check_config(), 10);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i].name, pb[i].name);
    for (std::size_t k = 0; k < pa[i].tensor.numel(); ++k) {
      ASSERT_EQ(pa[i].tensor.at(k), pb[i].tensor.at(k));
      differs |= pa[i].tensor.at(k) != pc[i].tensor.at(k);
      // Truncated at two standard deviations.
      const double bound = pa[i].name.rfind("embed.", 0) == 0 ? 2.0 : 0.04;
      if (pa[i].tensor.rank() == 2) ASSERT_LE(std::abs(pa[i].tensor.at(k)), bound + 1e-6);
    }
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace timemoe::model
