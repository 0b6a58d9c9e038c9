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

#include <algorithm>
#include <limits>
#include <numeric>

#include "timemoe/error.h"
#include "timemoe/heads/heads.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::heads {
namespace {

const std::vector<int> kHorizons = {1, 8, 32, 64};

// Fewest pieces summing to h, by dynamic programming over all amounts.
std::vector<int> min_pieces(int max_h, const std::vector<int>& parts) {
  std::vector<int> best(max_h + 1, std::numeric_limits<int>::max());
  best[0] = 0;
  for (int h = 1; h <= max_h; ++h) {
    for (int p : parts) {
      if (p <= h && best[h - p] != std::numeric_limits<int>::max()) {
        best[h] = std::min(best[h], best[h - p] + 1);
      }
    }
  }
  return best;
}

// Every head returns `value` plus its head index times `spread`.
class ConstantStub : public Forecaster {
 public:
  ConstantStub(double value, double spread = 0.0, int window = 1 << 20)
      : value_(value), spread_(spread), window_(window) {}
  std::vector<int> horizons() const override { return kHorizons; }
  int max_context() const override { return window_; }
  std::vector<std::vector<double>> predict_heads(
      std::span<const double> context) const override {
    seen.push_back(context.size());
    std::vector<std::vector<double>> out;
    for (std::size_t j = 0; j < kHorizons.size(); ++j) {
      out.emplace_back(kHorizons[j], value_ + spread_ * static_cast<double>(j));
    }
    return out;
  }
  mutable std::vector<std::size_t> seen;

 private:
  double value_, spread_;
  int window_;
};

// Predicts last value + 1 on every head.
class IncrementStub : public Forecaster {
 public:
  std::vector<int> horizons() const override { return kHorizons; }
  int max_context() const override { return 1 << 20; }
  std::vector<std::vector<double>> predict_heads(
      std::span<const double> context) const override {
    std::vector<std::vector<double>> out;
    for (int p : kHorizons) out.emplace_back(p, context.back() + 1.0);
    return out;
  }
};

TEST(PlanTest, SumsExactlyForEveryHorizon) {
  for (int h = 1; h <= 1000; ++h) {
    const auto plan = plan_horizons(h, kHorizons);
    ASSERT_EQ(plan.total(), h);
    ASSERT_EQ(std::accumulate(plan.picks.begin(), plan.picks.end(), 0), h);
    ASSERT_TRUE(std::is_sorted(plan.picks.rbegin(), plan.picks.rend()));
  }
}

TEST(PlanTest, SpotTraces) {
  EXPECT_EQ(plan_horizons(96, kHorizons).picks, (std::vector<int>{64, 32}));
  EXPECT_EQ(plan_horizons(100, kHorizons).picks, (std::vector<int>{64, 32, 1, 1, 1, 1}));
  EXPECT_EQ(plan_horizons(1, kHorizons).picks, (std::vector<int>{1}));
  EXPECT_EQ(plan_horizons(720, kHorizons).picks.size(), 11u + 1u + 1u);
}

TEST(PlanTest, GreedyIsMinimalUpTo256) {
  const auto best = min_pieces(256, kHorizons);
  for (int h = 1; h <= 256; ++h) {
    ASSERT_EQ(static_cast<int>(plan_horizons(h, kHorizons).picks.size()), best[h]) << h;
  }
}

TEST(PlanTest, InvalidInputs) {
  EXPECT_THROW(plan_horizons(0, kHorizons), UsageError);
  const std::vector<int> no_one = {8, 32};
  EXPECT_THROW(plan_horizons(10, no_one), ConfigError);
  const std::vector<int> unsorted = {1, 32, 8};
  EXPECT_THROW(plan_horizons(10, unsorted), ConfigError);
}

TEST(HeadForwardTest, ShapesAndValues) {
  auto hidden = num::Tensor<double>::from_vector({2, 2}, {1, 2, 3, 4});
  HeadParams<double> heads;
  heads.horizons = {1, 2};
  heads.weights.push_back(num::Tensor<double>::from_vector({2, 1}, {1, 1}));
  heads.weights.push_back(num::Tensor<double>::from_vector({2, 2}, {1, 0, 0, 1}));
  auto out = head_forward(hidden, heads);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].at(1, 0), 7.0);
  EXPECT_EQ(out[1].at(1, 1), 4.0);
}

TEST(AutoregressiveTest, ConstantStubRepeats) {
  ConstantStub stub(2.5);
  const std::vector<double> ctx = {1, 2, 3};
  const auto f = autoregressive_forecast(stub, ctx, 100);
  ASSERT_EQ(f.size(), 100u);
  for (double v : f) EXPECT_EQ(v, 2.5);
  // One forward pass per pick, each seeing the grown context.
  EXPECT_EQ(stub.seen, (std::vector<std::size_t>{3, 67, 99, 100, 101, 102}));
}

TEST(AutoregressiveTest, FeedsPredictionsBack) {
  IncrementStub stub;
  const std::vector<double> ctx = {0.0};
  const auto f = autoregressive_forecast(stub, ctx, 96);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(f[i], 1.0);
  for (int i = 64; i < 96; ++i) EXPECT_EQ(f[i], 2.0);
}

TEST(AutoregressiveTest, SlidingWindowCapsContext) {
  ConstantStub stub(0.0, 0.0, 50);
  const std::vector<double> ctx(40, 1.0);
  autoregressive_forecast(stub, ctx, 72);  // picks 64, 8
  EXPECT_EQ(stub.seen, (std::vector<std::size_t>{40, 50}));
}

TEST(AutoregressiveTest, EnsembleAveragesCoveringHeads) {
  ConstantStub stub(0.0, 10.0);  // heads return 0, 10, 20, 30
  const std::vector<double> ctx = {1.0};
  ForecastOptions options;
  options.ensemble = true;
  const auto f = autoregressive_forecast(stub, ctx, 96, options);
  EXPECT_EQ(f[0], 30.0);         // pick 64: head 64 only
  EXPECT_EQ(f[64], 25.0);        // pick 32: heads 32 and 64
  const auto g = autoregressive_forecast(stub, ctx, 9, options);
  EXPECT_EQ(g[0], 20.0);         // pick 8: heads 8, 32, 64
  EXPECT_EQ(g[8], 15.0);         // pick 1: all four
}

TEST(MultivariateTest, ChannelsForecastIndependently) {
  IncrementStub stub;
  auto ctx = num::Tensor<double>::from_vector({2, 3}, {0, 10, 20, 1, 11, 21});
  auto f = forecast_multivariate(stub, ctx, 9);
  ASSERT_EQ(f.shape(), (num::Shape{9, 3}));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(f.at(0, c), ctx.at(1, c) + 1.0);
    EXPECT_EQ(f.at(8, c), ctx.at(1, c) + 2.0);
  }
  EXPECT_THROW(forecast_multivariate(stub, num::Tensor<double>::zeros({4}), 3), ShapeError);
}

}  // namespace
}  // namespace timemoe::heads
