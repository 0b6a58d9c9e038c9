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

// Multi-resolution output heads, greedy horizon scheduling and the
// autoregressive inference loop.

#pragma once

#include <span>
#include <vector>

#include "timemoe/numerics/tensor.h"

namespace timemoe::heads {

using num::Tensor;

template <typename T>
struct HeadParams {
  std::vector<int> horizons;
  // weights[j] is [D x horizons[j]]; bias-free.
  std::vector<Tensor<T>> weights;
};

// One [T x p_j] forecast per head from the final hidden state [T x D].
template <typename T>
std::vector<Tensor<T>> head_forward(const Tensor<T>& hidden,
                                    const HeadParams<T>& heads);

struct ForecastPlan {
  std::vector<int> picks;

  int total() const;
};

// Repeatedly takes the largest horizon that still fits. Throws UsageError for
// H < 1 and ConfigError unless horizons ascend strictly from 1.
ForecastPlan plan_horizons(int horizon, std::span<const int> horizons);

// Anything that maps a univariate context to per-head forecasts at its last
// position. The trained model is one; tests substitute stubs.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::vector<int> horizons() const = 0;
  virtual int max_context() const = 0;
  // result[j] holds horizons()[j] values following the last context point.
  virtual std::vector<std::vector<double>> predict_heads(
      std::span<const double> context) const = 0;
};

struct ForecastOptions {
  // Average, for each pick p, the first p outputs of every head whose horizon
  // is at least p instead of using head p alone.
  bool ensemble = false;
};

// Greedy-plan autoregression: each pick runs one forward pass on the current
// context and appends the chosen head's prediction. The context is a sliding
// window of at most max_context points.
std::vector<double> autoregressive_forecast(const Forecaster& model,
                                            std::span<const double> context,
                                            int horizon,
                                            const ForecastOptions& options = {});

// Channel-independent forecasting of a [T x C] context into [H x C].
Tensor<double> forecast_multivariate(const Forecaster& model,
                                     const Tensor<double>& context, int horizon,
                                     const ForecastOptions& options = {});

}  // namespace timemoe::heads
