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

#include "timemoe/heads/heads.h"

#include <algorithm>
#include <numeric>

#include "timemoe/error.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::heads {

template <typename T>
std::vector<Tensor<T>> head_forward(const Tensor<T>& hidden,
                                    const HeadParams<T>& heads) {
  if (heads.weights.size() != heads.horizons.size()) {
    throw ShapeError("head_forward: " + std::to_string(heads.weights.size()) +
                     " weight matrices for " +
                     std::to_string(heads.horizons.size()) + " horizons");
  }
  std::vector<Tensor<T>> out;
  out.reserve(heads.weights.size());
  for (const auto& w : heads.weights) out.push_back(num::matmul(hidden, w));
  return out;
}

int ForecastPlan::total() const {
  return std::accumulate(picks.begin(), picks.end(), 0);
}

ForecastPlan plan_horizons(int horizon, std::span<const int> horizons) {
  if (horizon < 1) {
    throw UsageError("forecast horizon must be at least 1, got " +
                     std::to_string(horizon));
  }
  if (horizons.empty() || horizons.front() != 1) {
    throw ConfigError("head horizons must start with 1");
  }
  for (std::size_t i = 1; i < horizons.size(); ++i) {
    if (horizons[i] <= horizons[i - 1]) {
      throw ConfigError("head horizons must be strictly ascending");
    }
  }
  ForecastPlan plan;
  int covered = 0;
  while (covered < horizon) {
    for (auto it = horizons.rbegin(); it != horizons.rend(); ++it) {
      if (covered + *it <= horizon) {
        covered += *it;
        plan.picks.push_back(*it);
        break;
      }
    }
  }
  return plan;
}

std::vector<double> autoregressive_forecast(const Forecaster& model,
                                            std::span<const double> context,
                                            int horizon,
                                            const ForecastOptions& options) {
  if (context.empty()) throw UsageError("autoregressive_forecast: empty context");
  const std::vector<int> horizons = model.horizons();
  const ForecastPlan plan = plan_horizons(horizon, horizons);
  const std::size_t window = static_cast<std::size_t>(model.max_context());

  std::vector<double> series(context.begin(), context.end());
  std::vector<double> forecast;
  forecast.reserve(horizon);
  for (int pick : plan.picks) {
    const std::size_t begin = series.size() > window ? series.size() - window : 0;
    auto heads_out = model.predict_heads(
        std::span<const double>(series.data() + begin, series.size() - begin));
    std::vector<double> step(pick, 0.0);
    if (options.ensemble) {
      int members = 0;
      for (std::size_t j = 0; j < horizons.size(); ++j) {
        if (horizons[j] < pick) continue;
        for (int i = 0; i < pick; ++i) step[i] += heads_out[j][i];
        ++members;
      }
      for (auto& v : step) v /= members;
    } else {
      auto it = std::find(horizons.begin(), horizons.end(), pick);
      const auto& chosen = heads_out[it - horizons.begin()];
      std::copy_n(chosen.begin(), pick, step.begin());
    }
    series.insert(series.end(), step.begin(), step.end());
    forecast.insert(forecast.end(), step.begin(), step.end());
  }
  return forecast;
}

Tensor<double> forecast_multivariate(const Forecaster& model,
                                     const Tensor<double>& context, int horizon,
                                     const ForecastOptions& options) {
  if (context.rank() != 2 || context.dim(1) == 0) {
    throw ShapeError("forecast_multivariate expects a [T x C] context, got " +
                     num::shape_str(context.shape()));
  }
  const std::size_t rows = context.dim(0), channels = context.dim(1);
  const std::size_t h = static_cast<std::size_t>(std::max(horizon, 0));
  std::vector<double> out(h * channels);
  std::vector<double> column(rows);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < rows; ++t) column[t] = context.at(t, c);
    auto pred = autoregressive_forecast(model, column, horizon, options);
    for (std::size_t t = 0; t < h; ++t) out[t * channels + c] = pred[t];
  }
  return Tensor<double>::from_vector({h, channels}, std::move(out));
}

template std::vector<Tensor<float>> head_forward(const Tensor<float>&,
                                                 const HeadParams<float>&);
template std::vector<Tensor<double>> head_forward(const Tensor<double>&,
                                                  const HeadParams<double>&);

}  // namespace timemoe::heads
