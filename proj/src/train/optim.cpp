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

#include "timemoe/train/optim.h"

#include <cmath>
#include <numbers>

#include "timemoe/error.h"

namespace timemoe::train {

template <typename T>
OptimizerState<T> OptimizerState<T>::for_params(
    std::span<const model::NamedParam<T>> params) {
  OptimizerState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.numel(), T(0));
    state.v.emplace_back(p.tensor.numel(), T(0));
  }
  return state;
}

template <typename T>
void adamw_step(std::span<const model::NamedParam<T>> params,
                OptimizerState<T>& state, double lr, const AdamWConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw_step: optimizer state tracks " +
                     std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].tensor.numel()) {
      throw ShapeError("adamw_step: moment shape mismatch for " + params[i].name);
    }
    for (T g : params[i].tensor.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in " + params[i].name +
                            "; step rejected");
      }
    }
  }
  state.step += 1;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    model::NamedParam<T> p = params[i];
    auto w = p.tensor.mutable_data();
    auto g = p.tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has_grad = !g.empty();
    const double decay = p.decay ? 1.0 - lr * config.weight_decay : 1.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has_grad ? static_cast<double>(g[j]) : 0.0;
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / c1) / (std::sqrt(vj / c2) + config.eps);
      w[j] = static_cast<T>(static_cast<double>(w[j]) * decay - lr * update);
    }
  }
}

double lr_at_step(std::int64_t step, std::int64_t warmup,
                  std::int64_t total_steps, double peak_lr) {
  if (step < 0 || step > total_steps) {
    throw UsageError("lr_at_step: step " + std::to_string(step) +
                     " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (step < warmup) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const std::int64_t span = total_steps - warmup;
  if (span <= 0) return peak_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(span);
  const double lr = peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return lr < 1e-15 * peak_lr ? 0.0 : lr;
}

template <typename T>
double clip_grad_norm(std::span<const model::NamedParam<T>> params,
                      double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (const auto& p : params) {
      model::NamedParam<T> copy = p;
      if (!copy.tensor.has_grad()) continue;
      for (auto& g : copy.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

#define TIMEMOE_INSTANTIATE(T)                                                \
  template struct OptimizerState<T>;                                          \
  template void adamw_step(std::span<const model::NamedParam<T>>,             \
                           OptimizerState<T>&, double, const AdamWConfig&);   \
  template double clip_grad_norm(std::span<const model::NamedParam<T>>,       \
                                 double);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::train
