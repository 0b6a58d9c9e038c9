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

#include "timemoe/train/loss.h"

#include <cmath>

#include "timemoe/error.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::train {

double huber(double residual, double delta) {
  const double a = std::abs(residual);
  if (a <= delta) return 0.5 * residual * residual;
  return delta * (a - 0.5 * delta);
}

template <typename T>
std::size_t HeadTarget<T>::valid_positions() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

template <typename T>
std::vector<HeadTarget<T>> build_head_targets(std::span<const T> values,
                                              const model::SegmentLayout& layout,
                                              std::span<const int> horizons) {
  const std::size_t tokens = values.size();
  if (layout.size() != tokens) {
    throw ShapeError("build_head_targets: layout/value length mismatch");
  }
  // Last token index of each token's sequence.
  std::vector<std::size_t> seg_end(tokens);
  for (std::size_t t = tokens; t-- > 0;) {
    seg_end[t] = (t + 1 < tokens && layout.seq_ids[t + 1] == layout.seq_ids[t])
                     ? seg_end[t + 1]
                     : t;
  }
  std::vector<HeadTarget<T>> out;
  for (int p : horizons) {
    HeadTarget<T> ht;
    ht.horizon = p;
    ht.targets.assign(tokens * p, T(0));
    ht.mask.assign(tokens, 0);
    for (std::size_t t = 0; t < tokens; ++t) {
      if (t + p > seg_end[t]) continue;
      ht.mask[t] = 1;
      for (int i = 0; i < p; ++i) ht.targets[t * p + i] = values[t + 1 + i];
    }
    out.push_back(std::move(ht));
  }
  return out;
}

template <typename T>
Tensor<T> masked_huber_mean(const Tensor<T>& pred, const HeadTarget<T>& target,
                            double delta) {
  if (delta <= 0.0) throw ConfigError("Huber delta must be positive");
  const std::size_t p = static_cast<std::size_t>(target.horizon);
  if (pred.rank() != 2 || pred.dim(1) != p ||
      pred.dim(0) != target.mask.size()) {
    throw ShapeError("masked_huber_mean: prediction " +
                     num::shape_str(pred.shape()) + " vs horizon " +
                     std::to_string(p) + " over " +
                     std::to_string(target.mask.size()) + " positions");
  }
  const std::size_t valid = target.valid_positions();
  if (valid == 0) throw DataError("masked_huber_mean: every position is masked");
  const T d = static_cast<T>(delta);
  const T norm = T(1) / static_cast<T>(valid * p);
  auto P = pred.data();
  T total = T(0);
  for (std::size_t t = 0; t < target.mask.size(); ++t) {
    if (!target.mask[t]) continue;
    for (std::size_t i = 0; i < p; ++i) {
      const T r = P[t * p + i] - target.targets[t * p + i];
      const T a = std::abs(r);
      total += a <= d ? T(0.5) * r * r : d * (a - T(0.5) * d);
    }
  }
  return num::record_op<T>(
      "masked_huber", {1}, {total * norm}, {pred},
      [pred, target, d, norm, p](num::Node<T>& self) {
        auto P = pred.data();
        auto& g = pred.node()->grad;
        const T scale_factor = self.grad[0] * norm;
        for (std::size_t t = 0; t < target.mask.size(); ++t) {
          if (!target.mask[t]) continue;
          for (std::size_t i = 0; i < p; ++i) {
            const T r = P[t * p + i] - target.targets[t * p + i];
            const T dr = std::abs(r) <= d ? r : (r > T(0) ? d : -d);
            g[t * p + i] += scale_factor * dr;
          }
        }
      });
}

double aux_loss(std::span<const double> f, std::span<const double> r) {
  if (f.size() != r.size() || f.empty()) {
    throw ShapeError("aux_loss: f and r must be non-empty and equally sized");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * r[i];
  return static_cast<double>(f.size()) * acc;
}

template <typename T>
Tensor<T> aux_loss_tensor(const moe::RouterOutput<T>& routing) {
  const std::size_t n = static_cast<std::size_t>(routing.num_experts);
  std::vector<T> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = static_cast<T>(routing.stats.f[i]);
  auto r = num::mean_rows(routing.scores);
  return num::scale(num::sum(num::mul(r, Tensor<T>::from_vector({n}, std::move(f)))),
                    static_cast<T>(n));
}

template <typename T>
LossBreakdown<T> total_loss(std::span<const Tensor<T>> forecasts,
                            std::span<const HeadTarget<T>> targets,
                            std::span<const moe::RouterOutput<T>> routing,
                            double alpha, double delta) {
  if (forecasts.size() != targets.size() || forecasts.empty()) {
    throw ShapeError("total_loss: " + std::to_string(forecasts.size()) +
                     " forecasts for " + std::to_string(targets.size()) +
                     " target sets");
  }
  if (alpha < 0.0) throw ConfigError("aux-loss factor alpha must be >= 0");
  LossBreakdown<T> out;
  Tensor<T> forecast_sum;
  for (std::size_t j = 0; j < forecasts.size(); ++j) {
    if (targets[j].valid_positions() == 0) continue;
    auto l = masked_huber_mean(forecasts[j], targets[j], delta);
    forecast_sum = forecast_sum.defined() ? num::add(forecast_sum, l) : l;
    ++out.contributing_heads;
  }
  if (out.contributing_heads == 0) {
    throw DataError("degenerate batch: no head has a complete target window");
  }
  Tensor<T> total =
      num::scale(forecast_sum, T(1) / static_cast<T>(out.contributing_heads));
  out.forecast = static_cast<double>(total.item());
  if (!routing.empty()) {
    Tensor<T> aux_sum;
    for (const auto& r : routing) {
      auto a = aux_loss_tensor(r);
      aux_sum = aux_sum.defined() ? num::add(aux_sum, a) : a;
    }
    auto aux_mean = num::scale(aux_sum, T(1) / static_cast<T>(routing.size()));
    out.aux = static_cast<double>(aux_mean.item());
    if (alpha > 0.0) {
      total = num::add(total, num::scale(aux_mean, static_cast<T>(alpha)));
    }
  }
  out.total = total;
  return out;
}

#define TIMEMOE_INSTANTIATE(T)                                                 \
  template struct HeadTarget<T>;                                               \
  template std::vector<HeadTarget<T>> build_head_targets(                      \
      std::span<const T>, const model::SegmentLayout&, std::span<const int>);  \
  template Tensor<T> masked_huber_mean(const Tensor<T>&, const HeadTarget<T>&, \
                                       double);                                \
  template Tensor<T> aux_loss_tensor(const moe::RouterOutput<T>&);             \
  template LossBreakdown<T> total_loss(std::span<const Tensor<T>>,             \
                                       std::span<const HeadTarget<T>>,         \
                                       std::span<const moe::RouterOutput<T>>,  \
                                       double, double);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::train
