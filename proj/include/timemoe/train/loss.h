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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "timemoe/model/layers.h"
#include "timemoe/moe/moe.h"
#include "timemoe/numerics/tensor.h"

namespace timemoe::train {

using num::Tensor;

// 0.5 r^2 for |r| <= delta, delta (|r| - delta / 2) beyond.
double huber(double residual, double delta);

// Targets for one head over a token stream: targets[t * p + i] is the value
// i + 1 steps after token t; mask[t] is set only when all p targets lie in
// token t's own sequence.
template <typename T>
struct HeadTarget {
  int horizon = 0;
  std::vector<T> targets;
  std::vector<std::uint8_t> mask;

  std::size_t valid_positions() const;
};

template <typename T>
std::vector<HeadTarget<T>> build_head_targets(std::span<const T> values,
                                              const model::SegmentLayout& layout,
                                              std::span<const int> horizons);

// Huber loss averaged over masked-in positions and the horizon.
template <typename T>
Tensor<T> masked_huber_mean(const Tensor<T>& pred, const HeadTarget<T>& target,
                            double delta);

// N * sum_i f_i r_i.
double aux_loss(std::span<const double> f, std::span<const double> r);

// Differentiable through r (the mean router scores); f is a constant.
template <typename T>
Tensor<T> aux_loss_tensor(const moe::RouterOutput<T>& routing);

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  double forecast = 0.0;  // mean over contributing heads
  double aux = 0.0;       // mean over MoE layers
  int contributing_heads = 0;
};

// mean_j masked_huber(head j) + alpha * mean_l aux(layer l). Heads with no
// complete target window in the batch are left out of the mean; a batch in
// which every head is fully masked raises DataError.
template <typename T>
LossBreakdown<T> total_loss(std::span<const Tensor<T>> forecasts,
                            std::span<const HeadTarget<T>> targets,
                            std::span<const moe::RouterOutput<T>> routing,
                            double alpha, double delta);

}  // namespace timemoe::train
