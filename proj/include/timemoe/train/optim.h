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

#include "timemoe/model/model.h"

namespace timemoe::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

template <typename T>
struct OptimizerState {
  std::int64_t step = 0;
  // Parallel to the parameter list the state was created for.
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static OptimizerState for_params(std::span<const model::NamedParam<T>> params);
};

// One bias-corrected AdamW update. Decay (w <- w (1 - lr wd)) is applied
// before the Adam step and only to parameters flagged `decay`. A non-finite
// gradient rejects the whole step with TrainingError and leaves every
// parameter and moment untouched. Parameters without a gradient count as
// zero-gradient.
template <typename T>
void adamw_step(std::span<const model::NamedParam<T>> params,
                OptimizerState<T>& state, double lr, const AdamWConfig& config);

// Linear warmup to peak_lr, then cosine annealing to 0 at total_steps.
double lr_at_step(std::int64_t step, std::int64_t warmup,
                  std::int64_t total_steps, double peak_lr);

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
template <typename T>
double clip_grad_norm(std::span<const model::NamedParam<T>> params,
                      double max_norm);

}  // namespace timemoe::train
