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

#include "timemoe/eval/metrics.h"

#include <cmath>
#include <string>

#include "timemoe/error.h"

namespace timemoe::eval {

namespace {

void check(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || a.size() != b.size()) {
    throw UsageError(std::string(what) + ": need equal non-empty inputs, got " +
                     std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
}

}  // namespace

double mse(std::span<const double> truth, std::span<const double> pred) {
  check(truth, pred, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(truth.size());
}

double mae(std::span<const double> truth, std::span<const double> pred) {
  check(truth, pred, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::abs(truth[i] - pred[i]);
  return acc / static_cast<double>(truth.size());
}

}  // namespace timemoe::eval
