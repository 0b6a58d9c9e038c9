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

#include "timemoe/data/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "timemoe/error.h"

namespace timemoe::data {

std::vector<double> sinusoid_mixture(std::mt19937_64& rng, std::size_t length,
                                     const SinusoidSpec& spec) {
  if (spec.components < 1 ||
      static_cast<std::size_t>(spec.components) > spec.periods.size()) {
    throw ConfigError("sinusoid_mixture: components must be in [1, #periods]");
  }
  std::vector<double> periods = spec.periods;
  std::shuffle(periods.begin(), periods.end(), rng);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  std::vector<double> out(length, 0.0);
  for (int c = 0; c < spec.components; ++c) {
    const double a = amp(rng), ph = phase(rng), w = 2.0 * std::numbers::pi / periods[c];
    for (std::size_t t = 0; t < length; ++t) out[t] += a * std::sin(w * t + ph);
  }
  if (spec.noise_std > 0.0)
    for (auto& x : out) x += noise(rng);
  return out;
}

std::vector<double> regime_series(std::mt19937_64& rng, std::size_t length,
                                  int regime) {
  std::uniform_real_distribution<double> period_dist(16.0, 48.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);
  const double period = period_dist(rng);
  const double shift = unit(rng) * period;
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double phase = std::fmod(t + shift, period) / period;  // [0, 1)
    double x = 0.0;
    switch (regime) {
      case 0: x = std::sin(2.0 * std::numbers::pi * phase); break;
      case 1: x = phase < 0.5 ? 1.0 : -1.0; break;
      case 2: x = 2.0 * phase - 1.0; break;
      default: throw UsageError("regime_series: regime must be 0, 1 or 2");
    }
    out[t] = x + noise(rng);
  }
  return out;
}

std::vector<RawSeries> synthetic_corpus(std::mt19937_64& rng, std::size_t count,
                                        std::size_t length, bool regimes,
                                        const SinusoidSpec& spec) {
  std::vector<RawSeries> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (regimes) {
      const int r = static_cast<int>(i % 3);
      out.push_back({regime_series(rng, length, r), "regime" + std::to_string(r), ""});
    } else {
      out.push_back({sinusoid_mixture(rng, length, spec), "sine", ""});
    }
  }
  return out;
}

}  // namespace timemoe::data
