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

// Synthetic series used by the smoke tests, the bench mode and the examples.

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "timemoe/data/clean.h"

namespace timemoe::data {

struct SinusoidSpec {
  std::vector<double> periods = {12.0, 24.0, 48.0, 96.0};
  int components = 2;     // distinct periods mixed per series
  double noise_std = 0.05;
};

// Sum of `components` sines with periods drawn from spec.periods, random
// phases and amplitudes in [0.5, 1.5], plus Gaussian noise.
std::vector<double> sinusoid_mixture(std::mt19937_64& rng, std::size_t length,
                                     const SinusoidSpec& spec = {});

// Regime 0: smooth sinusoid. Regime 1: square wave with random period.
// Regime 2: sawtooth with random period. All with light noise.
std::vector<double> regime_series(std::mt19937_64& rng, std::size_t length,
                                  int regime);

// `count` series, domains "regime0".."regime2" when regimes is set,
// otherwise "sine".
std::vector<RawSeries> synthetic_corpus(std::mt19937_64& rng, std::size_t count,
                                        std::size_t length, bool regimes,
                                        const SinusoidSpec& spec = {});

}  // namespace timemoe::data
