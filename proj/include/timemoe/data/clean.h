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

// Data cleaning: split at missing values, then drop windows dominated by
// zeros or repeated values.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "timemoe/numerics/tensor.h"

namespace timemoe::data {

struct RawSeries {
  std::vector<double> values;  // may hold NaN / Inf
  std::string domain;
  std::string frequency;
};

struct Origin {
  std::string source;
  std::size_t offset = 0;  // index of values[0] in the raw series
};

struct CleanSeries {
  std::vector<double> values;
  Origin origin;
};

struct CleanConfig {
  std::size_t window_size = 128;
  double zero_threshold = 0.2;
  std::size_t min_len = 256;
  std::size_t nan_min_len = 1;

  void validate() const;
};

// Maximal finite runs of at least min_len points, in order.
std::vector<CleanSeries> split_by_nan_inf(std::span<const double> values,
                                          std::size_t min_len,
                                          const std::string& source = {});

// Ratios that were not computed (the check stopped early) or whose
// denominator was zero are NaN. A NaN ratio never fails the check.
struct WindowCheck {
  bool pass = true;
  std::size_t nan_count = 0;
  std::size_t inf_count = 0;
  double zero_ratio;
  double first_diff_zero_ratio;
  double second_diff_zero_ratio;
};

WindowCheck check_window(std::span<const double> window, double zero_threshold);
// Rejects anything that is not rank 1 with UsageError.
WindowCheck check_window(const num::Tensor<double>& window, double zero_threshold);

// Scans non-overlapping windows; the trailing remainder is merged into the
// last window. Consecutive passing windows are concatenated and kept when at
// least min_len long. Inputs no longer than one window pass or fail whole.
std::vector<CleanSeries> split_by_window_quality(const CleanSeries& series,
                                                 const CleanConfig& config);

// split_by_nan_inf followed by split_by_window_quality on every piece.
std::vector<CleanSeries> clean_series(const RawSeries& raw,
                                      const CleanConfig& config,
                                      const std::string& source = {});

}  // namespace timemoe::data
