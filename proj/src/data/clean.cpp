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

#include "timemoe/data/clean.h"

#include <cmath>
#include <limits>

#include "timemoe/error.h"

namespace timemoe::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// count / n with 0 / 0 = NaN.
double ratio(std::size_t count, std::size_t n) {
  return n == 0 ? kNaN : static_cast<double>(count) / static_cast<double>(n);
}

// NaN compares false, so an undefined ratio never trips the threshold.
bool exceeds(double r, double threshold) { return r > threshold; }

}  // namespace

void CleanConfig::validate() const {
  if (window_size < 1) throw ConfigError("window_size must be >= 1");
  if (min_len < 1 || nan_min_len < 1) throw ConfigError("minimum lengths must be >= 1");
  if (!(zero_threshold >= 0.0 && zero_threshold <= 1.0)) {
    throw ConfigError("zero_threshold must lie in [0, 1]");
  }
}

std::vector<CleanSeries> split_by_nan_inf(std::span<const double> values,
                                          std::size_t min_len,
                                          const std::string& source) {
  if (min_len < 1) throw UsageError("split_by_nan_inf: min_len must be >= 1");
  std::vector<CleanSeries> out;
  CleanSeries current{{}, {source, 0}};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      if (current.values.size() >= min_len) out.push_back(std::move(current));
      current = CleanSeries{{}, {source, i + 1}};
    } else {
      current.values.push_back(values[i]);
    }
  }
  if (current.values.size() >= min_len) out.push_back(std::move(current));
  return out;
}

WindowCheck check_window(std::span<const double> w, double zero_threshold) {
  WindowCheck info{true, 0, 0, kNaN, kNaN, kNaN};
  for (double x : w) info.nan_count += std::isnan(x);
  if (info.nan_count > 0) {
    info.pass = false;
    return info;
  }
  for (double x : w) info.inf_count += std::isinf(x);
  if (info.inf_count > 0) {
    info.pass = false;
    return info;
  }
  const std::size_t n = w.size();
  std::size_t zeros = 0, d1 = 0, d2 = 0;
  for (double x : w) zeros += (x == 0.0);
  for (std::size_t t = 0; t + 1 < n; ++t) d1 += (w[t + 1] - w[t] == 0.0);
  for (std::size_t t = 0; t + 2 < n; ++t) d2 += (w[t + 2] - w[t] == 0.0);
  info.zero_ratio = ratio(zeros, n);
  info.first_diff_zero_ratio = ratio(d1, n > 1 ? n - 1 : 0);
  info.second_diff_zero_ratio = ratio(d2, n > 2 ? n - 2 : 0);
  info.pass = !exceeds(info.zero_ratio, zero_threshold) &&
              !exceeds(info.first_diff_zero_ratio, zero_threshold) &&
              !exceeds(info.second_diff_zero_ratio, zero_threshold);
  return info;
}

WindowCheck check_window(const num::Tensor<double>& window, double zero_threshold) {
  if (window.rank() != 1) {
    throw UsageError("check_window expects a 1-D window, got shape " +
                     num::shape_str(window.shape()));
  }
  return check_window(window.data(), zero_threshold);
}

std::vector<CleanSeries> split_by_window_quality(const CleanSeries& series,
                                                 const CleanConfig& config) {
  config.validate();
  const auto& seq = series.values;
  const std::size_t len = seq.size();
  const std::size_t ws = config.window_size;
  std::span<const double> all(seq);
  if (len <= ws) {
    if (check_window(all, config.zero_threshold).pass) return {series};
    return {};
  }

  std::vector<CleanSeries> out;
  CleanSeries run{{}, series.origin};
  std::size_t i = ws;
  while (true) {
    std::span<const double> window;
    if (i + ws > len) {
      window = all.subspan(i - ws);
      i = len;
    } else {
      window = all.subspan(i - ws, ws);
    }
    if (check_window(window, config.zero_threshold).pass) {
      if (run.values.empty()) {
        run.origin.offset = series.origin.offset + (window.data() - seq.data());
      }
      run.values.insert(run.values.end(), window.begin(), window.end());
    } else {
      if (run.values.size() >= config.min_len) out.push_back(std::move(run));
      run = CleanSeries{{}, series.origin};
    }
    if (i >= len) break;
    i += ws;
  }
  if (run.values.size() >= config.min_len) out.push_back(std::move(run));
  return out;
}

std::vector<CleanSeries> clean_series(const RawSeries& raw,
                                      const CleanConfig& config,
                                      const std::string& source) {
  config.validate();
  std::vector<CleanSeries> out;
  for (auto& piece : split_by_nan_inf(raw.values, config.nan_min_len, source)) {
    for (auto& s : split_by_window_quality(piece, config)) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace timemoe::data
