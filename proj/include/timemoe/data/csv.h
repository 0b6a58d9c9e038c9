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

// Benchmark CSV ingestion, split protocols and per-channel z-scoring.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace timemoe::data {

enum class TimestampColumn { kAuto, kYes, kNo };

struct CsvSchema {
  // Channels to keep, in this order. Empty keeps every value column.
  std::vector<std::string> channels;
  // kAuto treats the first column as a timestamp when its first data cell
  // does not parse as a number.
  TimestampColumn timestamp = TimestampColumn::kAuto;
  // Read empty cells as NaN (raw data headed for cleaning) instead of
  // raising ParseError.
  bool empty_as_nan = false;
};

// Row-major [rows x channels()] values.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<double> values;
  std::size_t rows = 0;

  std::size_t channels() const { return columns.size(); }
  double at(std::size_t row, std::size_t channel) const {
    return values[row * columns.size() + channel];
  }
  std::vector<double> column(std::size_t channel) const;
};

// Throws ParseError naming the 1-based line and column of a non-numeric cell
// and FormatError for a header without the requested channels or a ragged
// row.
CsvTable load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
CsvTable parse_csv(const std::string& text, const CsvSchema& schema = {});
std::string format_csv(const CsvTable& table);

// Contiguous train / val / test row counts taken from the start of a file.
struct SplitProtocol {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
};

// Known presets: ETTh1, ETTh2, ETTm1, ETTm2, Weather, GlobalTemp.
std::optional<SplitProtocol> split_preset(const std::string& dataset);
// 70 / 10 / 20 split of `rows` (the common convention for custom files).
SplitProtocol ratio_split(std::size_t rows, double train = 0.7, double val = 0.1);

struct SplitIndices {
  std::size_t train_begin = 0, train_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t test_begin = 0, test_end = 0;
};

// Throws DataError when the table is shorter than the protocol; extra
// trailing rows are ignored.
SplitIndices apply_split(std::size_t rows, const SplitProtocol& protocol);

// Per-channel mean / population std fitted on rows [begin, end).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // std, or 1 for a constant channel

  static Standardizer fit(const CsvTable& table, std::size_t begin, std::size_t end);
  double forward(std::size_t channel, double x) const {
    return (x - mean[channel]) / scale[channel];
  }
  double inverse(std::size_t channel, double z) const {
    return z * scale[channel] + mean[channel];
  }
  CsvTable apply(const CsvTable& table) const;
};

}  // namespace timemoe::data
