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

#include "timemoe/data/csv.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "timemoe/error.h"

namespace timemoe::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

// Accepts what strtod accepts for decimal text, including nan / inf, which
// the cleaning stage is there to deal with.
std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace

std::vector<double> CsvTable::column(std::size_t channel) const {
  if (channel >= channels()) {
    throw RangeError("column " + std::to_string(channel) + " out of range");
  }
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, channel);
  return out;
}

CsvTable parse_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_line(line);
  }
  if (header.empty()) throw FormatError("CSV has no header row");

  std::vector<std::vector<std::string>> raw;
  std::vector<std::size_t> raw_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    raw.push_back(std::move(cells));
    raw_lines.push_back(line_no);
  }

  bool skip_first = schema.timestamp == TimestampColumn::kYes;
  if (schema.timestamp == TimestampColumn::kAuto) {
    skip_first = !raw.empty() && !parse_number(raw[0][0]).has_value();
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t c = skip_first ? 1 : 0; c < header.size(); ++c) index[header[c]] = c;

  std::vector<std::size_t> picks;
  CsvTable table;
  if (schema.channels.empty()) {
    for (std::size_t c = skip_first ? 1 : 0; c < header.size(); ++c) {
      picks.push_back(c);
      table.columns.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.channels) {
      auto it = index.find(name);
      if (it == index.end()) throw FormatError("CSV lacks column '" + name + "'");
      picks.push_back(it->second);
      table.columns.push_back(name);
    }
  }
  if (picks.empty()) throw FormatError("CSV has no value columns");

  table.rows = raw.size();
  table.values.reserve(raw.size() * picks.size());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t c : picks) {
      auto v = parse_number(raw[r][c]);
      if (!v && schema.empty_as_nan && raw[r][c].empty()) {
        v = std::numeric_limits<double>::quiet_NaN();
      }
      if (!v) {
        throw ParseError("non-numeric cell '" + raw[r][c] + "' at line " +
                         std::to_string(raw_lines[r]) + ", column " +
                         std::to_string(c + 1) + " (" + header[c] + ")");
      }
      table.values.push_back(*v);
    }
  }
  return table;
}

CsvTable load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open CSV " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_csv(const CsvTable& table) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t c = 0; c < table.channels(); ++c) {
    out << (c ? "," : "") << table.columns[c];
  }
  out << "\n";
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (std::size_t c = 0; c < table.channels(); ++c) {
      out << (c ? "," : "") << table.at(r, c);
    }
    out << "\n";
  }
  return out.str();
}

std::optional<SplitProtocol> split_preset(const std::string& dataset) {
  static const std::map<std::string, SplitProtocol> presets = {
      {"ETTh1", {8545, 2881, 2881}},    {"ETTh2", {8545, 2881, 2881}},
      {"ETTm1", {34465, 11521, 11521}}, {"ETTm2", {34465, 11521, 11521}},
      {"Weather", {36792, 5271, 10540}}, {"GlobalTemp", {12280, 1755, 3509}},
  };
  auto it = presets.find(dataset);
  if (it == presets.end()) return std::nullopt;
  return it->second;
}

SplitProtocol ratio_split(std::size_t rows, double train, double val) {
  if (train <= 0.0 || val < 0.0 || train + val >= 1.0) {
    throw ConfigError("ratio_split: need 0 < train, 0 <= val, train + val < 1");
  }
  SplitProtocol p;
  p.train = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * train));
  p.val = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * val));
  p.test = rows - p.train - p.val;
  return p;
}

SplitIndices apply_split(std::size_t rows, const SplitProtocol& protocol) {
  if (protocol.train == 0 || protocol.test == 0) {
    throw ConfigError("split protocol needs non-empty train and test parts");
  }
  if (rows < protocol.total()) {
    throw DataError("table has " + std::to_string(rows) + " rows, split needs " +
                    std::to_string(protocol.total()));
  }
  SplitIndices s;
  s.train_end = protocol.train;
  s.val_begin = s.train_end;
  s.val_end = s.val_begin + protocol.val;
  s.test_begin = s.val_end;
  s.test_end = s.test_begin + protocol.test;
  return s;
}

Standardizer Standardizer::fit(const CsvTable& table, std::size_t begin,
                               std::size_t end) {
  if (begin >= end || end > table.rows) {
    throw UsageError("Standardizer::fit: bad row range");
  }
  Standardizer s;
  const double n = static_cast<double>(end - begin);
  for (std::size_t c = 0; c < table.channels(); ++c) {
    double mean = 0.0;
    for (std::size_t r = begin; r < end; ++r) mean += table.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = begin; r < end; ++r) {
      const double d = table.at(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    s.mean.push_back(mean);
    s.scale.push_back(sd > 0.0 && std::isfinite(sd) ? sd : 1.0);
  }
  return s;
}

CsvTable Standardizer::apply(const CsvTable& table) const {
  if (table.channels() != mean.size()) {
    throw ShapeError("Standardizer::apply: channel count mismatch");
  }
  CsvTable out = table;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.channels(); ++c)
      out.values[r * out.channels() + c] = forward(c, table.at(r, c));
  return out;
}

}  // namespace timemoe::data
