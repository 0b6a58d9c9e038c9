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

#include "timemoe/data/store.h"

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>

#include "json.hpp"
#include "timemoe/error.h"

namespace timemoe::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_f32(std::ostream& os, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xFF),
                         static_cast<char>((bits >> 8) & 0xFF),
                         static_cast<char>((bits >> 16) & 0xFF),
                         static_cast<char>((bits >> 24) & 0xFF)};
  os.write(bytes, 4);
}

std::string shard_name(const std::string& name, std::size_t k) {
  return k == 0 ? name + ".bin" : name + "_" + std::to_string(k) + ".bin";
}

std::string describe(std::size_t i, const SequenceEntry& e) {
  return "sequence " + std::to_string(i) + " (file " + e.file + ", offset " +
         std::to_string(e.offset_points) + ", length " +
         std::to_string(e.length_points) + ")";
}

}  // namespace

fs::path metafile_path(const fs::path& dir, const std::string& name) {
  return dir / (name + ".meta.json");
}

std::uint64_t SequenceStore::total_points() const {
  std::uint64_t n = 0;
  for (const auto& e : entries_) n += e.length_points;
  return n;
}

std::vector<std::string> SequenceStore::domains() const {
  std::set<std::string> d;
  for (const auto& e : entries_) d.insert(e.domain);
  return {d.begin(), d.end()};
}

SequenceStore SequenceStore::open(const fs::path& dir, const std::string& name) {
  const fs::path meta = metafile_path(dir, name);
  std::ifstream is(meta);
  if (!is) throw FormatError("cannot open metafile " + meta.string());
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw FormatError("metafile " + meta.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("version", -1) != kStoreVersion ||
      !doc.contains("sequences") || !doc["sequences"].is_array()) {
    throw FormatError("metafile " + meta.string() +
                      " lacks version " + std::to_string(kStoreVersion) +
                      " or a sequences array");
  }
  SequenceStore store;
  store.dir_ = dir;
  store.name_ = name;
  std::map<std::string, std::uint64_t> file_points;
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::uint64_t>>> ranges;
  std::size_t i = 0;
  for (const auto& item : doc["sequences"]) {
    SequenceEntry e;
    try {
      e.file = item.at("file").get<std::string>();
      e.offset_points = item.at("offset_points").get<std::uint64_t>();
      e.length_points = item.at("length_points").get<std::uint64_t>();
      e.domain = item.value("domain", std::string());
    } catch (const json::exception& ex) {
      throw FormatError("metafile entry " + std::to_string(i) + ": " + ex.what());
    }
    if (e.file.empty() || e.file.find('/') != std::string::npos ||
        e.file.find('\\') != std::string::npos) {
      throw FormatError("bad file name in " + describe(i, e));
    }
    auto it = file_points.find(e.file);
    if (it == file_points.end()) {
      std::error_code ec;
      const auto bytes = fs::file_size(dir / e.file, ec);
      if (ec) throw FormatError("missing data file for " + describe(i, e));
      it = file_points.emplace(e.file, bytes / 4).first;
    }
    if (e.length_points == 0 || e.offset_points > it->second ||
        e.length_points > it->second - e.offset_points) {
      throw FormatError(describe(i, e) + " exceeds its file of " +
                        std::to_string(it->second) + " points");
    }
    ranges[e.file].emplace_back(e.offset_points, e.offset_points + e.length_points);
    store.entries_.push_back(std::move(e));
    ++i;
  }
  for (auto& [file, spans] : ranges) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t k = 1; k < spans.size(); ++k) {
      if (spans[k].first < spans[k - 1].second) {
        throw FormatError("overlapping sequences in " + file + " at offset " +
                          std::to_string(spans[k].first));
      }
    }
  }
  return store;
}

std::vector<float> SequenceStore::read(std::size_t index) const {
  if (index >= entries_.size()) {
    throw RangeError("store index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(entries_.size()) + ")");
  }
  return read_range(index, 0, entries_[index].length_points);
}

std::vector<float> SequenceStore::read_range(std::size_t index, std::uint64_t offset,
                                             std::uint64_t count) const {
  if (index >= entries_.size()) {
    throw RangeError("store index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(entries_.size()) + ")");
  }
  const SequenceEntry& e = entries_[index];
  if (offset > e.length_points || count > e.length_points - offset) {
    throw RangeError("range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + count) + ") outside " + describe(index, e));
  }
  std::ifstream is(dir_ / e.file, std::ios::binary);
  if (!is) throw FormatError("cannot open data file for " + describe(index, e));
  is.seekg(static_cast<std::streamoff>((e.offset_points + offset) * 4));
  std::vector<unsigned char> raw(count * 4);
  if (!is.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("short read for " + describe(index, e));
  }
  std::vector<float> out(count);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::uint32_t bits = std::uint32_t{raw[4 * k]} |
                               (std::uint32_t{raw[4 * k + 1]} << 8) |
                               (std::uint32_t{raw[4 * k + 2]} << 16) |
                               (std::uint32_t{raw[4 * k + 3]} << 24);
    out[k] = std::bit_cast<float>(bits);
  }
  return out;
}

SequenceStore write_store(const fs::path& dir, std::span<const StoreInput> series,
                          const StoreWriteOptions& options) {
  if (series.empty() && !options.allow_empty) {
    throw UsageError("write_store: nothing to write");
  }
  if (options.max_points_per_file == 0) {
    throw UsageError("write_store: max_points_per_file must be positive");
  }
  fs::create_directories(dir);
  json sequences = json::array();
  std::size_t shard = 0;
  std::uint64_t in_shard = 0;
  std::ofstream os(dir / shard_name(options.name, shard), std::ios::binary | std::ios::trunc);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (s.values.empty()) {
      throw UsageError("write_store: sequence " + std::to_string(i) + " is empty");
    }
    if (in_shard > 0 && in_shard + s.values.size() > options.max_points_per_file) {
      os.close();
      ++shard;
      in_shard = 0;
      os.open(dir / shard_name(options.name, shard), std::ios::binary | std::ios::trunc);
    }
    if (!os) throw FormatError("cannot write shard " + shard_name(options.name, shard));
    for (double v : s.values) write_f32(os, static_cast<float>(v));
    sequences.push_back({{"file", shard_name(options.name, shard)},
                         {"offset_points", in_shard},
                         {"length_points", s.values.size()},
                         {"domain", s.domain}});
    in_shard += s.values.size();
  }
  os.close();
  if (!os) throw FormatError("failed writing store in " + dir.string());
  std::ofstream meta(metafile_path(dir, options.name), std::ios::trunc);
  meta << json{{"version", kStoreVersion}, {"sequences", sequences}}.dump(1) << "\n";
  if (!meta) throw FormatError("failed writing metafile in " + dir.string());
  meta.close();
  return SequenceStore::open(dir, options.name);
}

}  // namespace timemoe::data
