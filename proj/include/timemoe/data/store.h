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

// Sequence store: float32 little-endian points in one or more `.bin` shards
// plus a JSON metafile that records where each sequence lives.
//
//   <dir>/<name>.meta.json
//   {"version": 1,
//    "sequences": [{"file": "<name>.bin", "offset_points": 0,
//                   "length_points": 512, "domain": "energy"}, ...]}

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace timemoe::data {

inline constexpr int kStoreVersion = 1;

struct SequenceEntry {
  std::string file;
  std::uint64_t offset_points = 0;
  std::uint64_t length_points = 0;
  std::string domain;
};

struct StoreInput {
  std::span<const double> values;  // narrowed to float32 on write
  std::string domain;
};

struct StoreWriteOptions {
  std::string name = "data";
  // A new shard is started once the current one holds this many points.
  std::uint64_t max_points_per_file = std::uint64_t{1} << 26;
  // Write a metafile with no sequences instead of throwing.
  bool allow_empty = false;
};

class SequenceStore {
 public:
  // Parses and validates the metafile. Throws FormatError naming the first
  // bad entry (missing file, out-of-bounds or overlapping range).
  static SequenceStore open(const std::filesystem::path& dir,
                            const std::string& name = "data");

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<SequenceEntry>& entries() const { return entries_; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::string& name() const { return name_; }
  std::uint64_t total_points() const;
  // Sorted distinct domain tags.
  std::vector<std::string> domains() const;

  // Seeks straight to the entry. Throws RangeError if index >= size().
  std::vector<float> read(std::size_t index) const;
  // Points [offset, offset + count) of one sequence; RangeError when the
  // range leaves the sequence.
  std::vector<float> read_range(std::size_t index, std::uint64_t offset,
                                std::uint64_t count) const;

 private:
  std::filesystem::path dir_;
  std::string name_;
  std::vector<SequenceEntry> entries_;
};

// Throws UsageError on an empty sequence, and on an empty input list unless
// options.allow_empty is set.
SequenceStore write_store(const std::filesystem::path& dir,
                          std::span<const StoreInput> series,
                          const StoreWriteOptions& options = {});

std::filesystem::path metafile_path(const std::filesystem::path& dir,
                                    const std::string& name);

}  // namespace timemoe::data
