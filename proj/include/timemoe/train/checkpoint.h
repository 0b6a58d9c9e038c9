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

// Checkpoint layout (all integers little-endian):
//
//   "TMOE" | u32 version | u64 doc length | JSON document
//   repeated until EOF:
//     u32 name length | name bytes | u32 rank | rank x u64 dims | f32 payload
//
// The document holds the model config, the training step and, optionally,
// the training config. Optimizer moments are stored as tensors named
// "optim.m.<param>" and "optim.v.<param>".

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timemoe/model/model.h"
#include "timemoe/train/optim.h"

namespace timemoe::train {

inline constexpr char kCheckpointMagic[4] = {'T', 'M', 'O', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;
};

struct CheckpointFile {
  nlohmann::json document;
  std::vector<StoredTensor> tensors;
};

void write_checkpoint_file(const std::filesystem::path& path,
                           const CheckpointFile& file);
// Throws FormatError on bad magic, unknown version or truncation.
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

template <typename T>
struct Checkpoint {
  model::Model<T> model;
  std::optional<OptimizerState<T>> optimizer;
  std::int64_t step = 0;
  nlohmann::json train_config;  // null when absent
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path,
                     const model::Model<T>& model,
                     const OptimizerState<T>* optimizer, std::int64_t step,
                     const nlohmann::json& train_config = nullptr);

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace timemoe::train
