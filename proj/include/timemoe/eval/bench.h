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

// Sparse-vs-dense comparison at matched activated parameters.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "timemoe/model/config.h"
#include "timemoe/model/model.h"
#include "timemoe/train/trainer.h"

namespace timemoe::eval {

struct BenchPair {
  model::ModelConfig moe;
  model::ModelConfig dense;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t corpus_size = 48;      // three-regime series
  std::size_t series_length = 1024;
  std::size_t eval_batches = 8;      // held-out batches for the final loss
  int flops_context = 256;

  void validate() const;
};

void to_json(nlohmann::json& j, const BenchPair& p);
void from_json(const nlohmann::json& j, BenchPair& p);

struct BenchRun {
  std::uint64_t seed = 0;
  double moe_loss = 0.0;    // held-out forecast loss after training
  double dense_loss = 0.0;
  double moe_seconds = 0.0;
  double dense_seconds = 0.0;
};

struct BenchReport {
  model::ParamCount moe_params;
  model::ParamCount dense_params;
  double activated_gap = 0.0;  // |moe - dense| / dense, activated params
  double moe_flops = 0.0;      // per token
  double dense_flops = 0.0;
  std::vector<BenchRun> runs;

  int moe_wins() const;  // runs with moe_loss <= dense_loss
};

void to_json(nlohmann::json& j, const BenchReport& r);
void from_json(const nlohmann::json& j, BenchReport& r);

// Analytic part only: parameter counts, parity gap and FLOPs.
BenchReport bench_accounting(const BenchPair& pair);

// Trains both models for pair.train.steps on a three-regime corpus written
// under `workdir`, once per seed.
BenchReport bench_sparse_vs_dense(const BenchPair& pair,
                                  const std::filesystem::path& workdir);

}  // namespace timemoe::eval
