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

// Rolling benchmark evaluation over the test split of a multivariate CSV.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timemoe/data/csv.h"
#include "timemoe/heads/heads.h"
#include "timemoe/model/model.h"
#include "timemoe/train/trainer.h"

namespace timemoe::eval {

enum class EvalMode { kZeroShot, kFineTune };

struct EvalSpec {
  std::string dataset;  // CSV path
  std::string name;     // report label; also selects a split preset
  std::vector<int> horizons = {96, 192, 336, 720};
  std::vector<int> contexts = {512, 1024, 2048, 3072};  // paired with horizons
  EvalMode mode = EvalMode::kZeroShot;
  bool standardize = true;
  std::size_t stride = 1;
  // Unset: the preset for `name`, else a 70/10/20 split.
  std::optional<data::SplitProtocol> split;
  std::vector<std::string> channels;  // empty: all value columns
  // Fine-tune settings; steps is derived from one pass over the train split.
  train::TrainConfig finetune;
  bool ensemble = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const EvalSpec& s);
void from_json(const nlohmann::json& j, EvalSpec& s);

struct WindowIndex {
  std::size_t ctx_begin = 0, ctx_end = 0;  // [begin, end)
  std::size_t tgt_begin = 0, tgt_end = 0;
};

// Target windows start at every `stride`-th row of the test split and fit in
// it entirely; each context is the `context` rows right before its target,
// which may reach back before the test border. WindowingError when the
// history before the test split is shorter than `context` or the test split
// is shorter than `horizon`.
std::vector<WindowIndex> rolling_windows(const data::SplitIndices& split,
                                         std::size_t context, std::size_t horizon,
                                         std::size_t stride);

// Windows whose context overlaps or follows their target, or whose target
// leaves the test split.
std::size_t audit_windows(std::span<const WindowIndex> windows,
                          const data::SplitIndices& split);

struct EvalRow {
  std::string dataset;
  int horizon = 0;
  int context = 0;
  std::size_t windows = 0;
  double mse = 0.0;
  double mae = 0.0;
};

struct EvalAverage {
  std::string dataset;
  double mse = 0.0;
  double mae = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalAverage> averages;
  std::string model_hash;
  nlohmann::json model_config;
  std::uint64_t seed = 0;
  std::string mode = "zero_shot";
  bool standardized = true;  // metrics on the z-scored scale

  // Recomputes `averages` from `rows`.
  void finalize();
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

// Predicts the last context value for every horizon.
class LastValueForecaster : public heads::Forecaster {
 public:
  explicit LastValueForecaster(std::vector<int> horizons = {1, 8, 32, 64})
      : horizons_(std::move(horizons)) {}
  std::vector<int> horizons() const override { return horizons_; }
  int max_context() const override { return 1 << 30; }
  std::vector<std::vector<double>> predict_heads(
      std::span<const double> context) const override;

 private:
  std::vector<int> horizons_;
};

// Rolling, channel-independent evaluation of any forecaster on `table`.
EvalReport evaluate_forecaster(const heads::Forecaster& model,
                               const data::CsvTable& table, const EvalSpec& spec);

// One pass of sequential crops over the train split of every channel.
template <typename T>
model::Model<T> finetune_one_epoch(const model::Model<T>& model,
                                   const data::CsvTable& table,
                                   const data::SplitIndices& split,
                                   const EvalSpec& spec);

// Loads spec.dataset, fine-tunes first in kFineTune mode, evaluates, and
// fills in the report metadata.
EvalReport eval_model(const model::Model<float>& model, const EvalSpec& spec,
                      std::uint64_t seed = 0);

// FNV-1a over the config document and every parameter's bytes.
template <typename T>
std::string model_hash(const model::Model<T>& model);

}  // namespace timemoe::eval
