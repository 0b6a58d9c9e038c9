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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "timemoe/data/sampler.h"
#include "timemoe/data/store.h"
#include "timemoe/model/model.h"
#include "timemoe/train/checkpoint.h"
#include "timemoe/train/optim.h"

namespace timemoe::train {

struct TrainConfig {
  std::int64_t steps = 200;
  std::size_t batch = 8;
  std::size_t context = 256;
  double lr = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  std::int64_t warmup_steps = 20;
  double alpha = 0.02;
  double delta = 1.0;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables clipping
  std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::map<std::string, double> domain_weights;  // empty: equal weights

  void validate() const;
  AdamWConfig adamw() const { return {beta1, beta2, eps, weight_decay}; }
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Rejects unknown keys and validates.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepMetrics {
  std::int64_t step = 0;  // 1-based index of the update just taken
  double lr = 0.0;
  double loss = 0.0;
  double loss_ar = 0.0;
  double loss_aux = 0.0;
  // Over every (layer, expert) pair; NaN for dense models.
  double f_min = 0.0;
  double f_max = 0.0;
  // Per layer selection fractions.
  std::vector<std::vector<double>> f;

  // Mean over layers of max_i f_i - min_i f_i; NaN for dense models.
  double f_gap() const;
  // One metrics line: {step, lr, loss, loss_ar, loss_aux, f_min, f_max}.
  nlohmann::json to_json() const;
};

// Step s (0-based) uses lr_at_step(s, warmup, steps, lr) and a batch drawn
// from an RNG seeded by (seed, s), so a resumed run sees the same batches.
template <typename T>
class Trainer {
 public:
  Trainer(model::Model<T> model, TrainConfig config);
  // CompatibilityError unless the checkpoint carries the same training
  // config (checkpoint_every aside) and optimizer state.
  static Trainer resume(Checkpoint<T> checkpoint, const TrainConfig& config);

  const model::Model<T>& model() const { return model_; }
  const TrainConfig& config() const { return config_; }
  const OptimizerState<T>& optimizer() const { return optimizer_; }
  std::int64_t steps_done() const { return step_; }

  // The batch used for update number `step`.
  data::PackedBatch batch_for_step(const data::SequenceStore& store,
                                   std::int64_t step) const;

  // Forward, backward and one AdamW update on a token stream.
  StepMetrics step(const data::TokenStream& stream);

  // Trains until config().steps updates are done, calling on_step after
  // each one and writing a checkpoint to checkpoint_path every
  // checkpoint_every steps when a path is given.
  void run(const data::SequenceStore& store,
           const std::function<void(const StepMetrics&)>& on_step = {},
           const std::filesystem::path& checkpoint_path = {});

  void save(const std::filesystem::path& path) const;

 private:
  model::Model<T> model_;
  TrainConfig config_;
  OptimizerState<T> optimizer_;
  std::int64_t step_ = 0;
};

// Loss of a model on a token stream without touching parameters.
template <typename T>
StepMetrics evaluate_loss(const model::Model<T>& model,
                          const data::TokenStream& stream, double alpha,
                          double delta);

}  // namespace timemoe::train
