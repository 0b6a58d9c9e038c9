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

#include "timemoe/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "timemoe/error.h"
#include "timemoe/train/loss.h"

namespace timemoe::train {

using nlohmann::json;

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (context < 2) throw ConfigError("context must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (warmup_steps < 0 || warmup_steps > steps) {
    throw ConfigError("warmup_steps must lie in [0, steps]");
  }
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  for (const auto& [domain, w] : domain_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("domain weight for '" + domain + "' must be finite and >= 0");
    }
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"steps", c.steps},
           {"batch", c.batch},
           {"context", c.context},
           {"lr", c.lr},
           {"weight_decay", c.weight_decay},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"eps", c.eps},
           {"warmup_steps", c.warmup_steps},
           {"alpha", c.alpha},
           {"delta", c.delta},
           {"seed", c.seed},
           {"clip_norm", c.clip_norm},
           {"checkpoint_every", c.checkpoint_every},
           {"domain_weights", c.domain_weights}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "steps", "batch", "context", "lr", "weight_decay", "beta1", "beta2", "eps",
      "warmup_steps", "alpha", "delta", "seed", "clip_norm", "checkpoint_every",
      "domain_weights"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown train config key '" + key + "'");
  }
  TrainConfig out;
  try {
    out.steps = j.value("steps", out.steps);
    out.batch = j.value("batch", out.batch);
    out.context = j.value("context", out.context);
    out.lr = j.value("lr", out.lr);
    out.weight_decay = j.value("weight_decay", out.weight_decay);
    out.beta1 = j.value("beta1", out.beta1);
    out.beta2 = j.value("beta2", out.beta2);
    out.eps = j.value("eps", out.eps);
    out.warmup_steps = j.value("warmup_steps", out.warmup_steps);
    out.alpha = j.value("alpha", out.alpha);
    out.delta = j.value("delta", out.delta);
    out.seed = j.value("seed", out.seed);
    out.clip_norm = j.value("clip_norm", out.clip_norm);
    out.checkpoint_every = j.value("checkpoint_every", out.checkpoint_every);
    out.domain_weights = j.value("domain_weights", out.domain_weights);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  out.validate();
  c = std::move(out);
}

double StepMetrics::f_gap() const {
  if (f.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& layer : f) {
    const auto [lo, hi] = std::minmax_element(layer.begin(), layer.end());
    acc += *hi - *lo;
  }
  return acc / static_cast<double>(f.size());
}

json StepMetrics::to_json() const {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return json{{"step", step},         {"lr", lr},
              {"loss", num(loss)},    {"loss_ar", num(loss_ar)},
              {"loss_aux", num(loss_aux)}, {"f_min", num(f_min)},
              {"f_max", num(f_max)}};
}

namespace {

template <typename T>
struct LossPass {
  LossBreakdown<T> loss;
  StepMetrics metrics;
};

template <typename T>
LossPass<T> loss_pass(const model::Model<T>& model, const data::TokenStream& stream,
                      double alpha, double delta) {
  std::vector<T> values(stream.values.begin(), stream.values.end());
  auto result = model.forward(std::span<const T>(values), stream.layout);
  const auto horizons = model.config().head_horizons;
  auto targets = build_head_targets<T>(values, stream.layout, horizons);
  LossPass<T> out{total_loss<T>(result.forecasts, targets, result.routing, alpha, delta),
                  {}};
  auto& m = out.metrics;
  m.loss = static_cast<double>(out.loss.total.item());
  m.loss_ar = out.loss.forecast;
  m.loss_aux = out.loss.aux;
  m.f_min = std::numeric_limits<double>::quiet_NaN();
  m.f_max = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : result.routing) {
    m.f.push_back(r.stats.f);
    const auto [lo, hi] = std::minmax_element(r.stats.f.begin(), r.stats.f.end());
    if (!(*lo >= m.f_min)) m.f_min = *lo;
    if (!(*hi <= m.f_max)) m.f_max = *hi;
  }
  return out;
}

}  // namespace

template <typename T>
StepMetrics evaluate_loss(const model::Model<T>& model, const data::TokenStream& stream,
                          double alpha, double delta) {
  num::NoGradGuard guard;
  return loss_pass(model, stream, alpha, delta).metrics;
}

template <typename T>
Trainer<T>::Trainer(model::Model<T> model, TrainConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.validate();
  optimizer_ = OptimizerState<T>::for_params(model_.parameters());
}

template <typename T>
Trainer<T> Trainer<T>::resume(Checkpoint<T> checkpoint, const TrainConfig& config) {
  if (checkpoint.train_config.is_null()) {
    throw CompatibilityError("checkpoint carries no training config; cannot resume");
  }
  TrainConfig saved;
  try {
    saved = checkpoint.train_config.template get<TrainConfig>();
  } catch (const Error& e) {
    throw CompatibilityError(std::string("checkpoint training config: ") + e.what());
  }
  TrainConfig lhs = saved, rhs = config;
  lhs.checkpoint_every = rhs.checkpoint_every = 0;
  if (!(lhs == rhs)) {
    throw CompatibilityError("training config differs from the checkpoint's: saved " +
                             json(saved).dump() + ", given " + json(config).dump());
  }
  if (!checkpoint.optimizer) {
    throw CompatibilityError("checkpoint has no optimizer state; cannot resume");
  }
  if (checkpoint.step < 0 || checkpoint.step > config.steps) {
    throw CompatibilityError("checkpoint step " + std::to_string(checkpoint.step) +
                             " outside the configured run");
  }
  Trainer trainer(std::move(checkpoint.model), config);
  trainer.optimizer_ = std::move(*checkpoint.optimizer);
  trainer.step_ = checkpoint.step;
  return trainer;
}

template <typename T>
data::PackedBatch Trainer<T>::batch_for_step(const data::SequenceStore& store,
                                             std::int64_t step) const {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                    static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32)};
  std::mt19937_64 rng(seq);
  return data::sample_batch(store, rng, config_.batch, config_.context,
                            config_.domain_weights);
}

template <typename T>
StepMetrics Trainer<T>::step(const data::TokenStream& stream) {
  if (step_ >= config_.steps) {
    throw UsageError("trainer already completed " + std::to_string(step_) + " steps");
  }
  const double lr = lr_at_step(step_, config_.warmup_steps, config_.steps, config_.lr);
  model_.zero_grad();
  auto pass = loss_pass(model_, stream, config_.alpha, config_.delta);
  num::backward(pass.loss.total);
  const auto params = model_.parameters();
  if (config_.clip_norm > 0.0) {
    clip_grad_norm<T>(params, config_.clip_norm);
  }
  adamw_step<T>(params, optimizer_, lr, config_.adamw());
  ++step_;
  pass.metrics.step = step_;
  pass.metrics.lr = lr;
  return pass.metrics;
}

template <typename T>
void Trainer<T>::run(const data::SequenceStore& store,
                     const std::function<void(const StepMetrics&)>& on_step,
                     const std::filesystem::path& checkpoint_path) {
  while (step_ < config_.steps) {
    const auto batch = batch_for_step(store, step_);
    const auto metrics = step(batch.stream());
    if (on_step) on_step(metrics);
    if (!checkpoint_path.empty() && config_.checkpoint_every > 0 &&
        step_ % config_.checkpoint_every == 0) {
      save(checkpoint_path);
    }
  }
  if (!checkpoint_path.empty()) save(checkpoint_path);
}

template <typename T>
void Trainer<T>::save(const std::filesystem::path& path) const {
  save_checkpoint(path, model_, &optimizer_, step_, json(config_));
}

template class Trainer<float>;
template class Trainer<double>;
template StepMetrics evaluate_loss(const model::Model<float>&, const data::TokenStream&,
                                   double, double);
template StepMetrics evaluate_loss(const model::Model<double>&, const data::TokenStream&,
                                   double, double);

}  // namespace timemoe::train
