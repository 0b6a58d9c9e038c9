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

// The decoder-only backbone:
//
//   h0 = silu(W x) * (V x)
//   u  = SA(RMSNorm(h)) + h
//   h' = Mixture(RMSNorm(u)) + u        (dense SwiGLU FFN when !use_moe)
//   forecasts_j = RMSNorm(h_L) W_{p_j}
//
// Parameters are plain tensor handles; copying a Model shares them, clone()
// copies them.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "timemoe/heads/heads.h"
#include "timemoe/model/config.h"
#include "timemoe/model/layers.h"
#include "timemoe/moe/moe.h"

namespace timemoe::model {

template <typename T>
struct LayerParams {
  Tensor<T> attn_norm;  // [D]
  AttentionParams<T> attn;
  Tensor<T> ffn_norm;  // [D]
  moe::ExpertParams<T> mixture;  // when use_moe
  moe::FfnParams<T> dense;       // when !use_moe
};

template <typename T>
struct ModelParams {
  Tensor<T> embed_w;  // [1 x D]
  Tensor<T> embed_v;  // [1 x D]
  std::vector<LayerParams<T>> layers;
  Tensor<T> final_norm;  // [D]
  heads::HeadParams<T> heads;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  // Decoupled weight decay applies to matrices only, never to norm gains or
  // biases.
  bool decay;
};

struct ParamCount {
  std::int64_t total = 0;
  // total minus the (N - K) routed experts a token does not visit, per layer.
  std::int64_t activated = 0;
};

// Analytic count matching Model::parameters() without allocating.
ParamCount count_params(const ModelConfig& config);

// 2 x activated parameters + 4 * layers * context * D for attention scores
// and the value mix.
double flops_per_token(const ModelConfig& config, int context);

template <typename T>
struct HiddenState {
  Tensor<T> values;  // [T x D]
  int layer_index = 0;
};

template <typename T>
struct ForwardResult {
  Tensor<T> hidden;                   // normalized final hidden state [T x D]
  std::vector<Tensor<T>> forecasts;   // forecasts[j] is [T x p_j]
  std::vector<moe::RouterOutput<T>> routing;  // one per layer when use_moe
};

// One transformer block. When use_moe, the router output is stored in
// *routing if given.
template <typename T>
HiddenState<T> block_forward(const HiddenState<T>& h,
                             const LayerParams<T>& layer,
                             const ModelConfig& config,
                             const SegmentLayout& layout,
                             moe::RouterOutput<T>* routing = nullptr);

template <typename T>
class Model : public heads::Forecaster {
 public:
  // All weights zero, norm gains one.
  explicit Model(ModelConfig config);
  // Truncated-normal (+-2 std) initialization, reproducible from `seed`.
  static Model initialized(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ModelParams<T>& params() const { return params_; }
  ModelParams<T>& mutable_params() { return params_; }

  // Deterministic order; names are stable checkpoint keys.
  std::vector<NamedParam<T>> parameters() const;
  void zero_grad() const;
  Model clone() const;

  // values holds one observation per token; layout describes packing.
  ForwardResult<T> forward(std::span<const T> values,
                           const SegmentLayout& layout) const;
  ForwardResult<T> forward(std::span<const T> values) const;

  std::vector<int> horizons() const override { return config_.head_horizons; }
  int max_context() const override { return config_.max_context; }
  std::vector<std::vector<double>> predict_heads(
      std::span<const double> context) const override;

 private:
  ModelConfig config_;
  ModelParams<T> params_;
};

}  // namespace timemoe::model
