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

#include "timemoe/model/model.h"

#include <cmath>
#include <random>

#include "timemoe/error.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::model {

namespace {

template <typename T>
Tensor<T> param(num::Shape shape, T fill = T(0)) {
  return Tensor<T>::full(std::move(shape), fill, /*requires_grad=*/true);
}

template <typename T>
moe::FfnParams<T> make_ffn(std::size_t d, std::size_t hidden) {
  return {param<T>({d, hidden}), param<T>({d, hidden}), param<T>({hidden, d})};
}

template <typename T>
void append_ffn(std::vector<NamedParam<T>>& out, const std::string& prefix,
                const moe::FfnParams<T>& ffn) {
  out.push_back({prefix + ".gate", ffn.gate, true});
  out.push_back({prefix + ".up", ffn.up, true});
  out.push_back({prefix + ".down", ffn.down, true});
}

}  // namespace

ParamCount count_params(const ModelConfig& config) {
  config.validate();
  const std::int64_t d = config.d_model;
  const std::int64_t n = config.num_experts;
  const std::int64_t k = config.top_k;
  const std::int64_t expert = 3 * d * config.d_expert;

  std::int64_t per_layer = 2 * d;          // two RMSNorm gains
  per_layer += 4 * d * d + 3 * d;          // q, k, v, o + qkv bias
  std::int64_t skipped_per_layer = 0;
  if (config.use_moe) {
    const std::int64_t routed_cols = n + (config.shared_expert ? 1 : 0);
    per_layer += d * routed_cols;
    per_layer += (n + (config.shared_expert ? 1 : 0)) * expert;
    skipped_per_layer = (n - k) * expert;
  } else {
    per_layer += 3 * d * config.d_ff;
  }
  std::int64_t horizon_sum = 0;
  for (int p : config.head_horizons) horizon_sum += p;

  ParamCount count;
  count.total = 2 * d + config.num_layers * per_layer + d + d * horizon_sum;
  count.activated = count.total - config.num_layers * skipped_per_layer;
  return count;
}

double flops_per_token(const ModelConfig& config, int context) {
  const ParamCount count = count_params(config);
  return 2.0 * static_cast<double>(count.activated) +
         4.0 * config.num_layers * static_cast<double>(context) * config.d_model;
}

template <typename T>
HiddenState<T> block_forward(const HiddenState<T>& h,
                             const LayerParams<T>& layer,
                             const ModelConfig& config,
                             const SegmentLayout& layout,
                             moe::RouterOutput<T>* routing) {
  if (h.layer_index < 0 || h.layer_index >= config.num_layers) {
    throw UsageError("block_forward: layer index " +
                     std::to_string(h.layer_index) + " out of range");
  }
  using namespace num;
  auto u = add(causal_self_attention(rmsnorm(h.values, layer.attn_norm),
                                     layer.attn, layout, config.num_heads,
                                     config.rope_base),
               h.values);
  auto u_bar = rmsnorm(u, layer.ffn_norm);
  Tensor<T> mixed;
  if (config.use_moe) {
    auto r = moe::route_topk(u_bar, layer.mixture, config.top_k);
    mixed = moe::moe_forward(u_bar, layer.mixture, r);
    if (routing) *routing = std::move(r);
  } else {
    mixed = moe::swiglu_ffn(u_bar, layer.dense);
  }
  return {add(mixed, u), h.layer_index + 1};
}

template <typename T>
Model<T>::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.d_model;
  params_.embed_w = param<T>({1, d});
  params_.embed_v = param<T>({1, d});
  params_.layers.resize(config_.num_layers);
  for (auto& layer : params_.layers) {
    layer.attn_norm = param<T>({d}, T(1));
    layer.attn.wq = param<T>({d, d});
    layer.attn.wk = param<T>({d, d});
    layer.attn.wv = param<T>({d, d});
    layer.attn.bq = param<T>({d});
    layer.attn.bk = param<T>({d});
    layer.attn.bv = param<T>({d});
    layer.attn.wo = param<T>({d, d});
    layer.ffn_norm = param<T>({d}, T(1));
    if (config_.use_moe) {
      const std::size_t n = config_.num_experts;
      const std::size_t cols = n + (config_.shared_expert ? 1 : 0);
      layer.mixture.router = param<T>({d, cols});
      for (std::size_t i = 0; i < n; ++i)
        layer.mixture.experts.push_back(make_ffn<T>(d, config_.d_expert));
      if (config_.shared_expert)
        layer.mixture.shared = make_ffn<T>(d, config_.d_expert);
    } else {
      layer.dense = make_ffn<T>(d, config_.d_ff);
    }
  }
  params_.final_norm = param<T>({d}, T(1));
  params_.heads.horizons = config_.head_horizons;
  for (int p : config_.head_horizons)
    params_.heads.weights.push_back(param<T>({d, static_cast<std::size_t>(p)}));
}

template <typename T>
Model<T> Model<T>::initialized(ModelConfig config, std::uint64_t seed) {
  Model model(std::move(config));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto truncated = [&]() {
    double z;
    do {
      z = normal(rng);
    } while (std::abs(z) > 2.0);
    return z;
  };
  for (auto& p : model.parameters()) {
    if (p.tensor.rank() != 2) continue;  // gains stay 1, biases stay 0
    const double std_dev = p.name.rfind("embed.", 0) == 0
                               ? model.config_.embed_init_std
                               : model.config_.init_std;
    for (auto& v : p.tensor.mutable_data())
      v = static_cast<T>(truncated() * std_dev);
  }
  return model;
}

template <typename T>
std::vector<NamedParam<T>> Model<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  out.push_back({"embed.w", params_.embed_w, true});
  out.push_back({"embed.v", params_.embed_v, true});
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const auto& layer = params_.layers[l];
    const std::string prefix = "layers." + std::to_string(l);
    out.push_back({prefix + ".attn_norm", layer.attn_norm, false});
    out.push_back({prefix + ".attn.wq", layer.attn.wq, true});
    out.push_back({prefix + ".attn.wk", layer.attn.wk, true});
    out.push_back({prefix + ".attn.wv", layer.attn.wv, true});
    out.push_back({prefix + ".attn.bq", layer.attn.bq, false});
    out.push_back({prefix + ".attn.bk", layer.attn.bk, false});
    out.push_back({prefix + ".attn.bv", layer.attn.bv, false});
    out.push_back({prefix + ".attn.wo", layer.attn.wo, true});
    out.push_back({prefix + ".ffn_norm", layer.ffn_norm, false});
    if (config_.use_moe) {
      out.push_back({prefix + ".moe.router", layer.mixture.router, true});
      for (std::size_t i = 0; i < layer.mixture.experts.size(); ++i)
        append_ffn(out, prefix + ".moe.experts." + std::to_string(i),
                   layer.mixture.experts[i]);
      if (layer.mixture.has_shared())
        append_ffn(out, prefix + ".moe.shared", layer.mixture.shared);
    } else {
      append_ffn(out, prefix + ".ffn", layer.dense);
    }
  }
  out.push_back({"final_norm", params_.final_norm, false});
  for (std::size_t j = 0; j < params_.heads.weights.size(); ++j)
    out.push_back({"heads." + std::to_string(params_.heads.horizons[j]),
                   params_.heads.weights[j], true});
  return out;
}

template <typename T>
void Model<T>::zero_grad() const {
  for (auto& p : parameters()) {
    Tensor<T> t = p.tensor;
    t.zero_grad();
  }
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model copy(config_);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto out = dst[i].tensor.mutable_data();
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(),
              out.begin());
  }
  return copy;
}

template <typename T>
ForwardResult<T> Model<T>::forward(std::span<const T> values,
                                   const SegmentLayout& layout) const {
  if (values.empty()) throw UsageError("forward on an empty token stream");
  if (layout.size() != values.size()) {
    throw ShapeError("forward: layout covers " + std::to_string(layout.size()) +
                     " tokens, got " + std::to_string(values.size()));
  }
  for (std::size_t t = 0; t < layout.size(); ++t) {
    if (layout.positions[t] >= config_.max_context) {
      throw UsageError("sequence at token " + std::to_string(t) +
                       " exceeds max_context " +
                       std::to_string(config_.max_context));
    }
  }
  auto x = Tensor<T>::from_vector({values.size(), 1},
                                  std::vector<T>(values.begin(), values.end()));
  HiddenState<T> h{embed_points(x, params_.embed_w, params_.embed_v), 0};
  ForwardResult<T> result;
  for (const auto& layer : params_.layers) {
    moe::RouterOutput<T> routing;
    h = block_forward(h, layer, config_, layout,
                      config_.use_moe ? &routing : nullptr);
    if (config_.use_moe) result.routing.push_back(std::move(routing));
  }
  result.hidden = rmsnorm(h.values, params_.final_norm);
  result.forecasts = heads::head_forward(result.hidden, params_.heads);
  return result;
}

template <typename T>
ForwardResult<T> Model<T>::forward(std::span<const T> values) const {
  return forward(values, SegmentLayout::single(values.size()));
}

template <typename T>
std::vector<std::vector<double>> Model<T>::predict_heads(
    std::span<const double> context) const {
  if (context.empty()) throw UsageError("predict_heads: empty context");
  const std::size_t window = static_cast<std::size_t>(config_.max_context);
  if (context.size() > window) context = context.last(window);
  std::vector<T> values(context.begin(), context.end());
  num::NoGradGuard no_grad;
  auto result = forward(values);
  const std::size_t last = values.size() - 1;
  std::vector<std::vector<double>> out;
  for (const auto& f : result.forecasts) {
    const std::size_t p = f.dim(1);
    std::vector<double> row(p);
    for (std::size_t i = 0; i < p; ++i) row[i] = f.at(last, i);
    out.push_back(std::move(row));
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template HiddenState<float> block_forward(const HiddenState<float>&,
                                          const LayerParams<float>&,
                                          const ModelConfig&,
                                          const SegmentLayout&,
                                          moe::RouterOutput<float>*);
template HiddenState<double> block_forward(const HiddenState<double>&,
                                           const LayerParams<double>&,
                                           const ModelConfig&,
                                           const SegmentLayout&,
                                           moe::RouterOutput<double>*);

}  // namespace timemoe::model
