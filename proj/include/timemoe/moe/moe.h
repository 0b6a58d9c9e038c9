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

// Sparse mixture layer: softmax top-K routing over N experts plus one
// sigmoid-gated shared expert.

#pragma once

#include <cstdint>
#include <vector>

#include "timemoe/numerics/tensor.h"

namespace timemoe::moe {

using num::Tensor;

// Gated (SwiGLU) feed-forward: down(silu(x gate) * (x up)).
template <typename T>
struct FfnParams {
  Tensor<T> gate;  // [D x hidden]
  Tensor<T> up;    // [D x hidden]
  Tensor<T> down;  // [hidden x D]
};

template <typename T>
Tensor<T> swiglu_ffn(const Tensor<T>& x, const FfnParams<T>& ffn);

template <typename T>
struct ExpertParams {
  // [D x (N + 1)] with a shared expert, [D x N] without. Column N scores the
  // shared expert's sigmoid gate.
  Tensor<T> router;
  std::vector<FfnParams<T>> experts;
  // Undefined tensors when the layer has no shared expert.
  FfnParams<T> shared;

  int num_experts() const { return static_cast<int>(experts.size()); }
  bool has_shared() const { return shared.gate.defined(); }
};

struct LoadStats {
  std::vector<double> f;  // fraction of token selections per expert
  std::vector<double> r;  // mean routing probability per expert
};

template <typename T>
struct RouterOutput {
  int num_experts = 0;
  int top_k = 0;
  Tensor<T> scores;       // [T x N], row-stochastic, differentiable
  Tensor<T> gates;        // [T x N], scores on the top-K entries, else 0
  Tensor<T> shared_gate;  // [T x 1] in (0, 1); undefined without shared expert
  // Row-major [T x K]; within a row ordered by descending score, ties to the
  // lower expert index.
  std::vector<std::int32_t> selected;
  LoadStats stats;

  std::size_t tokens() const { return scores.dim(0); }
};

// Routes every token: softmax over the N routed logits, keep the K largest
// scores unrenormalized. Requires 1 <= K <= N.
template <typename T>
RouterOutput<T> route_topk(const Tensor<T>& u, const ExpertParams<T>& params,
                           int top_k);

// f_i = (1 / (K T)) * #{t : i selected at t}, r_i = (1 / T) * sum_t s_{i,t}.
template <typename T>
LoadStats load_stats(const RouterOutput<T>& routing);

// Number of (token, FFN) evaluations performed by moe_forward.
struct MoeTrace {
  std::vector<std::int64_t> tokens_per_expert;
  std::int64_t shared_tokens = 0;
};

// shared_gate_t * FFN_shared(u_t) + sum over selected i of g_{i,t} FFN_i(u_t).
// Experts are evaluated only on the tokens routed to them.
template <typename T>
Tensor<T> moe_forward(const Tensor<T>& u, const ExpertParams<T>& params,
                      const RouterOutput<T>& routing, MoeTrace* trace = nullptr);

}  // namespace timemoe::moe
