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

#include "timemoe/moe/moe.h"

#include <algorithm>
#include <numeric>

#include "timemoe/error.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::moe {

template <typename T>
Tensor<T> swiglu_ffn(const Tensor<T>& x, const FfnParams<T>& ffn) {
  using namespace num;
  return matmul(mul(silu(matmul(x, ffn.gate)), matmul(x, ffn.up)), ffn.down);
}

template <typename T>
RouterOutput<T> route_topk(const Tensor<T>& u, const ExpertParams<T>& params,
                           int top_k) {
  const int n = params.num_experts();
  if (top_k < 1 || top_k > n) {
    throw ConfigError("route_topk: K=" + std::to_string(top_k) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  const std::size_t expected_cols =
      static_cast<std::size_t>(n) + (params.has_shared() ? 1 : 0);
  if (params.router.rank() != 2 || params.router.dim(1) != expected_cols) {
    throw ShapeError("route_topk: router " +
                     num::shape_str(params.router.shape()) + " does not match " +
                     std::to_string(n) + " experts");
  }
  RouterOutput<T> out;
  out.num_experts = n;
  out.top_k = top_k;
  auto logits = num::matmul(u, params.router);
  out.scores = num::softmax_lastdim(num::slice_cols(logits, 0, n));
  if (params.has_shared()) {
    out.shared_gate = num::sigmoid(num::slice_cols(logits, n, 1));
  }

  const std::size_t tokens = u.dim(0);
  auto s = out.scores.data();
  std::vector<T> mask(tokens * n, T(0));
  out.selected.resize(tokens * top_k);
  std::vector<std::int32_t> order(n);
  for (std::size_t t = 0; t < tokens; ++t) {
    const T* row = s.data() + t * n;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                      [row](std::int32_t a, std::int32_t b) {
                        return row[a] > row[b] || (row[a] == row[b] && a < b);
                      });
    for (int k = 0; k < top_k; ++k) {
      out.selected[t * top_k + k] = order[k];
      mask[t * n + order[k]] = T(1);
    }
  }
  out.gates = num::mul(
      out.scores,
      Tensor<T>::from_vector({tokens, static_cast<std::size_t>(n)}, std::move(mask)));
  out.stats = load_stats(out);
  return out;
}

template <typename T>
LoadStats load_stats(const RouterOutput<T>& routing) {
  const std::size_t n = static_cast<std::size_t>(routing.num_experts);
  const std::size_t tokens = routing.tokens();
  if (tokens == 0) throw UsageError("load_stats over zero tokens");
  LoadStats stats;
  stats.f.assign(n, 0.0);
  stats.r.assign(n, 0.0);
  for (auto e : routing.selected) stats.f[e] += 1.0;
  const double f_norm =
      1.0 / (static_cast<double>(routing.top_k) * static_cast<double>(tokens));
  for (auto& v : stats.f) v *= f_norm;
  auto s = routing.scores.data();
  for (std::size_t t = 0; t < tokens; ++t)
    for (std::size_t i = 0; i < n; ++i) stats.r[i] += s[t * n + i];
  for (auto& v : stats.r) v /= static_cast<double>(tokens);
  return stats;
}

template <typename T>
Tensor<T> moe_forward(const Tensor<T>& u, const ExpertParams<T>& params,
                      const RouterOutput<T>& routing, MoeTrace* trace) {
  using namespace num;
  const std::size_t tokens = u.dim(0);
  const int n = params.num_experts();
  const int k = routing.top_k;
  if (routing.tokens() != tokens || routing.num_experts != n) {
    throw ShapeError("moe_forward: routing does not match the input");
  }
  if (trace) {
    trace->tokens_per_expert.assign(n, 0);
    trace->shared_tokens = 0;
  }

  // Bucket tokens by expert in token order for a deterministic accumulation.
  std::vector<std::vector<std::int32_t>> rows(n);
  for (std::size_t t = 0; t < tokens; ++t)
    for (int j = 0; j < k; ++j)
      rows[routing.selected[t * k + j]].push_back(static_cast<std::int32_t>(t));

  Tensor<T> out;
  if (params.has_shared()) {
    out = scale_rows(swiglu_ffn(u, params.shared), routing.shared_gate);
    if (trace) trace->shared_tokens = static_cast<std::int64_t>(tokens);
  } else {
    out = Tensor<T>::zeros(u.shape());
  }
  for (int e = 0; e < n; ++e) {
    if (rows[e].empty()) continue;
    std::vector<std::int64_t> flat(rows[e].size());
    for (std::size_t i = 0; i < rows[e].size(); ++i)
      flat[i] = static_cast<std::int64_t>(rows[e][i]) * n + e;
    auto y = swiglu_ffn(gather_rows(u, rows[e]), params.experts[e]);
    y = scale_rows(y, gather_elements(routing.gates, flat));
    out = index_add_rows(out, y, rows[e]);
    if (trace) trace->tokens_per_expert[e] = static_cast<std::int64_t>(rows[e].size());
  }
  return out;
}

#define TIMEMOE_INSTANTIATE(T)                                                \
  template Tensor<T> swiglu_ffn(const Tensor<T>&, const FfnParams<T>&);       \
  template RouterOutput<T> route_topk(const Tensor<T>&,                       \
                                      const ExpertParams<T>&, int);           \
  template LoadStats load_stats(const RouterOutput<T>&);                      \
  template Tensor<T> moe_forward(const Tensor<T>&, const ExpertParams<T>&,    \
                                 const RouterOutput<T>&, MoeTrace*);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::moe
