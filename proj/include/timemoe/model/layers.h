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
#include <span>
#include <vector>

#include "timemoe/numerics/tensor.h"

namespace timemoe::model {

using num::Tensor;

// Token stream layout derived from per-token sequence ids. Tokens that share
// an id must be contiguous; each contiguous run is one packed sequence.
struct SegmentLayout {
  std::vector<std::int32_t> seq_ids;
  // Offset of each token inside its own sequence (rotary position).
  std::vector<std::int32_t> positions;
  // Index of the first token of the token's sequence.
  std::vector<std::int32_t> segment_start;

  std::size_t size() const { return seq_ids.size(); }

  // Throws UsageError if an id reappears after a different id.
  static SegmentLayout from_seq_ids(std::span<const std::int32_t> seq_ids);
  // A single unpacked sequence of length n.
  static SegmentLayout single(std::size_t n);
};

// h0_t = silu(W x_t) * (V x_t) for x[T x 1], W and V stored as [1 x D].
// Non-finite inputs raise DataError.
template <typename T>
Tensor<T> embed_points(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& v);

inline constexpr double kRmsNormEps = 1e-6;

// Per row: x / sqrt(mean(x^2) + eps) * weight.
template <typename T>
Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& weight,
                  double eps = kRmsNormEps);

// Rotates consecutive pairs (2i, 2i+1) of every head by
// position * base^(-2i / d_head). Accepts [T x heads x d_head] or the
// flattened [T x heads*d_head] with num_heads given. Odd d_head is a
// ConfigError.
template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, std::span<const std::int32_t> positions,
                     int num_heads, double base);

// Multi-head scaled dot-product attention over already-projected q, k, v
// [T x D]. Token t attends to tokens j <= t of its own sequence only.
template <typename T>
Tensor<T> attention_core(const Tensor<T>& q, const Tensor<T>& k,
                         const Tensor<T>& v, const SegmentLayout& layout,
                         int num_heads);

template <typename T>
struct AttentionParams {
  Tensor<T> wq, wk, wv;  // [D x D]
  Tensor<T> bq, bk, bv;  // [D]; the only biases in the network
  Tensor<T> wo;          // [D x D]
};

// Causal self-attention with QKV bias, rotary q/k and a bias-free output
// projection.
template <typename T>
Tensor<T> causal_self_attention(const Tensor<T>& x,
                                const AttentionParams<T>& params,
                                const SegmentLayout& layout, int num_heads,
                                double rope_base);

}  // namespace timemoe::model
