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

namespace timemoe::num {

// Shapes are explicit everywhere. The only broadcast is add_bias, which adds
// a vector along the trailing dimension.

// [m x k] x [k x n] -> [m x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
// Elementwise (Hadamard) product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
// x[..., n] + bias[n].
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
// x * sigmoid(x), a.k.a. Swish.
template <typename T>
Tensor<T> silu(const Tensor<T>& x);
// Softmax over the trailing dimension with max subtraction. NaN input is a
// NumericError.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x);

// Reductions to a one-element tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
// [m x n] -> [n], column means.
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
// [m x n] -> [m x count], columns [start, start + count).
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count);

// [m x n] -> [rows.size() x n].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows);
// Flat-index gather: out[i] = x.data()[flat[i]], shape [flat.size()].
template <typename T>
Tensor<T> gather_elements(const Tensor<T>& x,
                          std::span<const std::int64_t> flat);
// [m x n] * [m] -> row i scaled by g[i]. g may also be [m x 1].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& g);
// base[T x n] with src[k x n] added at rows[k]; rows may repeat.
template <typename T>
Tensor<T> index_add_rows(const Tensor<T>& base, const Tensor<T>& src,
                         std::span<const std::int32_t> rows);

}  // namespace timemoe::num
