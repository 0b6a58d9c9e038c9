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

#include "timemoe/model/layers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "timemoe/error.h"
#include "timemoe/numerics/ops.h"

namespace timemoe::model {

SegmentLayout SegmentLayout::from_seq_ids(
    std::span<const std::int32_t> seq_ids) {
  SegmentLayout layout;
  layout.seq_ids.assign(seq_ids.begin(), seq_ids.end());
  layout.positions.resize(seq_ids.size());
  layout.segment_start.resize(seq_ids.size());
  std::unordered_set<std::int32_t> closed;
  std::int32_t start = 0;
  for (std::size_t t = 0; t < seq_ids.size(); ++t) {
    if (t > 0 && seq_ids[t] != seq_ids[t - 1]) {
      closed.insert(seq_ids[t - 1]);
      if (closed.count(seq_ids[t])) {
        throw UsageError("sequence id " + std::to_string(seq_ids[t]) +
                         " is not contiguous (reappears at token " +
                         std::to_string(t) + ")");
      }
      start = static_cast<std::int32_t>(t);
    }
    layout.segment_start[t] = start;
    layout.positions[t] = static_cast<std::int32_t>(t) - start;
  }
  return layout;
}

SegmentLayout SegmentLayout::single(std::size_t n) {
  std::vector<std::int32_t> ids(n, 0);
  return from_seq_ids(ids);
}

template <typename T>
Tensor<T> embed_points(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& v) {
  if (x.rank() != 2 || x.dim(1) != 1) {
    throw ShapeError("embed_points expects [T x 1] input, got " +
                     num::shape_str(x.shape()));
  }
  for (std::size_t t = 0; t < x.numel(); ++t) {
    if (!std::isfinite(x.at(t))) {
      throw DataError("non-finite observation at token " + std::to_string(t));
    }
  }
  return num::mul(num::silu(num::matmul(x, w)), num::matmul(x, v));
}

template <typename T>
Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& weight, double eps) {
  if (x.rank() != 2 || weight.rank() != 1 || weight.dim(0) != x.dim(1)) {
    throw ShapeError("rmsnorm: input " + num::shape_str(x.shape()) +
                     " vs weight " + num::shape_str(weight.shape()));
  }
  const std::size_t rows = x.dim(0), d = x.dim(1);
  auto X = x.data();
  auto W = weight.data();
  std::vector<T> inv(rows);
  std::vector<T> out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    T ms = T(0);
    for (std::size_t j = 0; j < d; ++j) ms += X[r * d + j] * X[r * d + j];
    ms /= static_cast<T>(d);
    inv[r] = T(1) / std::sqrt(ms + static_cast<T>(eps));
    for (std::size_t j = 0; j < d; ++j)
      out[r * d + j] = X[r * d + j] * inv[r] * W[j];
  }
  return num::record_op<T>(
      "rmsnorm", x.shape(), std::move(out), {x, weight},
      [x, weight, inv = std::move(inv), rows, d](num::Node<T>& self) {
        auto X = x.data();
        auto W = weight.data();
        const T* G = self.grad.data();
        if (x.requires_grad()) {
          T* dx = x.node()->grad.data();
          for (std::size_t r = 0; r < rows; ++r) {
            T dot = T(0);
            for (std::size_t j = 0; j < d; ++j)
              dot += G[r * d + j] * W[j] * X[r * d + j];
            const T c = inv[r] * inv[r] * inv[r] * dot / static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j)
              dx[r * d + j] += inv[r] * G[r * d + j] * W[j] - X[r * d + j] * c;
          }
        }
        if (weight.requires_grad()) {
          T* dw = weight.node()->grad.data();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j)
              dw[j] += G[r * d + j] * X[r * d + j] * inv[r];
        }
      });
}

template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, std::span<const std::int32_t> positions,
                     int num_heads, double base) {
  std::size_t tokens = 0, heads = 0, d_head = 0;
  if (x.rank() == 3) {
    tokens = x.dim(0);
    heads = x.dim(1);
    d_head = x.dim(2);
  } else if (x.rank() == 2 && num_heads > 0 &&
             x.dim(1) % static_cast<std::size_t>(num_heads) == 0) {
    tokens = x.dim(0);
    heads = static_cast<std::size_t>(num_heads);
    d_head = x.dim(1) / heads;
  } else {
    throw ShapeError("rope_apply: cannot split " + num::shape_str(x.shape()) +
                     " into " + std::to_string(num_heads) + " heads");
  }
  if (d_head % 2 != 0) {
    throw ConfigError("rope_apply: head dimension " + std::to_string(d_head) +
                      " is odd");
  }
  if (positions.size() != tokens) {
    throw ShapeError("rope_apply: " + std::to_string(positions.size()) +
                     " positions for " + std::to_string(tokens) + " tokens");
  }
  const std::size_t pairs = d_head / 2;
  std::vector<T> cos_tab(tokens * pairs), sin_tab(tokens * pairs);
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double freq =
          std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
      const double angle = static_cast<double>(positions[t]) * freq;
      cos_tab[t * pairs + i] = static_cast<T>(std::cos(angle));
      sin_tab[t * pairs + i] = static_cast<T>(std::sin(angle));
    }
  }
  const std::size_t width = heads * d_head;
  auto X = x.data();
  std::vector<T> out(X.size());
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base_idx = t * width + h * d_head;
      for (std::size_t i = 0; i < pairs; ++i) {
        const T c = cos_tab[t * pairs + i], s = sin_tab[t * pairs + i];
        const T a = X[base_idx + 2 * i], b = X[base_idx + 2 * i + 1];
        out[base_idx + 2 * i] = a * c - b * s;
        out[base_idx + 2 * i + 1] = a * s + b * c;
      }
    }
  }
  return num::record_op<T>(
      "rope", x.shape(), std::move(out), {x},
      [x, cos_tab = std::move(cos_tab), sin_tab = std::move(sin_tab), tokens,
       heads, d_head, pairs, width](num::Node<T>& self) {
        T* dx = x.node()->grad.data();
        const T* G = self.grad.data();
        for (std::size_t t = 0; t < tokens; ++t) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t base_idx = t * width + h * d_head;
            for (std::size_t i = 0; i < pairs; ++i) {
              const T c = cos_tab[t * pairs + i], s = sin_tab[t * pairs + i];
              const T ga = G[base_idx + 2 * i], gb = G[base_idx + 2 * i + 1];
              dx[base_idx + 2 * i] += ga * c + gb * s;
              dx[base_idx + 2 * i + 1] += -ga * s + gb * c;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> attention_core(const Tensor<T>& q, const Tensor<T>& k,
                         const Tensor<T>& v, const SegmentLayout& layout,
                         int num_heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("attention_core: q/k/v shapes disagree");
  }
  const std::size_t tokens = q.dim(0), width = q.dim(1);
  const std::size_t heads = static_cast<std::size_t>(num_heads);
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("attention_core: width not divisible by heads");
  }
  if (layout.size() != tokens) {
    throw ShapeError("attention_core: layout covers " +
                     std::to_string(layout.size()) + " tokens, input has " +
                     std::to_string(tokens));
  }
  const std::size_t dh = width / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));

  // Row t of every head keeps the probabilities over [start_t, t].
  std::vector<std::size_t> offset(tokens + 1, 0);
  for (std::size_t t = 0; t < tokens; ++t)
    offset[t + 1] = offset[t] + (t - layout.segment_start[t] + 1);
  const std::size_t per_head = offset[tokens];
  std::vector<T> probs(per_head * heads);
  std::vector<std::int32_t> starts = layout.segment_start;

  auto Q = q.data();
  auto K = k.data();
  auto V = v.data();
  std::vector<T> out(tokens * width, T(0));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t col = h * dh;
    for (std::size_t t = 0; t < tokens; ++t) {
      const std::size_t s = starts[t];
      T* p = probs.data() + h * per_head + offset[t];
      const T* qt = Q.data() + t * width + col;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = s; j <= t; ++j) {
        const T* kj = K.data() + j * width + col;
        T dot = T(0);
        for (std::size_t e = 0; e < dh; ++e) dot += qt[e] * kj[e];
        p[j - s] = dot * scale_factor;
        mx = std::max(mx, p[j - s]);
      }
      T total = T(0);
      for (std::size_t j = s; j <= t; ++j) {
        p[j - s] = std::exp(p[j - s] - mx);
        total += p[j - s];
      }
      T* o = out.data() + t * width + col;
      for (std::size_t j = s; j <= t; ++j) {
        p[j - s] /= total;
        const T* vj = V.data() + j * width + col;
        for (std::size_t e = 0; e < dh; ++e) o[e] += p[j - s] * vj[e];
      }
    }
  }
  return num::record_op<T>(
      "attention", {tokens, width}, std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), offset = std::move(offset),
       starts = std::move(starts), tokens, width, heads, dh, per_head,
       scale_factor](num::Node<T>& self) {
        auto Q = q.data();
        auto K = k.data();
        auto V = v.data();
        const T* G = self.grad.data();
        T* dq = q.requires_grad() ? q.node()->grad.data() : nullptr;
        T* dk = k.requires_grad() ? k.node()->grad.data() : nullptr;
        T* dv = v.requires_grad() ? v.node()->grad.data() : nullptr;
        std::vector<T> dp;
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t col = h * dh;
          for (std::size_t t = 0; t < tokens; ++t) {
            const std::size_t s = starts[t];
            const std::size_t n = t - s + 1;
            const T* p = probs.data() + h * per_head + offset[t];
            const T* gt = G + t * width + col;
            dp.assign(n, T(0));
            T weighted = T(0);
            for (std::size_t j = s; j <= t; ++j) {
              const T* vj = V.data() + j * width + col;
              T dot = T(0);
              for (std::size_t e = 0; e < dh; ++e) dot += gt[e] * vj[e];
              dp[j - s] = dot;
              weighted += p[j - s] * dot;
              if (dv) {
                T* dvj = dv + j * width + col;
                for (std::size_t e = 0; e < dh; ++e) dvj[e] += p[j - s] * gt[e];
              }
            }
            const T* qt = Q.data() + t * width + col;
            for (std::size_t j = s; j <= t; ++j) {
              const T ds = p[j - s] * (dp[j - s] - weighted) * scale_factor;
              if (ds == T(0)) continue;
              if (dq) {
                const T* kj = K.data() + j * width + col;
                T* dqt = dq + t * width + col;
                for (std::size_t e = 0; e < dh; ++e) dqt[e] += ds * kj[e];
              }
              if (dk) {
                T* dkj = dk + j * width + col;
                for (std::size_t e = 0; e < dh; ++e) dkj[e] += ds * qt[e];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> causal_self_attention(const Tensor<T>& x,
                                const AttentionParams<T>& params,
                                const SegmentLayout& layout, int num_heads,
                                double rope_base) {
  using namespace num;
  auto q = add_bias(matmul(x, params.wq), params.bq);
  auto k = add_bias(matmul(x, params.wk), params.bk);
  auto v = add_bias(matmul(x, params.wv), params.bv);
  q = rope_apply(q, layout.positions, num_heads, rope_base);
  k = rope_apply(k, layout.positions, num_heads, rope_base);
  return matmul(attention_core(q, k, v, layout, num_heads), params.wo);
}

#define TIMEMOE_INSTANTIATE(T)                                                 \
  template Tensor<T> embed_points(const Tensor<T>&, const Tensor<T>&,          \
                                  const Tensor<T>&);                           \
  template Tensor<T> rmsnorm(const Tensor<T>&, const Tensor<T>&, double);      \
  template Tensor<T> rope_apply(const Tensor<T>&,                              \
                                std::span<const std::int32_t>, int, double);   \
  template Tensor<T> attention_core(const Tensor<T>&, const Tensor<T>&,        \
                                    const Tensor<T>&, const SegmentLayout&,    \
                                    int);                                      \
  template Tensor<T> causal_self_attention(const Tensor<T>&,                   \
                                           const AttentionParams<T>&,          \
                                           const SegmentLayout&, int, double);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::model
