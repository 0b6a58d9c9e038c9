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

#include "timemoe/numerics/ops.h"

#include <algorithm>
#include <cmath>

#include "timemoe/error.h"

namespace timemoe::num {

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a,
                        const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(x.shape()));
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      if (av == T(0)) continue;
      const T* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return record_op<T>(
      "matmul", {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](Node<T>& self) {
        const T* G = self.grad.data();
        auto A = a.data();
        auto B = b.data();
        if (a.requires_grad()) {
          T* dA = a.node()->grad.data();
          for (std::size_t i = 0; i < m; ++i) {
            const T* grow = G + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const T* brow = B.data() + p * n;
              T acc = T(0);
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              dA[i * k + p] += acc;
            }
          }
        }
        if (b.requires_grad()) {
          T* dB = b.node()->grad.data();
          for (std::size_t i = 0; i < m; ++i) {
            const T* grow = G + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const T av = A[i * k + p];
              if (av == T(0)) continue;
              T* drow = dB + p * n;
              for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return record_op<T>("add", a.shape(), std::move(out), {a, b},
                      [a, b](Node<T>& self) {
                        for (const auto* in : {&a, &b}) {
                          if (!in->requires_grad()) continue;
                          auto& g = in->node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        }
                      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return record_op<T>("sub", a.shape(), std::move(out), {a, b},
                      [a, b](Node<T>& self) {
                        if (a.requires_grad()) {
                          auto& g = a.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        }
                        if (b.requires_grad()) {
                          auto& g = b.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] -= self.grad[i];
                        }
                      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return record_op<T>("mul", a.shape(), std::move(out), {a, b},
                      [a, b](Node<T>& self) {
                        auto A = a.data();
                        auto B = b.data();
                        if (a.requires_grad()) {
                          auto& g = a.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * B[i];
                        }
                        if (b.requires_grad()) {
                          auto& g = b.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * A[i];
                        }
                      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * factor;
  return record_op<T>("scale", x.shape(), std::move(out), {x},
                      [x, factor](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] += self.grad[i] * factor;
                      });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank("add_bias", bias, 1);
  const std::size_t n = bias.dim(0);
  if (x.rank() == 0 || x.shape().back() != n) {
    throw ShapeError("add_bias: trailing dimension of " + shape_str(x.shape()) +
                     " does not match bias " + shape_str(bias.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  auto Bv = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += Bv[i % n];
  return record_op<T>("add_bias", x.shape(), std::move(out), {x, bias},
                      [x, bias, n](Node<T>& self) {
                        if (x.requires_grad()) {
                          auto& g = x.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        }
                        if (bias.requires_grad()) {
                          auto& g = bias.node()->grad;
                          for (std::size_t i = 0; i < self.grad.size(); ++i)
                            g[i % n] += self.grad[i];
                        }
                      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(X[i]);
  return record_op<T>("sigmoid", x.shape(), std::move(out), {x},
                      [x](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          const T y = self.data[i];
                          g[i] += self.grad[i] * y * (T(1) - y);
                        }
                      });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = X[i] * stable_sigmoid(X[i]);
  return record_op<T>("silu", x.shape(), std::move(out), {x},
                      [x](Node<T>& self) {
                        auto X = x.data();
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          const T s = stable_sigmoid(X[i]);
                          g[i] += self.grad[i] * s * (T(1) + X[i] * (T(1) - s));
                        }
                      });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw ShapeError("softmax_lastdim: empty trailing dimension");
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto X = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = X.data() + r * n;
    T* o = out.data() + r * n;
    T mx = in[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(in[j])) {
        throw NumericError("softmax_lastdim: NaN input in row " +
                           std::to_string(r));
      }
      mx = std::max(mx, in[j]);
    }
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  return record_op<T>("softmax", x.shape(), std::move(out), {x},
                      [x, n, rows](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t r = 0; r < rows; ++r) {
                          const T* y = self.data.data() + r * n;
                          const T* gy = self.grad.data() + r * n;
                          T dot = T(0);
                          for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
                          for (std::size_t j = 0; j < n; ++j)
                            g[r * n + j] += y[j] * (gy[j] - dot);
                        }
                      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return record_op<T>("sum", {1}, {total}, {x}, [x](Node<T>& self) {
    auto& g = x.node()->grad;
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  T total = T(0);
  for (T v : x.data()) total += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  return record_op<T>("mean", {1}, {total * inv}, {x}, [x, inv](Node<T>& self) {
    auto& g = x.node()->grad;
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  require_rank("mean_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0) throw ShapeError("mean_rows over zero rows");
  std::vector<T> out(n, T(0));
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += X[i * n + j];
  const T inv = T(1) / static_cast<T>(m);
  for (auto& v : out) v *= inv;
  return record_op<T>("mean_rows", {n}, std::move(out), {x},
                      [x, m, n, inv](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j)
                            g[i * n + j] += self.grad[j] * inv;
                      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return record_op<T>("reshape", std::move(shape), std::move(out), {x},
                      [x](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] += self.grad[i];
                      });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
  require_rank("slice_cols", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (start + count > n || count == 0) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     shape_str(x.shape()));
  }
  std::vector<T> out(m * count);
  auto X = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j)
      out[i * count + j] = X[i * n + start + j];
  return record_op<T>("slice_cols", {m, count}, std::move(out), {x},
                      [x, m, n, start, count](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < count; ++j)
                            g[i * n + start + j] += self.grad[i * count + j];
                      });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  std::vector<T> out(idx.size() * n);
  auto X = x.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= m) {
      throw ShapeError("gather_rows: row " + std::to_string(idx[r]) +
                       " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(X.data() + idx[r] * n, n, out.data() + r * n);
  }
  const std::size_t count = idx.size();  // idx is moved into the closure
  return record_op<T>("gather_rows", {count, n}, std::move(out), {x},
                      [x, idx = std::move(idx), n](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t r = 0; r < idx.size(); ++r)
                          for (std::size_t j = 0; j < n; ++j)
                            g[idx[r] * n + j] += self.grad[r * n + j];
                      });
}

template <typename T>
Tensor<T> gather_elements(const Tensor<T>& x,
                          std::span<const std::int64_t> flat) {
  std::vector<std::int64_t> idx(flat.begin(), flat.end());
  std::vector<T> out(idx.size());
  auto X = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= X.size()) {
      throw ShapeError("gather_elements: index " + std::to_string(idx[i]) +
                       " out of range for " + shape_str(x.shape()));
    }
    out[i] = X[idx[i]];
  }
  const std::size_t count = idx.size();
  return record_op<T>("gather_elements", {count}, std::move(out), {x},
                      [x, idx = std::move(idx)](Node<T>& self) {
                        auto& g = x.node()->grad;
                        for (std::size_t i = 0; i < idx.size(); ++i)
                          g[idx[i]] += self.grad[i];
                      });
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& g) {
  require_rank("scale_rows", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (g.numel() != m || (g.rank() == 2 && g.dim(1) != 1) || g.rank() > 2) {
    throw ShapeError("scale_rows: gate " + shape_str(g.shape()) +
                     " does not match rows of " + shape_str(x.shape()));
  }
  std::vector<T> out(m * n);
  auto X = x.data();
  auto G = g.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = X[i * n + j] * G[i];
  return record_op<T>("scale_rows", {m, n}, std::move(out), {x, g},
                      [x, g, m, n](Node<T>& self) {
                        auto X = x.data();
                        auto G = g.data();
                        if (x.requires_grad()) {
                          auto& dx = x.node()->grad;
                          for (std::size_t i = 0; i < m; ++i)
                            for (std::size_t j = 0; j < n; ++j)
                              dx[i * n + j] += self.grad[i * n + j] * G[i];
                        }
                        if (g.requires_grad()) {
                          auto& dg = g.node()->grad;
                          for (std::size_t i = 0; i < m; ++i) {
                            T acc = T(0);
                            for (std::size_t j = 0; j < n; ++j)
                              acc += self.grad[i * n + j] * X[i * n + j];
                            dg[i] += acc;
                          }
                        }
                      });
}

template <typename T>
Tensor<T> index_add_rows(const Tensor<T>& base, const Tensor<T>& src,
                         std::span<const std::int32_t> rows) {
  require_rank("index_add_rows", base, 2);
  require_rank("index_add_rows", src, 2);
  const std::size_t m = base.dim(0), n = base.dim(1);
  if (src.dim(1) != n || src.dim(0) != rows.size()) {
    throw ShapeError("index_add_rows: source " + shape_str(src.shape()) +
                     " incompatible with base " + shape_str(base.shape()) +
                     " and " + std::to_string(rows.size()) + " indices");
  }
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  std::vector<T> out(base.data().begin(), base.data().end());
  auto S = src.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= m) {
      throw ShapeError("index_add_rows: row " + std::to_string(idx[r]) +
                       " out of range");
    }
    for (std::size_t j = 0; j < n; ++j) out[idx[r] * n + j] += S[r * n + j];
  }
  return record_op<T>("index_add_rows", {m, n}, std::move(out), {base, src},
                      [base, src, idx = std::move(idx), n](Node<T>& self) {
                        if (base.requires_grad()) {
                          auto& g = base.node()->grad;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i];
                        }
                        if (src.requires_grad()) {
                          auto& g = src.node()->grad;
                          for (std::size_t r = 0; r < idx.size(); ++r)
                            for (std::size_t j = 0; j < n; ++j)
                              g[r * n + j] += self.grad[idx[r] * n + j];
                        }
                      });
}

#define TIMEMOE_INSTANTIATE(T)                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(const Tensor<T>&, T);                              \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> sigmoid(const Tensor<T>&);                               \
  template Tensor<T> silu(const Tensor<T>&);                                  \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                       \
  template Tensor<T> sum(const Tensor<T>&);                                   \
  template Tensor<T> mean(const Tensor<T>&);                                  \
  template Tensor<T> mean_rows(const Tensor<T>&);                             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                        \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);  \
  template Tensor<T> gather_rows(const Tensor<T>&,                            \
                                 std::span<const std::int32_t>);              \
  template Tensor<T> gather_elements(const Tensor<T>&,                        \
                                     std::span<const std::int64_t>);          \
  template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> index_add_rows(const Tensor<T>&, const Tensor<T>&,       \
                                    std::span<const std::int32_t>);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::num
