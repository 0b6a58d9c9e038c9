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

#include "timemoe/numerics/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "timemoe/error.h"

namespace timemoe::num {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::vector<T> data,
                                   bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
std::span<T> Node<T>::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(make_node<T>(std::move(shape), std::vector<T>(n, T(0)),
                             requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(
      make_node<T>(std::move(shape), std::vector<T>(n, value), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::from_vector(Shape shape, std::vector<T> data,
                                 bool requires_grad) {
  return Tensor(make_node<T>(std::move(shape), std::move(data), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(make_node<T>(Shape{1}, std::vector<T>{value}, requires_grad));
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.clear();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::size_t row, std::size_t col) const {
  return node_->data[row * node_->shape.back() + col];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(make_node<T>(node_->shape, node_->data, false));
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) {
  t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

template <typename T>
Tensor<T> record_op(const char* op, Shape shape, std::vector<T> data,
                    std::vector<Tensor<T>> inputs,
                    std::function<void(Node<T>& self)> adjoint) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NumericError(std::string(op) + " produced a non-finite value at " +
                         "flat index " + std::to_string(i));
    }
  }
  bool needs_grad = false;
  if (t_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) {
        needs_grad = true;
        break;
      }
    }
  }
  auto node = make_node<T>(std::move(shape), std::move(data), needs_grad);
  node->op = op;
  if (needs_grad) {
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) {
      if (in.defined()) node->parents.push_back(in.node_ptr());
    }
    node->adjoint = std::move(adjoint);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Graph<T> collect_graph(const Tensor<T>& output) {
  Graph<T> graph;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{output.node()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    graph.nodes.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(graph.nodes.begin(), graph.nodes.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq < b->seq; });
  return graph;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward() on a loss that does not require gradients");
  }
  Graph<T> graph = collect_graph(loss);
  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
    Node<T>* n = *it;
    if (n->adjoint && !n->grad.empty()) {
      for (auto& p : n->parents) {
        if (p->requires_grad) p->ensure_grad();
      }
      n->adjoint(*n);
    }
  }
  // The tape is single-use: release closures and interior gradients.
  for (Node<T>* n : graph.nodes) {
    if (!n->is_leaf()) {
      n->adjoint = nullptr;
      n->parents.clear();
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

#define TIMEMOE_INSTANTIATE(T)                                              \
  template struct Node<T>;                                                  \
  template class Tensor<T>;                                                 \
  template Tensor<T> record_op<T>(const char*, Shape, std::vector<T>,       \
                                  std::vector<Tensor<T>>,                   \
                                  std::function<void(Node<T>&)>);           \
  template Graph<T> collect_graph<T>(const Tensor<T>&);                     \
  template void backward<T>(const Tensor<T>&);

TIMEMOE_INSTANTIATE(float)
TIMEMOE_INSTANTIATE(double)

#undef TIMEMOE_INSTANTIATE

}  // namespace timemoe::num
