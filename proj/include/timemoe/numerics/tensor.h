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

// Dense row-major tensors with tape-style reverse-mode differentiation.
//
// Every operation that consumes a tensor requiring gradients records a node
// holding its parents and an adjoint closure. Nodes carry a monotonically
// increasing sequence number, so the execution order of a forward pass is
// recoverable from the nodes alone: backward() collects the subgraph reachable
// from the loss, replays adjoints in descending sequence order, and then drops
// the recorded closures so the graph lives for exactly one forward/backward.
//
// Only float and double are instantiated.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace timemoe::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  // Empty until a gradient is first accumulated.
  std::vector<T> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the parents' grads.
  std::function<void(Node& self)> adjoint;

  bool is_leaf() const { return parents.empty(); }
  std::span<T> ensure_grad();
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<T> data,
                            bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  // Direct write access; used by optimizers and initializers on leaves.
  std::span<T> mutable_data() { return node_->data; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  T item() const;
  T at(std::size_t i) const { return node_->data[i]; }
  T at(std::size_t row, std::size_t col) const;

  // Copy of the values with no graph history.
  Tensor detach() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds the output of an operation. The result requires gradients when
// recording is enabled and any input does; only then are the inputs and the
// adjoint retained. Throws NumericError if `data` holds a non-finite value.
template <typename T>
Tensor<T> record_op(const char* op, Shape shape, std::vector<T> data,
                    std::vector<Tensor<T>> inputs,
                    std::function<void(Node<T>& self)> adjoint);

// Execution-ordered view of the subgraph that produced a tensor.
template <typename T>
struct Graph {
  std::vector<Node<T>*> nodes;
};

template <typename T>
Graph<T> collect_graph(const Tensor<T>& output);

// Accumulates d(loss)/d(leaf) into every reachable leaf requiring gradients,
// then releases the recorded adjoints. Throws UsageError unless `loss` holds
// exactly one element.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace timemoe::num
