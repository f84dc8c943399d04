// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal define-by-run reverse-mode autodiff. A Var is a shared handle to a
// graph node; ops record a backward closure that accumulates into the
// gradients of their parents. Nodes that do not require a gradient never get
// a gradient buffer, so frozen parameters report an exactly-zero gradient.

#include <functional>
#include <memory>
#include <vector>

#include "rloop/tensor.hpp"

namespace rloop {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  // Gradient storage, zero-initialised on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  // Result of an op. The node only keeps its parents and backward closure when
  // gradient recording is enabled and some parent requires a gradient.
  static Var from_op(Tensor value, const std::vector<Var>& parents,
                     std::function<void(Node&)> backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t dim(size_t axis) const { return node_->value.dim(axis); }
  int64_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad = Tensor(); }

  Node* node() const noexcept { return node_.get(); }
  const NodePtr& node_ptr() const noexcept { return node_; }

  Var detach() const { return Var(node_->value, false); }

 private:
  NodePtr node_;
};

// Runs reverse accumulation from `root`, seeding d(root)/d(root) = 1. `root`
// must hold a single element unless a seed is given.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

bool grad_enabled() noexcept;

// Disables graph recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace rloop
