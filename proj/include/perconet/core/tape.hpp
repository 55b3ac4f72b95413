// Copyright 2026 The PerCoNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/tensor.hpp"

namespace perconet {

template <class T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid as long as the
// tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }
  T item() const { return value().data.at(0); }
};

// Records primitive applications in creation order. Creation order is a
// topological order, so backward simply walks the record in reverse.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::uint32_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value) {
    return push(Node{std::move(value), nullptr, {}, false, nullptr});
  }

  // Leaf whose gradient stays on the tape (read it back with grad()).
  Var<T> variable(Tensor<T> value) {
    return push(Node{std::move(value), nullptr, {}, grad_enabled_, nullptr});
  }

  // Leaf backed by external storage. Gradients accumulate into param.grad,
  // so repeated uses of one parameter add up.
  Var<T> bind(Tensor<T>& param, bool trainable = true) {
    const bool needs = grad_enabled_ && trainable;
    if (needs) param.ensure_grad();
    return push(Node{{}, &param, {}, needs, nullptr});
  }

  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (const Var<T>& p : parents) {
        check_owner(p);
        needs = needs || nodes_[p.id].needs_grad;
      }
    }
    return push(Node{std::move(value), nullptr, {}, needs,
                     needs ? std::move(backward) : nullptr});
  }

  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents,
                Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (const Var<T>& p : parents) {
        check_owner(p);
        needs = needs || nodes_[p.id].needs_grad;
      }
    }
    return push(Node{std::move(value), nullptr, {}, needs,
                     needs ? std::move(backward) : nullptr});
  }

  const Tensor<T>& value(std::uint32_t id) const {
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
  }
  const Tensor<T>& value(Var<T> v) const { return value(v.id); }

  bool needs_grad(std::uint32_t id) const { return nodes_.at(id).needs_grad; }
  bool needs_grad(Var<T> v) const { return needs_grad(v.id); }

  // Gradient buffer for a node, allocated on first use.
  std::vector<T>& grad(std::uint32_t id) {
    Node& n = nodes_.at(id);
    if (n.external) return n.external->ensure_grad();
    if (n.grad.empty()) {
      n.grad.assign(n.value.size(), T{0});
      bytes_ += n.value.size() * sizeof(T);
    }
    return n.grad;
  }
  std::vector<T>& grad(Var<T> v) { return grad(v.id); }

  // Returns the gradient buffer to accumulate into, or nullptr when the node
  // takes no gradient.
  std::vector<T>* sink(Var<T> v) {
    return needs_grad(v.id) ? &grad(v.id) : nullptr;
  }

  void backward(Var<T> root) {
    check_owner(root);
    if (consumed_) {
      throw TapeError("tape: backward called twice without a new forward pass");
    }
    if (value(root).size() != 1) {
      throw DimensionError("tape: backward root must be a scalar, got " +
                           shape_string(value(root).shape));
    }
    consumed_ = true;
    if (!nodes_[root.id].needs_grad) return;
    grad(root.id)[0] += T{1};
    for (std::int64_t i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || !n.backward) continue;
      if (n.grad.empty()) continue;
      n.backward(*this, static_cast<std::uint32_t>(i));
    }
  }

  std::size_t node_count() const { return nodes_.size(); }
  // Bytes held by recorded values and tape-owned gradients.
  std::size_t bytes() const { return bytes_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T>* external;
    std::vector<T> grad;
    bool needs_grad;
    Backward backward;
  };

  Var<T> push(Node node) {
    bytes_ += node.value.data.size() * sizeof(T);
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  void check_owner(Var<T> v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw TapeError("tape: variable does not belong to this tape");
    }
  }

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
  std::size_t bytes_ = 0;
};

}  // namespace perconet
