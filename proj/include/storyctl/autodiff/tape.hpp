// Copyright 2026 The Storyctl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "storyctl/autodiff/tensor.hpp"

namespace storyctl::ad {

struct NodeId {
  std::uint32_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

template <typename T>
class Tape;
template <typename T>
class Gradients;
template <typename T>
Gradients<T> backward(const Tape<T>& tape, NodeId loss);

// Gradient storage produced by a backward pass. Nodes that the loss does not
// reach report a zero tensor of their value's shape.
template <typename T>
class Gradients {
 public:
  explicit Gradients(const Tape<T>& tape);

  // Mutable accumulator for `id`, zero-initialized on first access.
  Tensor<T>& accum(NodeId id);
  bool has(NodeId id) const { return !grads_[id.index].empty(); }
  // Stored gradient; empty when nothing reached `id`.
  const Tensor<T>& raw(NodeId id) const { return grads_[id.index]; }
  Tensor<T> of(NodeId id) const;

 private:
  const Tape<T>* tape_;
  std::vector<Tensor<T>> grads_;
};

// Records primitive applications in topological (creation) order. Each
// thread should own its own tape; values are immutable once pushed.
template <typename T>
class Tape {
 public:
  using BackwardFn =
      std::function<void(const Tape&, Gradients<T>&, const Tensor<T>&)>;

  // With record_gradients = false no backward closures are kept (inference).
  explicit Tape(bool record_gradients = true)
      : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId constant(Tensor<T> value) { return push_node(std::move(value), false); }
  NodeId leaf(Tensor<T> value) {
    return push_node(std::move(value), record_gradients_);
  }
  // Leaf that aliases externally owned storage (parameters). The referenced
  // tensor must outlive the tape and stay unmodified while it is in use.
  NodeId reference(const Tensor<T>& value, bool requires_grad) {
    Node node;
    node.external = &value;
    node.requires_grad = requires_grad && record_gradients_;
    nodes_.push_back(std::move(node));
    return last();
  }

  // Appends an op result. The backward closure is stored only when some
  // input requires a gradient.
  NodeId push(Tensor<T> value, std::initializer_list<NodeId> inputs,
              BackwardFn backward) {
    bool needs = false;
    if (record_gradients_) {
      for (NodeId in : inputs) needs = needs || nodes_[in.index].requires_grad;
    }
    return push_with(std::move(value), needs, std::move(backward));
  }
  NodeId push(Tensor<T> value, const std::vector<NodeId>& inputs,
              BackwardFn backward) {
    bool needs = false;
    if (record_gradients_) {
      for (NodeId in : inputs) needs = needs || nodes_[in.index].requires_grad;
    }
    return push_with(std::move(value), needs, std::move(backward));
  }

  const Tensor<T>& value(NodeId id) const {
    const Node& n = nodes_.at(id.index);
    return n.external ? *n.external : n.owned;
  }
  bool requires_grad(NodeId id) const { return nodes_.at(id.index).requires_grad; }
  bool records_gradients() const { return record_gradients_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend Gradients<T> backward<>(const Tape<T>&, NodeId);

  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  NodeId last() const {
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }
  NodeId push_node(Tensor<T> value, bool requires_grad) {
    Node node;
    node.owned = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return last();
  }
  NodeId push_with(Tensor<T> value, bool needs, BackwardFn backward) {
    Node node;
    node.owned = std::move(value);
    node.requires_grad = needs;
    if (needs) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return last();
  }

  bool record_gradients_;
  std::vector<Node> nodes_;
};

template <typename T>
Gradients<T>::Gradients(const Tape<T>& tape)
    : tape_(&tape), grads_(tape.size()) {}

template <typename T>
Tensor<T>& Gradients<T>::accum(NodeId id) {
  Tensor<T>& g = grads_.at(id.index);
  if (g.empty()) g = Tensor<T>::zeros_like(tape_->value(id));
  return g;
}

template <typename T>
Tensor<T> Gradients<T>::of(NodeId id) const {
  const Tensor<T>& g = grads_.at(id.index);
  return g.empty() ? Tensor<T>::zeros_like(tape_->value(id)) : g;
}

// Reverse-mode sweep from a scalar loss node.
template <typename T>
Gradients<T> backward(const Tape<T>& tape, NodeId loss) {
  if (!tape.value(loss).is_scalar()) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_string(tape.value(loss).shape()));
  }
  Gradients<T> grads(tape);
  grads.accum(loss)[0] = T{1};
  for (std::int64_t i = loss.index; i >= 0; --i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    const auto& node = tape.nodes_[id.index];
    if (!node.backward || !grads.has(id)) continue;
    // Closures only write to strictly earlier nodes, so this stays valid.
    node.backward(tape, grads, grads.raw(id));
  }
  return grads;
}

}  // namespace storyctl::ad
