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

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "storyctl/autodiff/tape.hpp"

namespace storyctl::ad {

// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Named parameter tensors. Non-trainable entries are stored (and saved) but
// never touched by optimizers or initializers.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    bool trainable = true;
  };

  std::size_t add(std::string name, Tensor<T> value, bool trainable = true) {
    if (find(name)) throw ContractError("param store: duplicate '" + name + "'");
    entries_.push_back(Entry{std::move(name), std::move(value), trainable});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t slot) const { return entries_.at(slot); }
  Tensor<T>& value(std::size_t slot) { return entries_.at(slot).value; }
  const Tensor<T>& value(std::size_t slot) const { return entries_.at(slot).value; }
  bool trainable(std::size_t slot) const { return entries_.at(slot).trainable; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    return std::nullopt;
  }
  std::size_t index(const std::string& name) const {
    auto slot = find(name);
    if (!slot) throw ContractError("param store: no parameter '" + name + "'");
    return *slot;
  }

  // Uniform in [-scale, scale] for every trainable entry, in slot order.
  void init_uniform(double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (Entry& e : entries_) {
      if (!e.trainable) continue;
      for (T& v : e.value.values()) {
        v = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * scale);
      }
    }
  }

  std::vector<Tensor<T>> zeros() const {
    std::vector<Tensor<T>> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(Tensor<T>::zeros_like(e.value));
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const Entry& e : entries_) out.add(e.name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

// Per-tape view of a parameter store: each parameter becomes one leaf node,
// created on first use.
template <typename T>
class Binding {
 public:
  Binding(Tape<T>& tape, const ParamStore<T>& store)
      : tape_(&tape), store_(&store), nodes_(store.size()) {}

  NodeId operator()(std::size_t slot) {
    auto& cached = nodes_.at(slot);
    if (!cached) cached = tape_->reference(store_->value(slot), store_->trainable(slot));
    return *cached;
  }

  Tape<T>& tape() { return *tape_; }
  const ParamStore<T>& store() const { return *store_; }

  // Adds this tape's parameter gradients into `into` (indexed by slot).
  void accumulate(const Gradients<T>& grads, std::vector<Tensor<T>>& into) const {
    for (std::size_t slot = 0; slot < nodes_.size(); ++slot) {
      if (nodes_[slot] && grads.has(*nodes_[slot])) into[slot] += grads.raw(*nodes_[slot]);
    }
  }

 private:
  Tape<T>* tape_;
  const ParamStore<T>* store_;
  std::vector<std::optional<NodeId>> nodes_;
};

// Rescales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<Tensor<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (T v : g.values()) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& g : grads) {
      for (T& v : g.values()) v *= factor;
    }
  }
  return norm;
}

}  // namespace storyctl::ad
