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
#include <span>
#include <vector>

#include "storyctl/autodiff/params.hpp"

namespace storyctl::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t step = 0;
};

// Bias-corrected Adam update over parallel spans of parameters and
// gradients. Moments are allocated on the first call.
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) {
    throw ContractError("adam: " + std::to_string(params.size()) + " params vs " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].require_same_shape(grads[i], "adam");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor<T>::zeros_like(p));
      state.v.push_back(Tensor<T>::zeros_like(p));
    }
  } else if (state.m.size() != params.size()) {
    throw ContractError("adam: state tracks " + std::to_string(state.m.size()) +
                        " tensors, got " + std::to_string(params.size()));
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].require_same_shape(state.m[i], "adam state");
    auto p = params[i].values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correct1;
      const double v_hat = vk / correct2;
      p[k] = static_cast<T>(p[k] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

// Store overload: only trainable entries move; frozen tables stay
// bit-identical.
template <typename T>
void adam_step(ParamStore<T>& store, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state) {
  if (grads.size() != store.size()) {
    throw ContractError("adam: gradient count does not match parameter store");
  }
  std::vector<Tensor<T>*> params;
  std::vector<Tensor<T>> trainable;
  std::vector<Tensor<T>> trainable_grads;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store.trainable(i)) continue;
    params.push_back(&store.value(i));
    trainable.push_back(std::move(store.value(i)));
    trainable_grads.push_back(grads[i]);
  }
  adam_step<T>(std::span<Tensor<T>>(trainable),
               std::span<const Tensor<T>>(trainable_grads), state);
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = std::move(trainable[i]);
}

}  // namespace storyctl::ad
