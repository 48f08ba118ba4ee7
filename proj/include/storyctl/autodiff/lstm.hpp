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
#include <utility>
#include <vector>

#include "storyctl/autodiff/ops.hpp"

namespace storyctl::ad {

// Gate blocks are stacked row-wise in the order input, forget, output,
// candidate: weights is (4d × (a + d)), bias is (4d).
template <typename T>
struct LstmWeights {
  Tensor<T> weights;
  Tensor<T> bias;

  LstmWeights() = default;
  LstmWeights(std::size_t input_dim, std::size_t state_dim)
      : weights({4 * state_dim, input_dim + state_dim}), bias({4 * state_dim}) {}
  LstmWeights(Tensor<T> w, Tensor<T> b) : weights(std::move(w)), bias(std::move(b)) {
    validate();
  }

  std::size_t state_dim() const { return bias.size() / 4; }
  std::size_t input_dim() const { return weights.cols() - state_dim(); }

  void validate() const {
    if (weights.rank() != 2 || bias.rank() != 1 || bias.size() % 4 != 0 ||
        weights.rows() != bias.size() || weights.cols() <= bias.size() / 4) {
      throw ContractError("lstm: inconsistent weights " +
                          shape_string(weights.shape()) + " / bias " +
                          shape_string(bias.shape()));
    }
  }
};

namespace detail {

template <typename T>
struct LstmCache {
  Tensor<T> h, c, gates, tanh_c;  // gates holds activated i, f, o, g
};

template <typename T>
LstmCache<T> lstm_forward(const Tensor<T>& x, const Tensor<T>& h_prev,
                          const Tensor<T>& c_prev, const Tensor<T>& w,
                          const Tensor<T>& b) {
  const std::size_t d = b.size() / 4;
  require(b.rank() == 1 && b.size() == 4 * d && d > 0 && w.rank() == 2 &&
              w.rows() == 4 * d && h_prev.size() == d && c_prev.size() == d &&
              w.cols() == x.size() + d,
          "lstm_cell: x " + shape_string(x.shape()) + ", h " +
              shape_string(h_prev.shape()) + ", c " + shape_string(c_prev.shape()) +
              " against weights " + shape_string(w.shape()));
  const std::size_t a = x.size();
  const auto wm = as_matrix(w);
  LstmCache<T> out{Tensor<T>({d}), Tensor<T>({d}), b, Tensor<T>({d})};
  auto z = as_vector(out.gates);
  z.noalias() += wm.leftCols(a) * as_vector(x);
  z.noalias() += wm.rightCols(d) * as_vector(h_prev);
  for (std::size_t k = 0; k < 3 * d; ++k) out.gates[k] = T{1} / (T{1} + std::exp(-out.gates[k]));
  for (std::size_t k = 3 * d; k < 4 * d; ++k) out.gates[k] = std::tanh(out.gates[k]);
  for (std::size_t k = 0; k < d; ++k) {
    const T i = out.gates[k], f = out.gates[d + k], o = out.gates[2 * d + k],
            g = out.gates[3 * d + k];
    out.c[k] = f * c_prev[k] + i * g;
    out.tanh_c[k] = std::tanh(out.c[k]);
    out.h[k] = o * out.tanh_c[k];
  }
  return out;
}

}  // namespace detail

// Plain evaluation of one LSTM step: returns (h, c).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> lstm_cell(const Tensor<T>& x, const Tensor<T>& h_prev,
                                          const Tensor<T>& c_prev,
                                          const LstmWeights<T>& w) {
  auto cache = detail::lstm_forward(x, h_prev, c_prev, w.weights, w.bias);
  return {std::move(cache.h), std::move(cache.c)};
}

struct LstmNodes {
  NodeId h;
  NodeId c;
};

// Recorded LSTM step with a fused backward.
template <typename T>
LstmNodes lstm_cell(Tape<T>& tape, NodeId x, NodeId h_prev, NodeId c_prev,
                    NodeId w, NodeId b) {
  auto cache = detail::lstm_forward(tape.value(x), tape.value(h_prev),
                                    tape.value(c_prev), tape.value(w), tape.value(b));
  const std::size_t d = cache.h.size();
  std::vector<T> hc(cache.h.values().begin(), cache.h.values().end());
  hc.insert(hc.end(), cache.c.values().begin(), cache.c.values().end());
  Tensor<T> gates = std::move(cache.gates);
  Tensor<T> tanh_c = std::move(cache.tanh_c);
  auto backward = [x, h_prev, c_prev, w, b, d, gates = std::move(gates),
                   tanh_c = std::move(tanh_c)](const Tape<T>& t, Gradients<T>& g,
                                               const Tensor<T>& up) {
    const Tensor<T>& cp = t.value(c_prev);
    Tensor<T> dz({4 * d});
    Tensor<T> dc_prev({d});
    for (std::size_t k = 0; k < d; ++k) {
      const T i = gates[k], f = gates[d + k], o = gates[2 * d + k], gg = gates[3 * d + k];
      const T gh = up[k];
      const T dc = up[d + k] + gh * o * (T{1} - tanh_c[k] * tanh_c[k]);
      dz[k] = dc * gg * i * (T{1} - i);
      dz[d + k] = dc * cp[k] * f * (T{1} - f);
      dz[2 * d + k] = gh * tanh_c[k] * o * (T{1} - o);
      dz[3 * d + k] = dc * i * (T{1} - gg * gg);
      dc_prev[k] = dc * f;
    }
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& hv = t.value(h_prev);
    const std::size_t a = xv.size();
    const auto dzv = detail::as_vector(dz);
    if (t.requires_grad(w)) {
      auto gw = detail::as_matrix(g.accum(w));
      gw.leftCols(a).noalias() += dzv * detail::as_vector(xv).transpose();
      gw.rightCols(d).noalias() += dzv * detail::as_vector(hv).transpose();
    }
    if (t.requires_grad(b)) g.accum(b) += dz;
    const auto wm = detail::as_matrix(t.value(w));
    if (t.requires_grad(x)) {
      detail::as_vector(g.accum(x)).noalias() += wm.leftCols(a).transpose() * dzv;
    }
    if (t.requires_grad(h_prev)) {
      detail::as_vector(g.accum(h_prev)).noalias() += wm.rightCols(d).transpose() * dzv;
    }
    if (t.requires_grad(c_prev)) g.accum(c_prev) += dc_prev;
  };
  const NodeId joint = tape.push(Tensor<T>::vector(std::move(hc)),
                                 {x, h_prev, c_prev, w, b}, std::move(backward));
  return {slice(tape, joint, 0, d), slice(tape, joint, d, d)};
}

}  // namespace storyctl::ad
