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

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "storyctl/autodiff/tape.hpp"

namespace storyctl::ad {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<const RowMatrix<T>> as_matrix(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}
template <typename T>
Eigen::Map<RowMatrix<T>> as_matrix(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}
template <typename T>
Eigen::Map<const ColVector<T>> as_vector(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}
template <typename T>
Eigen::Map<ColVector<T>> as_vector(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

template <typename T>
void require_vector(const Tensor<T>& t, const char* op) {
  require(t.rank() == 1, std::string(op) + ": expected a vector, got " +
                             shape_string(t.shape()));
}

template <typename T>
T log_sum_exp(std::span<const T> x) {
  T hi = -std::numeric_limits<T>::infinity();
  for (T v : x) hi = std::max(hi, v);
  T acc{0};
  for (T v : x) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace detail

// Max-subtracted softmax on a plain vector.
template <typename T>
Tensor<T> softmax_values(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  T hi = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) hi = std::max(hi, x[i]);
  T total{0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - hi);
    total += y[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= total;
  return y;
}

template <typename T>
NodeId add(Tape<T>& tape, NodeId a, NodeId b) {
  const Tensor<T>& av = tape.value(a);
  av.require_same_shape(tape.value(b), "add");
  Tensor<T> out = av;
  out += tape.value(b);
  return tape.push(std::move(out), {a, b},
                   [a, b](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     if (t.requires_grad(a)) g.accum(a) += up;
                     if (t.requires_grad(b)) g.accum(b) += up;
                   });
}

template <typename T>
NodeId sub(Tape<T>& tape, NodeId a, NodeId b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  av.require_same_shape(bv, "sub");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.push(std::move(out), {a, b},
                   [a, b](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     if (t.requires_grad(a)) g.accum(a) += up;
                     if (t.requires_grad(b)) {
                       Tensor<T>& gb = g.accum(b);
                       for (std::size_t i = 0; i < up.size(); ++i) gb[i] -= up[i];
                     }
                   });
}

// Elementwise product.
template <typename T>
NodeId mul(Tape<T>& tape, NodeId a, NodeId b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  av.require_same_shape(bv, "mul");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.push(std::move(out), {a, b},
                   [a, b](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& av = t.value(a);
                     const Tensor<T>& bv = t.value(b);
                     if (t.requires_grad(a)) {
                       Tensor<T>& ga = g.accum(a);
                       for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * bv[i];
                     }
                     if (t.requires_grad(b)) {
                       Tensor<T>& gb = g.accum(b);
                       for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * av[i];
                     }
                   });
}

template <typename T>
NodeId scale(Tape<T>& tape, NodeId a, T factor) {
  Tensor<T> out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return tape.push(std::move(out), {a},
                   [a, factor](const Tape<T>&, Gradients<T>& g, const Tensor<T>& up) {
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < up.size(); ++i) ga[i] += factor * up[i];
                   });
}

template <typename T>
NodeId sum(Tape<T>& tape, NodeId a) {
  const Tensor<T>& av = tape.value(a);
  T total{0};
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i];
  return tape.push(Tensor<T>::scalar(total), {a},
                   [a](const Tape<T>&, Gradients<T>& g, const Tensor<T>& up) {
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += up[0];
                   });
}

template <typename T>
NodeId dot(Tape<T>& tape, NodeId a, NodeId b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  av.require_same_shape(bv, "dot");
  T total{0};
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  return tape.push(Tensor<T>::scalar(total), {a, b},
                   [a, b](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& av = t.value(a);
                     const Tensor<T>& bv = t.value(b);
                     if (t.requires_grad(a)) {
                       Tensor<T>& ga = g.accum(a);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += up[0] * bv[i];
                     }
                     if (t.requires_grad(b)) {
                       Tensor<T>& gb = g.accum(b);
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += up[0] * av[i];
                     }
                   });
}

// W x for W of shape {r, c} and x of shape {c}.
template <typename T>
NodeId matvec(Tape<T>& tape, NodeId w, NodeId x) {
  const Tensor<T>& wv = tape.value(w);
  const Tensor<T>& xv = tape.value(x);
  detail::require_vector(xv, "matvec");
  detail::require(wv.rank() == 2 && wv.cols() == xv.size(),
                  "matvec: " + shape_string(wv.shape()) + " x " +
                      shape_string(xv.shape()));
  Tensor<T> out({wv.rows()});
  detail::as_vector(out).noalias() = detail::as_matrix(wv) * detail::as_vector(xv);
  return tape.push(std::move(out), {w, x},
                   [w, x](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const auto upv = detail::as_vector(up);
                     if (t.requires_grad(w)) {
                       detail::as_matrix(g.accum(w)).noalias() +=
                           upv * detail::as_vector(t.value(x)).transpose();
                     }
                     if (t.requires_grad(x)) {
                       detail::as_vector(g.accum(x)).noalias() +=
                           detail::as_matrix(t.value(w)).transpose() * upv;
                     }
                   });
}

// Wᵀ x for W of shape {r, c} and x of shape {r}.
template <typename T>
NodeId matvec_t(Tape<T>& tape, NodeId w, NodeId x) {
  const Tensor<T>& wv = tape.value(w);
  const Tensor<T>& xv = tape.value(x);
  detail::require_vector(xv, "matvec_t");
  detail::require(wv.rank() == 2 && wv.rows() == xv.size(),
                  "matvec_t: " + shape_string(wv.shape()) + "ᵀ x " +
                      shape_string(xv.shape()));
  Tensor<T> out({wv.cols()});
  detail::as_vector(out).noalias() =
      detail::as_matrix(wv).transpose() * detail::as_vector(xv);
  return tape.push(std::move(out), {w, x},
                   [w, x](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const auto upv = detail::as_vector(up);
                     if (t.requires_grad(w)) {
                       detail::as_matrix(g.accum(w)).noalias() +=
                           detail::as_vector(t.value(x)) * upv.transpose();
                     }
                     if (t.requires_grad(x)) {
                       detail::as_vector(g.accum(x)).noalias() +=
                           detail::as_matrix(t.value(w)) * upv;
                     }
                   });
}

// W x + b.
template <typename T>
NodeId affine(Tape<T>& tape, NodeId w, NodeId x, NodeId b) {
  const Tensor<T>& wv = tape.value(w);
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& bv = tape.value(b);
  detail::require_vector(xv, "affine");
  detail::require(wv.rank() == 2 && wv.cols() == xv.size() &&
                      bv.size() == wv.rows(),
                  "affine: " + shape_string(wv.shape()) + " x " +
                      shape_string(xv.shape()) + " + " + shape_string(bv.shape()));
  Tensor<T> out = bv;
  detail::as_vector(out).noalias() += detail::as_matrix(wv) * detail::as_vector(xv);
  return tape.push(std::move(out), {w, x, b},
                   [w, x, b](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const auto upv = detail::as_vector(up);
                     if (t.requires_grad(w)) {
                       detail::as_matrix(g.accum(w)).noalias() +=
                           upv * detail::as_vector(t.value(x)).transpose();
                     }
                     if (t.requires_grad(x)) {
                       detail::as_vector(g.accum(x)).noalias() +=
                           detail::as_matrix(t.value(w)).transpose() * upv;
                     }
                     if (t.requires_grad(b)) g.accum(b) += up;
                   });
}

template <typename T>
NodeId concat(Tape<T>& tape, const std::vector<NodeId>& parts) {
  detail::require(!parts.empty(), "concat: no inputs");
  std::vector<T> values;
  for (NodeId p : parts) {
    const Tensor<T>& pv = tape.value(p);
    detail::require_vector(pv, "concat");
    values.insert(values.end(), pv.values().begin(), pv.values().end());
  }
  return tape.push(Tensor<T>::vector(std::move(values)), parts,
                   [parts](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     std::size_t offset = 0;
                     for (NodeId p : parts) {
                       const std::size_t n = t.value(p).size();
                       if (t.requires_grad(p)) {
                         Tensor<T>& gp = g.accum(p);
                         for (std::size_t i = 0; i < n; ++i) gp[i] += up[offset + i];
                       }
                       offset += n;
                     }
                   });
}

template <typename T>
NodeId slice(Tape<T>& tape, NodeId a, std::size_t offset, std::size_t length) {
  const Tensor<T>& av = tape.value(a);
  detail::require_vector(av, "slice");
  detail::require(length > 0 && offset + length <= av.size(),
                  "slice: [" + std::to_string(offset) + ", +" +
                      std::to_string(length) + ") of " + shape_string(av.shape()));
  std::vector<T> values(av.values().begin() + offset,
                        av.values().begin() + offset + length);
  return tape.push(Tensor<T>::vector(std::move(values)), {a},
                   [a, offset](const Tape<T>&, Gradients<T>& g, const Tensor<T>& up) {
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < up.size(); ++i) ga[offset + i] += up[i];
                   });
}

template <typename T>
NodeId sigmoid(Tape<T>& tape, NodeId a) {
  Tensor<T> out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-out[i]));
  const NodeId self{static_cast<std::uint32_t>(tape.size())};
  return tape.push(std::move(out), {a},
                   [a, self](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& y = t.value(self);
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * y[i] * (T{1} - y[i]);
                   });
}

template <typename T>
NodeId tanh(Tape<T>& tape, NodeId a) {
  Tensor<T> out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const NodeId self{static_cast<std::uint32_t>(tape.size())};
  return tape.push(std::move(out), {a},
                   [a, self](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& y = t.value(self);
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * (T{1} - y[i] * y[i]);
                   });
}

template <typename T>
NodeId softmax(Tape<T>& tape, NodeId a) {
  detail::require_vector(tape.value(a), "softmax");
  const NodeId self{static_cast<std::uint32_t>(tape.size())};
  return tape.push(softmax_values(tape.value(a)), {a},
                   [a, self](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& y = t.value(self);
                     T inner{0};
                     for (std::size_t i = 0; i < y.size(); ++i) inner += up[i] * y[i];
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (up[i] - inner);
                   });
}

template <typename T>
NodeId log_softmax(Tape<T>& tape, NodeId a) {
  const Tensor<T>& av = tape.value(a);
  detail::require_vector(av, "log_softmax");
  const T lse = detail::log_sum_exp(av.values());
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lse;
  const NodeId self{static_cast<std::uint32_t>(tape.size())};
  return tape.push(std::move(out), {a},
                   [a, self](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& y = t.value(self);
                     T total{0};
                     for (std::size_t i = 0; i < up.size(); ++i) total += up[i];
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] - std::exp(y[i]) * total;
                   });
}

// Scalar a[index].
template <typename T>
NodeId pick(Tape<T>& tape, NodeId a, std::size_t index) {
  const Tensor<T>& av = tape.value(a);
  detail::require(index < av.size(), "pick: index " + std::to_string(index) +
                                         " out of " + shape_string(av.shape()));
  return tape.push(Tensor<T>::scalar(av[index]), {a},
                   [a, index](const Tape<T>&, Gradients<T>& g, const Tensor<T>& up) {
                     g.accum(a)[index] += up[0];
                   });
}

// Row `index` of a matrix (embedding lookup).
template <typename T>
NodeId row(Tape<T>& tape, NodeId m, std::size_t index) {
  const Tensor<T>& mv = tape.value(m);
  detail::require(mv.rank() == 2 && index < mv.rows(),
                  "row: index " + std::to_string(index) + " of " +
                      shape_string(mv.shape()));
  const std::size_t cols = mv.cols();
  std::vector<T> values(mv.data() + index * cols, mv.data() + (index + 1) * cols);
  return tape.push(Tensor<T>::vector(std::move(values)), {m},
                   [m, index, cols](const Tape<T>&, Gradients<T>& g, const Tensor<T>& up) {
                     Tensor<T>& gm = g.accum(m);
                     for (std::size_t i = 0; i < cols; ++i) gm[index * cols + i] += up[i];
                   });
}

// Stacks equal-length vectors as matrix rows.
template <typename T>
NodeId stack(Tape<T>& tape, const std::vector<NodeId>& rows) {
  detail::require(!rows.empty(), "stack: no rows");
  const std::size_t cols = tape.value(rows.front()).size();
  std::vector<T> values;
  values.reserve(rows.size() * cols);
  for (NodeId r : rows) {
    const Tensor<T>& rv = tape.value(r);
    detail::require(rv.rank() == 1 && rv.size() == cols,
                    "stack: ragged row " + shape_string(rv.shape()));
    values.insert(values.end(), rv.values().begin(), rv.values().end());
  }
  return tape.push(Tensor<T>({rows.size(), cols}, std::move(values)), rows,
                   [rows, cols](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     for (std::size_t r = 0; r < rows.size(); ++r) {
                       if (!t.requires_grad(rows[r])) continue;
                       Tensor<T>& gr = g.accum(rows[r]);
                       for (std::size_t i = 0; i < cols; ++i) gr[i] += up[r * cols + i];
                     }
                   });
}

// −log softmax(logits)[target], fused.
template <typename T>
NodeId softmax_cross_entropy(Tape<T>& tape, NodeId logits, std::size_t target) {
  const Tensor<T>& zv = tape.value(logits);
  detail::require_vector(zv, "softmax_cross_entropy");
  detail::require(target < zv.size(), "softmax_cross_entropy: target " +
                                          std::to_string(target) + " out of " +
                                          shape_string(zv.shape()));
  const T loss = detail::log_sum_exp(zv.values()) - zv[target];
  return tape.push(Tensor<T>::scalar(loss), {logits},
                   [logits, target](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T> p = softmax_values(t.value(logits));
                     Tensor<T>& gz = g.accum(logits);
                     for (std::size_t i = 0; i < p.size(); ++i) {
                       gz[i] += up[0] * (p[i] - (i == target ? T{1} : T{0}));
                     }
                   });
}

// Mean squared error against a constant target.
template <typename T>
NodeId mse(Tape<T>& tape, NodeId a, const Tensor<T>& target) {
  const Tensor<T>& av = tape.value(a);
  av.require_same_shape(target, "mse");
  const T n = static_cast<T>(av.size());
  T total{0};
  for (std::size_t i = 0; i < av.size(); ++i) {
    const T d = av[i] - target[i];
    total += d * d;
  }
  return tape.push(Tensor<T>::scalar(total / n), {a},
                   [a, target, n](const Tape<T>& t, Gradients<T>& g, const Tensor<T>& up) {
                     const Tensor<T>& av = t.value(a);
                     Tensor<T>& ga = g.accum(a);
                     for (std::size_t i = 0; i < av.size(); ++i) {
                       ga[i] += up[0] * T{2} * (av[i] - target[i]) / n;
                     }
                   });
}

}  // namespace storyctl::ad
