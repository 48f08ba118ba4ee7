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
#include <functional>
#include <stdexcept>
#include <vector>

#include "storyctl/autodiff/params.hpp"

namespace storyctl::ad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t tensor = 0;  // location of the worst coordinate
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

using ScalarFn = std::function<double(const std::vector<Tensor<double>>&)>;

// Compares `analytic` against central differences of f around theta.
// Relative error per coordinate is |a - n| / (|a| + |n| + 1e-12).
inline GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor<double>> theta,
                                  const std::vector<Tensor<double>>& analytic,
                                  double eps = 1e-5) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw ContractError("grad_check: step must lie in (0, 1e-2]");
  }
  if (analytic.size() != theta.size()) {
    throw ContractError("grad_check: analytic gradient count mismatch");
  }
  auto evaluate = [&]() {
    const double v = f(theta);
    if (!std::isfinite(v)) throw std::domain_error("grad_check: f(theta) is not finite");
    return v;
  };
  evaluate();
  GradCheckReport report;
  for (std::size_t t = 0; t < theta.size(); ++t) {
    theta[t].require_same_shape(analytic[t], "grad_check");
    for (std::size_t i = 0; i < theta[t].size(); ++i) {
      const double saved = theta[t][i];
      theta[t][i] = saved + eps;
      const double up = evaluate();
      theta[t][i] = saved - eps;
      const double down = evaluate();
      theta[t][i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      ++report.coordinates;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.tensor = t;
        report.index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

// Gradient check of a loss recorded against a parameter store. `build`
// records the loss on the given tape and returns its node. Frozen entries are
// skipped; the store is restored afterwards.
template <typename Build>
GradCheckReport grad_check_store(ParamStore<double>& store, Build&& build,
                                 double eps = 1e-5) {
  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < store.size(); ++s) {
    if (store.trainable(s)) slots.push_back(s);
  }
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    Binding<double> bind(tape, store);
    const NodeId loss = build(tape, bind);
    const Gradients<double> grads = backward(tape, loss);
    std::vector<Tensor<double>> all = store.zeros();
    bind.accumulate(grads, all);
    for (std::size_t s : slots) analytic.push_back(std::move(all[s]));
  }
  std::vector<Tensor<double>> theta;
  for (std::size_t s : slots) theta.push_back(store.value(s));
  const std::vector<Tensor<double>> original = theta;
  auto f = [&](const std::vector<Tensor<double>>& values) {
    for (std::size_t k = 0; k < slots.size(); ++k) store.value(slots[k]) = values[k];
    Tape<double> tape(false);
    Binding<double> bind(tape, store);
    return tape.value(build(tape, bind)).item();
  };
  GradCheckReport report = grad_check(f, theta, analytic, eps);
  for (std::size_t k = 0; k < slots.size(); ++k) store.value(slots[k]) = original[k];
  return report;
}

}  // namespace storyctl::ad
