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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/corpus/embeddings.hpp"
#include "storyctl/corpus/frames.hpp"

namespace storyctl {

// Mean, top-k principal directions (rows, orthonormal) and their variances.
struct PcaProjection {
  Vec mean;
  std::vector<Vec> components;  // k rows of input dimension
  Vec explained_variance;       // non-increasing

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.size(); }

  Vec project(const Vec& x) const {
    if (x.size() != mean.size()) {
      throw ContractError("pca: input dimension " + std::to_string(x.size()) + " vs " +
                          std::to_string(mean.size()));
    }
    Vec out(components.size(), 0.0);
    for (std::size_t r = 0; r < components.size(); ++r) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += components[r][i] * (x[i] - mean[i]);
      out[r] = acc;
    }
    return out;
  }

  Vec reconstruct(const Vec& code) const {
    Vec out = mean;
    for (std::size_t r = 0; r < components.size(); ++r) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += code[r] * components[r][i];
    }
    return out;
  }

  friend bool operator==(const PcaProjection&, const PcaProjection&) = default;
};

// Top-k eigenvectors of the sample covariance (denominator n - 1). Each
// component's largest-magnitude entry is made positive so signs are stable.
inline PcaProjection fit_pca(const std::vector<Vec>& rows, std::size_t k = 64) {
  if (rows.size() < k || k == 0) {
    throw ContractError("fit_pca: need at least k = " + std::to_string(k) + " rows, got " +
                        std::to_string(rows.size()));
  }
  const std::size_t d = rows.front().size();
  if (k > d) {
    throw ContractError("fit_pca: k = " + std::to_string(k) + " exceeds dimension " +
                        std::to_string(d));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) throw ContractError("fit_pca: ragged input rows");
    for (std::size_t c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const double denom = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigensolver failed");

  PcaProjection p;
  p.mean.assign(mean.data(), mean.data() + d);
  const auto& values = solver.eigenvalues();    // ascending
  const auto& vectors = solver.eigenvectors();  // columns
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - j);
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.components.emplace_back(v.data(), v.data() + d);
    p.explained_variance.push_back(std::max(0.0, values(col)));
  }
  return p;
}

struct PredicateVector {
  Vec values;
  bool degenerate = false;  // empty or entirely unknown predicate set
};

// Proj · (Σ emb(p) − mean).
inline PredicateVector predicate_vector(const std::vector<std::string>& predicates,
                                        const EmbeddingTable& table,
                                        const PcaProjection& proj) {
  PredicateVector out;
  out.degenerate = std::none_of(predicates.begin(), predicates.end(),
                                [&](const std::string& p) { return table.find(p) != nullptr; });
  out.values = proj.project(predicate_sum(predicates, table));
  return out;
}

inline nlohmann::json to_json(const PcaProjection& p) {
  return {{"schema_version", kArtifactSchemaVersion},
          {"kind", "pca_projection"},
          {"mean", p.mean},
          {"components", p.components},
          {"explained_variance", p.explained_variance}};
}

inline PcaProjection pca_from_json(const nlohmann::json& j) {
  require_artifact(j, "pca_projection");
  PcaProjection p;
  p.mean = j.at("mean").get<Vec>();
  p.components = j.at("components").get<std::vector<Vec>>();
  p.explained_variance = j.at("explained_variance").get<Vec>();
  for (const Vec& c : p.components) {
    if (c.size() != p.mean.size()) throw FormatError("pca_projection: ragged components");
  }
  return p;
}

}  // namespace storyctl
