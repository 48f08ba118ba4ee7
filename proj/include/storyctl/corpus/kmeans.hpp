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
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/autodiff/params.hpp"
#include "storyctl/corpus/embeddings.hpp"
#include "storyctl/corpus/frames.hpp"

namespace storyctl {

struct ClusterModel {
  std::vector<Vec> centroids;
  std::uint64_t seed = 0;
  BowMode mode = BowMode::kEmbeddingMean;
  std::vector<double> objective_history;  // within-cluster SS after each assignment
  std::size_t iterations = 0;
  std::vector<std::vector<std::string>> examples;  // sample sentences per cluster

  std::size_t k() const { return centroids.size(); }

  // Nearest centroid; ties go to the lower index.
  std::size_t assign(const Vec& v) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(v, centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }
};

// Lloyd's algorithm with k-means++ seeding drawn from `seed`. Stops when
// assignments no longer change or after max_iter rounds.
inline ClusterModel kmeans(const std::vector<Vec>& vectors, std::size_t k = 5,
                           std::uint64_t seed = 0, std::size_t max_iter = 100) {
  if (k == 0) throw ContractError("kmeans: k must be positive");
  if (vectors.empty()) throw ContractError("kmeans: no vectors");
  const std::size_t dim = vectors.front().size();
  for (const Vec& v : vectors) {
    if (v.size() != dim) throw ContractError("kmeans: ragged vectors");
  }
  if (std::set<Vec>(vectors.begin(), vectors.end()).size() < k) {
    throw ContractError("kmeans: fewer than k = " + std::to_string(k) + " distinct vectors");
  }

  ClusterModel model;
  model.seed = seed;
  std::mt19937_64 rng(seed);
  const std::size_t n = vectors.size();
  model.centroids.push_back(vectors[rng() % n]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (model.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(vectors[i], model.centroids.back()));
      total += nearest[i];
    }
    double target = ad::unit_uniform(rng) * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      pick = i;
      target -= nearest[i];
      if (target < 0.0) break;
    }
    model.centroids.push_back(vectors[pick]);
  }

  std::vector<std::size_t> assignment(n, k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = model.assign(vectors[i]);
      objective += squared_distance(vectors[i], model.centroids[c]);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    model.objective_history.push_back(objective);
    model.iterations = iter + 1;
    if (!changed) break;
    std::vector<Vec> sums(k, Vec(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[assignment[i]][j] += vectors[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) {
        model.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
  }
  return model;
}

inline double kmeans_objective(const ClusterModel& model, const std::vector<Vec>& vectors) {
  double total = 0.0;
  for (const Vec& v : vectors) total += squared_distance(v, model.centroids[model.assign(v)]);
  return total;
}

inline nlohmann::json to_json(const ClusterModel& m) {
  return {{"schema_version", kArtifactSchemaVersion},
          {"kind", "cluster_model"},
          {"k", m.k()},
          {"seed", m.seed},
          {"bow_mode", m.mode == BowMode::kCounts ? "counts" : "embedding_mean"},
          {"centroids", m.centroids},
          {"objective_history", m.objective_history},
          {"iterations", m.iterations},
          {"examples", m.examples}};
}

inline ClusterModel cluster_model_from_json(const nlohmann::json& j) {
  require_artifact(j, "cluster_model");
  ClusterModel m;
  m.centroids = j.at("centroids").get<std::vector<Vec>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.mode = j.at("bow_mode").get<std::string>() == "counts" ? BowMode::kCounts
                                                           : BowMode::kEmbeddingMean;
  m.objective_history = j.value("objective_history", std::vector<double>{});
  m.iterations = j.value("iterations", std::size_t{0});
  m.examples = j.value("examples", std::vector<std::vector<std::string>>{});
  if (m.centroids.size() != j.at("k").get<std::size_t>()) {
    throw FormatError("cluster_model: k does not match centroid count");
  }
  return m;
}

}  // namespace storyctl
