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
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyctl/corpus/vocabulary.hpp"

namespace storyctl {

using Vec = std::vector<double>;

// Token -> fixed-dimension vector, read from GloVe text format.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  void add(const std::string& token, Vec v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) {
      throw ContractError("embedding '" + token + "': dimension " + std::to_string(v.size()) +
                          " differs from table dimension " + std::to_string(dim_));
    }
    if (!vectors_.count(token)) order_.push_back(token);
    vectors_[token] = std::move(v);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  const Vec* find(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
  }
  const std::vector<std::string>& tokens() const { return order_; }

  // Restricts the table to `keep` (used to store only what a model needs).
  EmbeddingTable subset(const std::vector<std::string>& keep) const {
    EmbeddingTable out(dim_);
    for (const auto& t : keep) {
      if (const Vec* v = find(t)) out.add(t, *v);
    }
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vec> vectors_;
  std::vector<std::string> order_;
};

inline EmbeddingTable read_glove(std::istream& in, const std::string& source = "embeddings") {
  EmbeddingTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    Vec v;
    std::string field;
    while (ls >> field) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError(source + ":" + std::to_string(number) + ": bad number '" + field + "'");
      }
    }
    if (v.empty()) throw FormatError(source + ":" + std::to_string(number) + ": no values");
    try {
      table.add(token, std::move(v));
    } catch (const ContractError& e) {
      throw FormatError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  if (table.size() == 0) throw FormatError(source + ": no embeddings");
  return table;
}

inline EmbeddingTable load_glove(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open embeddings");
  return read_glove(in, path);
}

inline void write_glove(std::ostream& out, const EmbeddingTable& table) {
  out << std::setprecision(17);
  for (const auto& t : table.tokens()) {
    out << t;
    for (double x : *table.find(t)) out << ' ' << x;
    out << '\n';
  }
}

inline void save_glove(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write embeddings");
  write_glove(out, table);
}

inline double l2_norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Mean of token embeddings (unknown tokens count as zero vectors), then
// L2-normalized; an all-zero mean stays zero.
inline Vec bow_embed(const Tokens& tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw ContractError("bow_embed: empty token list");
  Vec mean(table.dim(), 0.0);
  for (const auto& t : tokens) {
    if (const Vec* v = table.find(t)) {
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*v)[i];
    }
  }
  for (double& x : mean) x /= static_cast<double>(tokens.size());
  const double norm = l2_norm(mean);
  if (norm > 0.0) {
    for (double& x : mean) x /= norm;
  }
  return mean;
}

// Raw count vector over the vocabulary's word ids (<unk> included).
inline Vec bow_counts(const Tokens& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) throw ContractError("bow_counts: empty token list");
  Vec counts(vocab.size(), 0.0);
  for (const auto& t : tokens) counts[static_cast<std::size_t>(vocab.id(t))] += 1.0;
  return counts;
}

enum class BowMode { kEmbeddingMean, kCounts };

struct BowEncoder {
  BowMode mode = BowMode::kEmbeddingMean;
  const EmbeddingTable* table = nullptr;
  const Vocabulary* vocab = nullptr;

  Vec operator()(const Tokens& tokens) const {
    if (mode == BowMode::kCounts) {
      if (!vocab) throw ContractError("bow: count mode needs a vocabulary");
      return bow_counts(tokens, *vocab);
    }
    if (!table) throw ContractError("bow: embedding mode needs an embedding table");
    return bow_embed(tokens, *table);
  }
};

// Sum of predicate embeddings; unknown predicates contribute zero.
inline Vec predicate_sum(const std::vector<std::string>& predicates, const EmbeddingTable& table) {
  Vec sum(table.dim(), 0.0);
  for (const auto& p : predicates) {
    if (const Vec* v = table.find(p)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    }
  }
  return sum;
}

}  // namespace storyctl
