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
#include <map>
#include <random>

#include "storyctl/corpus/story.hpp"

// Brute-force metric references, written independently of the library.
namespace storyctl::oracle {

// Occurrences of the n-gram starting at t[i] inside u, by direct scanning.
inline std::size_t count_in(const Tokens& t, std::size_t i, std::size_t n, const Tokens& u) {
  std::size_t hits = 0;
  for (std::size_t j = 0; j + n <= u.size(); ++j) {
    bool same = true;
    for (std::size_t k = 0; k < n; ++k) same = same && t[i + k] == u[j + k];
    hits += same;
  }
  return hits;
}

inline double oracle_bleu2(const Tokens& c, const Tokens& r) {
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 2; ++n) {
    const std::size_t total = c.size() >= n ? c.size() - n + 1 : 0;
    const bool ref_has = r.size() >= n;
    if (total == 0 && !ref_has) continue;
    // Clipped count: each distinct n-gram contributes min(count in c, count in r);
    // credit it at its first occurrence only.
    double matched = 0.0;
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
      bool first = true;
      for (std::size_t j = 0; j < i; ++j) {
        bool same = true;
        for (std::size_t k = 0; k < n; ++k) same = same && c[i + k] == c[j + k];
        if (same) first = false;
      }
      if (first) matched += static_cast<double>(std::min(count_in(c, i, n, c), count_in(c, i, n, r)));
    }
    if (n == 1 && matched == 0.0) return 0.0;
    log_sum += std::log((matched > 0 ? matched : 1e-9) / static_cast<double>(std::max<std::size_t>(total, 1)));
    ++orders;
  }
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size())));
  return bp * std::exp(log_sum / orders);
}

inline std::size_t oracle_lcs(const Tokens& a, const Tokens& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t v = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    return memo[key] = v;
  };
  return go(0, 0);
}

inline double oracle_rouge1(const Tokens& c, const Tokens& r) {
  double overlap = 0.0;
  std::vector<bool> used(r.size(), false);
  for (const auto& t : c) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == t) {
        used[j] = true;
        overlap += 1.0;
        break;
      }
    }
  }
  if (overlap == 0.0) return 0.0;
  const double p = overlap / static_cast<double>(c.size()), q = overlap / static_cast<double>(r.size());
  return 2 * p * q / (p + q);
}

inline double oracle_rougel(const Tokens& c, const Tokens& r) {
  const double l = static_cast<double>(oracle_lcs(c, r));
  if (l == 0) return 0.0;
  const double p = l / static_cast<double>(c.size()), q = l / static_cast<double>(r.size());
  return 2 * p * q / (p + q);
}

inline Tokens random_sentence(std::mt19937_64& rng, std::size_t min_len = 1) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "."};
  Tokens out(min_len + rng() % 8);
  for (auto& t : out) t = words[rng() % words.size()];
  return out;
}

}  // namespace storyctl::oracle
