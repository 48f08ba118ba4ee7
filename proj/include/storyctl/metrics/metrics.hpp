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

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "storyctl/autodiff/tensor.hpp"
#include "storyctl/corpus/story.hpp"

namespace storyctl {

inline constexpr double kBleuEpsilon = 1e-9;

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++out[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                   t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

// Sentence BLEU-2 against one or more references. Zero bigram matches are
// smoothed to epsilon; no unigram match at all scores 0. An order with no
// n-grams in either candidate or reference is left out of the mean.
inline double bleu2_refs(const Tokens& cand, const std::vector<const Tokens*>& refs) {
  if (cand.empty() || refs.empty()) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 1; n <= 2; ++n) {
    const NgramCounts c = ngrams(cand, n);
    std::map<std::vector<std::string>, std::size_t> max_ref;
    bool ref_has = false;
    for (const Tokens* r : refs) {
      for (const auto& [g, k] : ngrams(*r, n)) {
        max_ref[g] = std::max(max_ref[g], k);
        ref_has = true;
      }
    }
    std::size_t total = 0, matched = 0;
    for (const auto& [g, k] : c) {
      total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(k, it->second);
    }
    if (total == 0 && !ref_has) continue;
    if (n == 1 && matched == 0) return 0.0;
    const double num = matched > 0 ? static_cast<double>(matched) : kBleuEpsilon;
    log_sum += std::log(num / static_cast<double>(std::max<std::size_t>(total, 1)));
    ++orders;
  }
  // Closest reference length; ties prefer the shorter one.
  std::size_t r = refs.front()->size();
  for (const Tokens* ref : refs) {
    const auto d = [&](std::size_t len) {
      return len > cand.size() ? len - cand.size() : cand.size() - len;
    };
    if (d(ref->size()) < d(r) || (d(ref->size()) == d(r) && ref->size() < r)) r = ref->size();
  }
  const double c = static_cast<double>(cand.size());
  const double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(r) / c));
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

}  // namespace detail

// Clipped unigram and bigram precisions, geometric mean, brevity penalty.
// An empty candidate scores 0 and, when `warnings` is given, records why.
inline double bleu2(const Tokens& candidate, const Tokens& reference,
                    std::vector<std::string>* warnings = nullptr) {
  if (candidate.empty()) {
    if (warnings) warnings->push_back("bleu2: empty candidate scored 0");
    return 0.0;
  }
  return detail::bleu2_refs(candidate, {&reference});
}

inline double bleu2_multi(const Tokens& candidate, const std::vector<Tokens>& references) {
  std::vector<const Tokens*> refs;
  for (const auto& r : references) refs.push_back(&r);
  return detail::bleu2_refs(candidate, refs);
}

enum class RougeVariant { kUnigram, kLcs };

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ROUGE-1 (clipped unigram overlap) or ROUGE-L (longest common subsequence)
// as F1.
inline double rouge(const Tokens& candidate, const Tokens& reference, RougeVariant variant) {
  if (candidate.empty() || reference.empty()) {
    throw ContractError("rouge: candidate and reference must be non-empty");
  }
  double overlap = 0.0;
  if (variant == RougeVariant::kLcs) {
    overlap = static_cast<double>(lcs_length(candidate, reference));
  } else {
    const auto c = detail::ngrams(candidate, 1);
    const auto r = detail::ngrams(reference, 1);
    for (const auto& [g, k] : c) {
      auto it = r.find(g);
      if (it != r.end()) overlap += static_cast<double>(std::min(k, it->second));
    }
  }
  if (overlap == 0.0) return 0.0;
  const double p = overlap / static_cast<double>(candidate.size());
  const double rec = overlap / static_cast<double>(reference.size());
  return 2.0 * p * rec / (p + rec);
}

struct MaxAvg {
  double max = 0.0;
  double avg = 0.0;
};

// Max and mean of a metric over a list scored against one reference.
template <typename Metric>
MaxAvg max_and_avg(const std::vector<Tokens>& list, const Tokens& reference, Metric metric) {
  if (list.empty()) throw ContractError("max_and_avg: empty list");
  MaxAvg out{-std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& item : list) {
    const double v = metric(item, reference);
    out.max = std::max(out.max, v);
    out.avg += v;
  }
  out.avg /= static_cast<double>(list.size());
  return out;
}

// Mean BLEU-2 over ordered pairs (i, j), i != j. With `multi_reference`,
// each item is scored once against all the others together.
inline double self_bleu(const std::vector<Tokens>& list, bool multi_reference = false) {
  if (list.size() < 2) throw ContractError("self_bleu: need at least 2 items");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (multi_reference) {
      std::vector<Tokens> others;
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (j != i) others.push_back(list[j]);
      }
      total += bleu2_multi(list[i], others);
      ++count;
      continue;
    }
    for (std::size_t j = 0; j < list.size(); ++j) {
      if (j == i) continue;
      total += bleu2(list[i], list[j]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace storyctl
