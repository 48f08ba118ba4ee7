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
#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "storyctl/decoding/decode.hpp"
#include "storyctl/model/seq2seq.hpp"

namespace storyctl {

struct RerankConfig {
  double lambda = 1.0;  // weight of the reverse score
  std::size_t k = 3;    // outputs kept

  void validate() const {
    if (!(lambda >= 0.0)) throw ContractError("rerank: lambda must be non-negative");
    if (k < 1) throw ContractError("rerank: k must be at least 1");
  }
};

struct RerankItem {
  double forward = 0.0;    // log p(y | x)
  std::size_t length = 0;  // |y|, <eos> included
  double reverse = 0.0;    // log p(x | y)

  double combined(double lambda) const {
    return forward / static_cast<double>(length) + lambda * reverse;
  }
};

// Indices of the k best items by forward/|y| + lambda * reverse, descending;
// equal scores keep input order.
inline std::vector<std::size_t> rerank(const std::vector<RerankItem>& items, double lambda, std::size_t k) {
  RerankConfig{lambda, k}.validate();
  if (items.empty()) throw ContractError("rerank: no candidates");
  if (k > items.size()) {
    throw ContractError("rerank: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(items.size()) + " candidates");
  }
  for (const auto& it : items) {
    if (it.length == 0) throw ContractError("rerank: candidate of length 0");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].combined(lambda) > items[b].combined(lambda);
  });
  order.resize(k);
  return order;
}

// Generates one continuation per top training frame set, scores each with
// the reverse model and keeps the k best. Each item records both score
// components.
template <typename T, typename U>
GenerationList rerank_frame_sets(const Seq2Seq<T>& model, const Seq2Seq<U>& reverse,
                                 const std::string& context_id, std::span<const Tokens> context,
                                 const RerankConfig& config, std::size_t beam = 1) {
  config.validate();
  const auto& embedder = model.embedder();
  if (embedder.type != AttributeType::kFrames) {
    throw ContractError("rerank: generation model must be conditioned on frames, not " +
                        to_string(embedder.type));
  }
  if (reverse.embedder().type != AttributeType::kNone) {
    throw ContractError("rerank: reverse model must be unconditioned");
  }
  if (embedder.top_sets.empty()) throw ContractError("rerank: model has no frame-set candidates");
  const auto source = model.vocab().encode_context(context);
  const auto reverse_target = reverse.vocab().encode_context(context);
  GenerationList candidates;
  std::vector<RerankItem> items;
  for (const FrameSet& set : embedder.top_sets) {
    const AttributeValue value = AttributeValue::of_frames(set);
    const Hypothesis h = beam == 1 ? greedy(model, source, value)
                                   : beam_search(model, source, value, beam).front();
    Generation g = make_generation(model, context_id, "rerank", value, h);
    Example back;
    back.source = reverse.vocab().encode(g.tokens);
    back.source.push_back(reverse.vocab().eos());
    back.target = reverse_target;
    RerankItem item{h.score, h.tokens.size(), reverse.log_likelihood(back)};
    g.extra = {{"forward", item.forward}, {"length", item.length}, {"reverse", item.reverse},
               {"lambda", config.lambda}};
    g.score = item.combined(config.lambda);
    items.push_back(item);
    candidates.push_back(std::move(g));
  }
  GenerationList out;
  for (std::size_t i : rerank(items, config.lambda, std::min(config.k, items.size()))) {
    out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace storyctl
