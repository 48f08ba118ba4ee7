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

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/autodiff/adam.hpp"
#include "storyctl/corpus/annotation.hpp"
#include "storyctl/corpus/story.hpp"
#include "storyctl/model/seq2seq.hpp"

namespace storyctl {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;

  void validate() const {
    if (!(learning_rate > 0.0) || batch_size == 0 || max_epochs == 0 || !(clip_norm > 0.0)) {
      throw ContractError("train config: learning_rate, batch_size, max_epochs and clip_norm must be positive");
    }
    if (patience < 1) throw ContractError("train config: patience must be at least 1");
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-token NLL
  double dev_perplexity = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_dev_perplexity = 0.0;
  double final_dev_perplexity = 0.0;
  bool stopped_early = false;
};

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"dev_ppl", e.dev_perplexity},
                      {"seconds", e.seconds}});
  }
  return {{"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"best_dev_ppl", r.best_dev_perplexity},
          {"final_dev_ppl", r.final_dev_perplexity},
          {"stopped_early", r.stopped_early}};
}

// Forward examples: context -> continuation conditioned on the gold value.
// Missing annotations are reported all at once.
inline std::vector<Example> make_examples(const std::vector<Story>& stories, const Sidecar& sidecar,
                                          const Vocabulary& vocab, const AttributeEmbedder& embedder) {
  if (embedder.type != AttributeType::kNone && embedder.type != AttributeType::kBow) {
    const auto missing = sidecar.missing(stories);
    if (!missing.empty()) {
      throw ContractError("missing annotations for stories: " + join_tokens(missing, ", "));
    }
  }
  std::vector<Example> out;
  out.reserve(stories.size());
  for (const Story& s : stories) {
    Example ex;
    ex.id = s.id;
    ex.source = vocab.encode_context(s.context);
    ex.target = vocab.encode_target(s.continuation);
    if (embedder.type == AttributeType::kBow) {
      ex.attribute.vector = bow_embed(s.continuation, embedder.word_table);
    } else if (embedder.type != AttributeType::kNone) {
      ex.attribute = embedder.value_from(sidecar.at(s.id), s.continuation);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Reverse examples: continuation -> context, unconditioned.
inline std::vector<Example> make_reverse_examples(const std::vector<Story>& stories,
                                                  const Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(stories.size());
  for (const Story& s : stories) {
    Example ex;
    ex.id = s.id;
    ex.source = vocab.encode_target(s.continuation);
    ex.target = vocab.encode_context(s.context);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::size_t token_count(const std::vector<Example>& data) {
  std::size_t n = 0;
  for (const auto& ex : data) n += ex.target.size();
  return n;
}

// exp(mean per-token NLL), <eos> included.
template <typename T>
double perplexity(const Seq2Seq<T>& model, const std::vector<Example>& data) {
  if (data.empty()) throw ContractError("perplexity: empty dataset");
  double total = 0.0;
  for (const auto& ex : data) total -= model.log_likelihood(ex);
  return std::exp(total / static_cast<double>(token_count(data)));
}

// Summed parameter gradients of the batch NLL; returns the NLL.
template <typename T>
double batch_gradients(const Seq2Seq<T>& model, std::span<const Example* const> batch,
                       std::vector<ad::Tensor<T>>& grads) {
  double loss = 0.0;
  for (const Example* ex : batch) {
    ad::Tape<T> tape;
    ad::Binding<T> bind(tape, model.params());
    const ad::NodeId nll = model.nll(bind, *ex);
    loss += static_cast<double>(tape.value(nll).item());
    bind.accumulate(ad::backward(tape, nll), grads);
  }
  return loss;
}

using EpochCallback = std::function<void(const EpochStats&)>;

// Minibatch Adam on mean per-token NLL with global-norm clipping and early
// stopping on dev perplexity. The model ends holding its best-dev parameters.
template <typename T>
TrainReport train(Seq2Seq<T>& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (dev_set.empty()) throw ContractError("train: empty development set");
  ad::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  ad::AdamState<T> adam{adam_config, {}, {}, 0};
  std::mt19937_64 rng(config.seed);
  std::vector<const Example*> order;
  for (const auto& ex : train_set) order.push_back(&ex);

  TrainReport report;
  ad::ParamStore<T> best = model.params();
  report.best_dev_perplexity = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double loss = 0.0;
    std::size_t tokens = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::span<const Example* const> batch(order.data() + b, e - b);
      std::vector<ad::Tensor<T>> grads = model.params().zeros();
      std::size_t batch_tokens = 0;
      for (const Example* ex : batch) batch_tokens += ex->target.size();
      loss += batch_gradients(model, batch, grads);
      tokens += batch_tokens;
      const T inv = T(1) / static_cast<T>(batch_tokens);
      for (auto& g : grads) {
        for (T& v : g.values()) v *= inv;
      }
      ad::clip_global_norm(grads, config.clip_norm);
      ad::adam_step(model.params(), grads, adam);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss / static_cast<double>(tokens);
    stats.dev_perplexity = perplexity(model, dev_set);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.dev_perplexity < report.best_dev_perplexity) {
      report.best_dev_perplexity = stats.dev_perplexity;
      report.best_epoch = epoch;
      best = model.params();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  report.final_dev_perplexity = report.epochs.back().dev_perplexity;
  model.params() = std::move(best);
  return report;
}

}  // namespace storyctl
