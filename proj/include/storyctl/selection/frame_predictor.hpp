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
#include <random>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/autodiff/adam.hpp"
#include "storyctl/autodiff/lstm.hpp"
#include "storyctl/corpus/frames.hpp"
#include "storyctl/model/checkpoint.hpp"

namespace storyctl {

// 101-d indicator of the frames present in a sentence.
inline std::vector<double> frame_vector(const FrameSet& frames) {
  std::vector<double> v(FrameInventory::kSlots, 0.0);
  for (int id : frames) {
    if (id < 0 || id > FrameInventory::kCatchAll) {
      throw ContractError("frame_vector: id " + std::to_string(id) + " out of range");
    }
    v[static_cast<std::size_t>(id)] = 1.0;
  }
  return v;
}

struct FramePredictorConfig {
  std::size_t hidden_dim = 32;
  double learning_rate = 1e-2;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double clip_norm = 5.0;
  double init_scale = 0.08;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden_dim == 0 || batch_size == 0 || max_epochs == 0 || patience < 1 ||
        !(learning_rate > 0.0) || !(clip_norm > 0.0) || !(init_scale > 0.0)) {
      throw ContractError("frame predictor config: values must be positive, patience >= 1");
    }
  }
};

// Four context frame vectors in, continuation frame vector out.
struct FrameExample {
  std::string id;
  std::array<std::vector<double>, 4> context;
  std::vector<double> target;
};

inline std::vector<FrameExample> make_frame_examples(const std::vector<Story>& stories,
                                                     const Sidecar& sidecar,
                                                     const FrameInventory& inventory) {
  std::vector<std::string> missing;
  for (const Story& s : stories) {
    const Annotation* a = sidecar.find(s.id);
    if (!a || a->context_frames.size() != 4) missing.push_back(s.id);
  }
  if (!missing.empty()) {
    throw ContractError("missing frame annotations for stories: " + join_tokens(missing, ", "));
  }
  std::vector<FrameExample> out;
  for (const Story& s : stories) {
    const Annotation& a = sidecar.at(s.id);
    FrameExample ex;
    ex.id = s.id;
    for (std::size_t i = 0; i < 4; ++i) ex.context[i] = frame_vector(resolve_frames(a.context_frames[i], inventory));
    ex.target = frame_vector(resolve_frames(a.frames, inventory));
    out.push_back(std::move(ex));
  }
  return out;
}

// LSTM over the context frame vectors, mean of hidden states, linear map to
// 101 scores.
class FramePredictor {
 public:
  using Tensor = ad::Tensor<double>;

  FramePredictor(FramePredictorConfig config, FrameInventory inventory)
      : config_(config), inventory_(std::move(inventory)) {
    config_.validate();
    build();
    params_.init_uniform(config_.init_scale, config_.seed);
  }

  FramePredictor(FramePredictorConfig config, FrameInventory inventory, ad::ParamStore<double> params)
      : config_(config), inventory_(std::move(inventory)) {
    config_.validate();
    build();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (i >= params.size() || params.value(i).shape() != params_.value(i).shape()) {
        throw ContractError("frame predictor: parameters do not match configuration");
      }
    }
    params_ = std::move(params);
  }

  const FramePredictorConfig& config() const { return config_; }
  const FrameInventory& inventory() const { return inventory_; }
  ad::ParamStore<double>& params() { return params_; }
  const ad::ParamStore<double>& params() const { return params_; }

  ad::NodeId forward(ad::Binding<double>& bind, const std::array<std::vector<double>, 4>& context) const {
    auto& tape = bind.tape();
    const std::size_t h = config_.hidden_dim;
    ad::NodeId hs = tape.constant(Tensor({h})), cs = hs;
    std::vector<ad::NodeId> states;
    for (const auto& v : context) {
      if (v.size() != FrameInventory::kSlots) {
        throw ContractError("frame predictor: context vector must have 101 entries");
      }
      const auto hc = ad::lstm_cell(tape, tape.constant(Tensor({v.size()}, v)), hs, cs, bind(0), bind(1));
      hs = hc.h;
      cs = hc.c;
      states.push_back(hc.h);
    }
    ad::NodeId mean = states.front();
    for (std::size_t i = 1; i < states.size(); ++i) mean = ad::add(tape, mean, states[i]);
    mean = ad::scale(tape, mean, 1.0 / static_cast<double>(states.size()));
    return ad::affine(tape, bind(2), mean, bind(3));
  }

  std::vector<double> predict(const std::array<std::vector<double>, 4>& context) const {
    ad::Tape<double> tape(false);
    ad::Binding<double> bind(tape, params_);
    const Tensor& out = tape.value(forward(bind, context));
    return {out.values().begin(), out.values().end()};
  }

  double mse(const std::vector<FrameExample>& data) const {
    if (data.empty()) throw ContractError("frame predictor: empty dataset");
    double total = 0.0;
    for (const auto& ex : data) {
      const auto p = predict(ex.context);
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - ex.target[i]) * (p[i] - ex.target[i]);
      total += s / static_cast<double>(p.size());
    }
    return total / static_cast<double>(data.size());
  }

 private:
  void build() {
    const std::size_t h = config_.hidden_dim, f = FrameInventory::kSlots;
    params_.add("lstm.W", Tensor({4 * h, f + h}));
    params_.add("lstm.b", Tensor({4 * h}));
    params_.add("out.W", Tensor({f, h}));
    params_.add("out.b", Tensor({f}));
  }

  FramePredictorConfig config_;
  FrameInventory inventory_;
  ad::ParamStore<double> params_;
};

struct FramePredictorReport {
  std::vector<double> dev_mse;
  std::size_t best_epoch = 0;
  double best_dev_mse = 0.0;
  double final_dev_mse = 0.0;
};

// Adam on mean squared error with early stopping on dev MSE; the predictor
// ends holding its best-dev parameters.
inline FramePredictorReport train_frame_predictor(FramePredictor& predictor,
                                                  const std::vector<FrameExample>& train_set,
                                                  const std::vector<FrameExample>& dev_set) {
  const auto& cfg = predictor.config();
  if (train_set.empty() || dev_set.empty()) throw ContractError("frame predictor: empty split");
  ad::AdamConfig adam_config;
  adam_config.learning_rate = cfg.learning_rate;
  ad::AdamState<double> adam{adam_config, {}, {}, 0};
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  FramePredictorReport report;
  report.best_dev_mse = std::numeric_limits<double>::infinity();
  ad::ParamStore<double> best = predictor.params();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      auto grads = predictor.params().zeros();
      for (std::size_t i = b; i < e; ++i) {
        const auto& ex = train_set[order[i]];
        ad::Tape<double> tape;
        ad::Binding<double> bind(tape, predictor.params());
        const auto loss = ad::mse(tape, predictor.forward(bind, ex.context), ad::Tensor<double>::vector(ex.target));
        bind.accumulate(ad::backward(tape, loss), grads);
      }
      for (auto& g : grads) {
        for (double& v : g.values()) v /= static_cast<double>(e - b);
      }
      ad::clip_global_norm(grads, cfg.clip_norm);
      ad::adam_step(predictor.params(), grads, adam);
    }
    const double dev = predictor.mse(dev_set);
    report.dev_mse.push_back(dev);
    if (dev < report.best_dev_mse) {
      report.best_dev_mse = dev;
      report.best_epoch = epoch;
      best = predictor.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  report.final_dev_mse = report.dev_mse.back();
  predictor.params() = std::move(best);
  return report;
}

// Ids of the k largest scores, descending; ties go to the lower id.
inline std::vector<int> predict_topk_frames(const std::vector<double>& scores, std::size_t k) {
  if (k < 1) throw ContractError("predict_topk_frames: k must be at least 1");
  if (k > scores.size()) {
    throw ContractError("predict_topk_frames: k = " + std::to_string(k) + " exceeds " +
                        std::to_string(scores.size()) + " frames");
  }
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  ids.resize(k);
  return ids;
}

inline std::vector<int> predict_topk_frames(const FramePredictor& predictor,
                                            const std::array<std::vector<double>, 4>& context,
                                            std::size_t k) {
  return predict_topk_frames(predictor.predict(context), k);
}

inline nlohmann::json to_json(const FramePredictorConfig& c) {
  return {{"hidden_dim", c.hidden_dim}, {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
          {"patience", c.patience},     {"clip_norm", c.clip_norm},
          {"init_scale", c.init_scale}, {"seed", c.seed}};
}

inline FramePredictorConfig frame_predictor_config_from_json(const nlohmann::json& j) {
  FramePredictorConfig c;
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.init_scale = j.at("init_scale").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline void save_frame_predictor(const std::string& path, const FramePredictor& p, double best_dev_mse) {
  Container c;
  c.header = {{"kind", "frame_predictor"},
              {"config", to_json(p.config())},
              {"inventory", p.inventory().ranked()},
              {"best_dev_mse", best_dev_mse},
              {"tensors", tensor_table(p.params())}};
  c.tensors = tensors_of(p.params());
  save_container(path, c);
}

inline FramePredictor load_frame_predictor(const std::string& path) {
  Container c = load_container(path);
  try {
    if (c.header.at("kind") != "frame_predictor") {
      throw FormatError(path + ": checkpoint holds a " + c.header.at("kind").get<std::string>() +
                        ", not a frame predictor");
    }
    return FramePredictor(frame_predictor_config_from_json(c.header.at("config")),
                          FrameInventory(c.header.at("inventory").get<std::vector<std::string>>()),
                          store_from_container(c));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace storyctl
