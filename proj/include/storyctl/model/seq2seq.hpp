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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/autodiff/lstm.hpp"
#include "storyctl/autodiff/ops.hpp"
#include "storyctl/autodiff/params.hpp"
#include "storyctl/corpus/vocabulary.hpp"
#include "storyctl/model/attribute.hpp"

namespace storyctl {

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;  // encoder state width (both directions) and decoder width
  std::size_t encoder_layers = 2;
  double init_scale = 0.08;
  std::uint64_t seed = 1;

  void validate() const {
    if (embed_dim == 0 || hidden_dim == 0 || encoder_layers == 0) {
      throw ContractError("model config: dimensions and layer count must be positive");
    }
    if (hidden_dim % 2 != 0) {
      throw ContractError("model config: hidden_dim must be even (split across directions)");
    }
    if (!(init_scale > 0.0)) throw ContractError("model config: init_scale must be positive");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"encoder_layers", c.encoder_layers},
          {"init_scale", c.init_scale},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// One training or scoring instance: source ids, target ids ending in <eos>,
// and the control value.
struct Example {
  std::string id;
  std::vector<int> source;
  std::vector<int> target;
  AttributeValue attribute;
};

template <typename T>
class Seq2Seq {
 public:
  using Tensor = ad::Tensor<T>;
  using NodeId = ad::NodeId;
  using Binding = ad::Binding<T>;

  struct State {
    NodeId h;
    NodeId c;
  };
  struct Encoded {
    std::vector<NodeId> states;  // s_i, hidden_dim wide
    NodeId stacked;              // |x| x hidden_dim
    State init;                  // bridged decoder state
  };
  struct Attention {
    NodeId weights;
    NodeId context;
    NodeId output;  // tanh(W_c [context; h])
  };
  struct Step {
    NodeId logits;
    State state;
    Attention attention;
  };

  struct Slots {
    std::size_t embed = 0;
    std::vector<std::size_t> enc_w, enc_b;  // [layer * 2 + direction]
    std::size_t bridge_hw = 0, bridge_hb = 0, bridge_cw = 0, bridge_cb = 0;
    std::size_t dec_w = 0, dec_b = 0;
    std::size_t attn = 0, comb = 0;
    std::size_t out_w = 0, out_b = 0;
    std::optional<std::size_t> attr_table;  // fixed one-hot rows
    std::optional<std::size_t> frames;      // learned R
  };

  Seq2Seq(ModelConfig config, Vocabulary vocab, AttributeEmbedder embedder)
      : config_(config), vocab_(std::move(vocab)), embedder_(std::move(embedder)) {
    config_.validate();
    build();
    params_.init_uniform(config_.init_scale, config_.seed);
  }

  // Rebuilds around an existing parameter store (checkpoint load, casts).
  Seq2Seq(ModelConfig config, Vocabulary vocab, AttributeEmbedder embedder, ad::ParamStore<T> params)
      : config_(config), vocab_(std::move(vocab)), embedder_(std::move(embedder)) {
    config_.validate();
    build();
    if (params.size() != params_.size()) {
      throw ContractError("seq2seq: parameter count " + std::to_string(params.size()) +
                          " does not match architecture (" + std::to_string(params_.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params.entry(i).name != params_.entry(i).name ||
          params.value(i).shape() != params_.value(i).shape()) {
        throw ContractError("seq2seq: parameter '" + params.entry(i).name + "' " +
                            ad::shape_string(params.value(i).shape()) + " does not match '" +
                            params_.entry(i).name + "' " +
                            ad::shape_string(params_.value(i).shape()));
      }
    }
    params_ = std::move(params);
  }

  template <typename U>
  Seq2Seq<U> cast() const {
    return Seq2Seq<U>(config_, vocab_, embedder_, params_.template cast<U>());
  }

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const AttributeEmbedder& embedder() const { return embedder_; }
  const ad::ParamStore<T>& params() const { return params_; }
  ad::ParamStore<T>& params() { return params_; }
  const Slots& slots() const { return slots_; }
  std::size_t state_dim() const { return config_.hidden_dim; }

  // z for one value on this tape (empty for the unconditioned model).
  std::optional<NodeId> condition(Binding& bind, const AttributeValue& value) const {
    if (slots_.attr_table) {
      embedder_.validate(value);
      return ad::row(bind.tape(), bind(*slots_.attr_table), value.category);
    }
    std::optional<NodeId> table;
    if (slots_.frames) table = bind(*slots_.frames);
    return embed_attribute(bind.tape(), embedder_, value, table);
  }

  Encoded encode(Binding& bind, std::span<const int> x, std::optional<NodeId> z) const {
    auto& tape = bind.tape();
    if (x.empty()) throw ContractError("encode: empty source sequence");
    check_ids(x, "source");
    const std::size_t n = x.size();
    const std::size_t half = config_.hidden_dim / 2;
    std::vector<NodeId> inputs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId v = ad::row(tape, bind(slots_.embed), static_cast<std::size_t>(x[i]));
      inputs[i] = z ? ad::concat(tape, {v, *z}) : v;
    }
    const NodeId zero = tape.constant(Tensor({half}));
    std::vector<NodeId> fwd(n), bwd(n);
    for (std::size_t layer = 0; layer < config_.encoder_layers; ++layer) {
      const std::size_t f = layer * 2, b = layer * 2 + 1;
      State s{zero, zero};
      for (std::size_t i = 0; i < n; ++i) {
        const auto hc = ad::lstm_cell(tape, inputs[i], s.h, s.c, bind(slots_.enc_w[f]),
                                      bind(slots_.enc_b[f]));
        s = {hc.h, hc.c};
        fwd[i] = hc.h;
      }
      s = {zero, zero};
      for (std::size_t i = n; i-- > 0;) {
        const auto hc = ad::lstm_cell(tape, inputs[i], s.h, s.c, bind(slots_.enc_w[b]),
                                      bind(slots_.enc_b[b]));
        s = {hc.h, hc.c};
        bwd[i] = hc.h;
      }
      for (std::size_t i = 0; i < n; ++i) inputs[i] = ad::concat(tape, {fwd[i], bwd[i]});
    }
    Encoded enc;
    enc.states = inputs;
    enc.stacked = ad::stack(tape, enc.states);
    const NodeId ends = ad::concat(tape, {fwd.back(), bwd.front()});
    enc.init.h = ad::tanh(tape, ad::affine(tape, bind(slots_.bridge_hw), ends, bind(slots_.bridge_hb)));
    enc.init.c = ad::affine(tape, bind(slots_.bridge_cw), ends, bind(slots_.bridge_cb));
    return enc;
  }

  // Bilinear ("general") global attention.
  Attention attend(Binding& bind, NodeId h, NodeId stacked) const {
    auto& tape = bind.tape();
    Attention a;
    const NodeId query = ad::matvec_t(tape, bind(slots_.attn), h);
    a.weights = ad::softmax(tape, ad::matvec(tape, stacked, query));
    a.context = ad::matvec_t(tape, stacked, a.weights);
    a.output = ad::tanh(tape, ad::matvec(tape, bind(slots_.comb), ad::concat(tape, {a.context, h})));
    return a;
  }

  Step decode_step(Binding& bind, int y_prev, std::optional<NodeId> z, const State& state,
                   const Encoded& enc) const {
    auto& tape = bind.tape();
    check_ids(std::span<const int>(&y_prev, 1), "decoder input");
    const NodeId v = ad::row(tape, bind(slots_.embed), static_cast<std::size_t>(y_prev));
    const NodeId input = z ? ad::concat(tape, {v, *z}) : v;
    const auto hc = ad::lstm_cell(tape, input, state.h, state.c, bind(slots_.dec_w), bind(slots_.dec_b));
    Step step;
    step.state = {hc.h, hc.c};
    step.attention = attend(bind, hc.h, enc.stacked);
    step.logits = ad::affine(tape, bind(slots_.out_w), step.attention.output, bind(slots_.out_b));
    return step;
  }

  // Teacher-forced negative log-likelihood summed over target tokens.
  NodeId nll(Binding& bind, const Example& ex) const {
    auto& tape = bind.tape();
    check_target(ex.target);
    const auto z = condition(bind, ex.attribute);
    const Encoded enc = encode(bind, ex.source, z);
    State state = enc.init;
    int prev = vocab_.eos();
    std::vector<NodeId> terms;
    terms.reserve(ex.target.size());
    for (int y : ex.target) {
      const Step step = decode_step(bind, prev, z, state, enc);
      terms.push_back(ad::softmax_cross_entropy(tape, step.logits, static_cast<std::size_t>(y)));
      state = step.state;
      prev = y;
    }
    return terms.size() == 1 ? terms.front() : ad::sum(tape, ad::concat(tape, terms));
  }

  // log p(y | x, l).
  double log_likelihood(const Example& ex) const {
    ad::Tape<T> tape(false);
    Binding bind(tape, params_);
    return -static_cast<double>(tape.value(nll(bind, ex)).item());
  }

  // Next-token distribution given a target prefix (ending just before the
  // token to predict).
  std::vector<double> next_distribution(const Example& ex, std::span<const int> prefix) const {
    ad::Tape<T> tape(false);
    Binding bind(tape, params_);
    const auto z = condition(bind, ex.attribute);
    const Encoded enc = encode(bind, ex.source, z);
    State state = enc.init;
    int prev = vocab_.eos();
    for (int y : prefix) {
      state = decode_step(bind, prev, z, state, enc).state;
      prev = y;
    }
    const Tensor p = ad::softmax_values(tape.value(decode_step(bind, prev, z, state, enc).logits));
    return std::vector<double>(p.values().begin(), p.values().end());
  }

 private:
  void build() {
    const std::size_t E = config_.embed_dim, H = config_.hidden_dim, half = H / 2;
    const std::size_t V = vocab_.size(), Z = embedder_.dim();
    slots_.embed = params_.add("embed", Tensor({V, E}));
    for (std::size_t layer = 0; layer < config_.encoder_layers; ++layer) {
      const std::size_t in = layer == 0 ? E + Z : H;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = "enc.l" + std::to_string(layer) + "." + dir;
        slots_.enc_w.push_back(params_.add(p + ".W", Tensor({4 * half, in + half})));
        slots_.enc_b.push_back(params_.add(p + ".b", Tensor({4 * half})));
      }
    }
    slots_.bridge_hw = params_.add("bridge.h.W", Tensor({H, H}));
    slots_.bridge_hb = params_.add("bridge.h.b", Tensor({H}));
    slots_.bridge_cw = params_.add("bridge.c.W", Tensor({H, H}));
    slots_.bridge_cb = params_.add("bridge.c.b", Tensor({H}));
    slots_.dec_w = params_.add("dec.W", Tensor({4 * H, E + Z + H}));
    slots_.dec_b = params_.add("dec.b", Tensor({4 * H}));
    slots_.attn = params_.add("attn.W", Tensor({H, H}));
    slots_.comb = params_.add("comb.W", Tensor({H, 2 * H}));
    slots_.out_w = params_.add("out.W", Tensor({V, H}));
    slots_.out_b = params_.add("out.b", Tensor({V}));
    if (embedder_.categorical()) {
      const std::size_t k = embedder_.category_count();
      Tensor eye({k, k});
      for (std::size_t i = 0; i < k; ++i) eye.at(i, i) = T(1);
      slots_.attr_table = params_.add("attr.table", std::move(eye), false);
    } else if (embedder_.learned()) {
      slots_.frames = params_.add("attr.frames", Tensor({FrameInventory::kSlots, embedder_.dim()}));
    }
  }

  void check_ids(std::span<const int> ids, const char* what) const {
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
        throw ContractError(std::string(what) + ": token id " + std::to_string(id) +
                            " outside vocabulary of " + std::to_string(vocab_.size()));
      }
    }
  }
  void check_target(const std::vector<int>& y) const {
    if (y.empty() || y.back() != vocab_.eos()) {
      throw ContractError("target must be non-empty and end with <eos>");
    }
    check_ids(y, "target");
  }

  ModelConfig config_;
  Vocabulary vocab_;
  AttributeEmbedder embedder_;
  ad::ParamStore<T> params_;
  Slots slots_;
};

}  // namespace storyctl
