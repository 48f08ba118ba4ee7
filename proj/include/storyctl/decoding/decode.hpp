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
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/model/seq2seq.hpp"

namespace storyctl {

inline constexpr std::size_t kMaxDecodeLength = 30;

// p_i^(1/tau) renormalized, computed in log space.
inline std::vector<double> apply_temperature(std::span<const double> p, double tau) {
  if (!(tau > 0.0)) throw ContractError("apply_temperature: tau must be positive");
  if (p.empty()) throw ContractError("apply_temperature: empty distribution");
  std::vector<double> logits(p.size());
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) throw ContractError("apply_temperature: negative probability");
    logits[i] = p[i] > 0.0 ? std::log(p[i]) / tau : -std::numeric_limits<double>::infinity();
    hi = std::max(hi, logits[i]);
  }
  if (!std::isfinite(hi)) throw ContractError("apply_temperature: distribution has no mass");
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - hi));
  for (double& l : logits) l /= z;
  return logits;
}

struct Hypothesis {
  std::vector<int> tokens;  // includes the final <eos> when finished
  double score = 0.0;       // cumulative log probability
  bool finished = false;
};

// Encoder output and decoder states for one (source, value) pair, on a
// private inference tape.
template <typename T>
class DecodeSession {
 public:
  using State = typename Seq2Seq<T>::State;

  DecodeSession(const Seq2Seq<T>& model, std::span<const int> source, const AttributeValue& value)
      : model_(&model), tape_(false), bind_(tape_, model.params()) {
    z_ = model.condition(bind_, value);
    enc_ = model.encode(bind_, source, z_);
  }

  State initial() const { return enc_.init; }
  int eos() const { return model_->vocab().eos(); }

  // log p(. | prev, state); writes the advanced state.
  std::vector<double> step(const State& state, int prev, State& next) {
    const auto s = model_->decode_step(bind_, prev, z_, state, enc_);
    next = s.state;
    const auto& logits = tape_.value(s.logits);
    std::vector<double> lp(logits.size());
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lp.size(); ++i) hi = std::max(hi, lp[i] = static_cast<double>(logits[i]));
    double z = 0.0;
    for (double l : lp) z += std::exp(l - hi);
    const double lse = hi + std::log(z);
    for (double& l : lp) l -= lse;
    return lp;
  }

 private:
  const Seq2Seq<T>* model_;
  ad::Tape<T> tape_;
  ad::Binding<T> bind_;
  std::optional<ad::NodeId> z_;
  typename Seq2Seq<T>::Encoded enc_;
};

// Argmax decoding; ties go to the lower token id.
template <typename T>
Hypothesis greedy(const Seq2Seq<T>& model, std::span<const int> source, const AttributeValue& value,
                  std::size_t max_len = kMaxDecodeLength) {
  DecodeSession<T> session(model, source, value);
  auto state = session.initial();
  Hypothesis h;
  int prev = session.eos();
  while (h.tokens.size() < max_len) {
    const auto lp = session.step(state, prev, state);
    const auto best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.tokens.push_back(best);
    h.score += lp[static_cast<std::size_t>(best)];
    prev = best;
    if (best == session.eos()) {
      h.finished = true;
      break;
    }
  }
  return h;
}

// Beam search over raw cumulative log probability. Hypotheses that emit
// <eos> leave the beam for the result pool and the beam shrinks by one; at
// max_len the remaining unfinished hypotheses join the pool. Returns up to
// `beam` hypotheses by descending score (ties keep expansion order).
template <typename T>
std::vector<Hypothesis> beam_search(const Seq2Seq<T>& model, std::span<const int> source,
                                    const AttributeValue& value, std::size_t beam,
                                    std::size_t max_len = kMaxDecodeLength) {
  if (beam < 1) throw ContractError("beam_search: beam must be at least 1");
  if (max_len < 1) throw ContractError("beam_search: max_len must be at least 1");
  using State = typename DecodeSession<T>::State;
  DecodeSession<T> session(model, source, value);
  struct Live {
    Hypothesis hyp;
    State state;
  };
  std::vector<Live> active = {{Hypothesis{}, session.initial()}};
  std::vector<Hypothesis> pool;
  for (std::size_t t = 0; t < max_len && !active.empty(); ++t) {
    struct Candidate {
      double score;
      std::size_t parent;
      int token;
    };
    std::vector<Candidate> candidates;
    std::vector<State> next_states(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int prev = active[a].hyp.tokens.empty() ? session.eos() : active[a].hyp.tokens.back();
      const auto lp = session.step(active[a].state, prev, next_states[a]);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        candidates.push_back({active[a].hyp.score + lp[v], a, static_cast<int>(v)});
      }
    }
    const std::size_t keep = std::min(candidates.size(), beam - pool.size());
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Live live{active[c.parent].hyp, next_states[c.parent]};
      live.hyp.tokens.push_back(c.token);
      live.hyp.score = c.score;
      if (c.token == session.eos()) {
        live.hyp.finished = true;
        pool.push_back(std::move(live.hyp));
      } else {
        next.push_back(std::move(live));
      }
    }
    active = std::move(next);
  }
  for (auto& live : active) pool.push_back(std::move(live.hyp));
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Hypothesis& x, const Hypothesis& y) { return x.score > y.score; });
  if (pool.size() > beam) pool.resize(beam);
  return pool;
}

// n ancestral samples from the tempered next-token distributions. Scores
// are untempered model log probabilities.
template <typename T>
std::vector<Hypothesis> temperature_sample(const Seq2Seq<T>& model, std::span<const int> source,
                                           const AttributeValue& value, double tau, std::size_t n,
                                           std::uint64_t seed,
                                           std::size_t max_len = kMaxDecodeLength) {
  if (!(tau > 0.0)) throw ContractError("temperature_sample: tau must be positive");
  DecodeSession<T> session(model, source, value);
  std::mt19937_64 rng(seed);
  std::vector<Hypothesis> out;
  for (std::size_t s = 0; s < n; ++s) {
    auto state = session.initial();
    Hypothesis h;
    int prev = session.eos();
    while (h.tokens.size() < max_len) {
      const auto lp = session.step(state, prev, state);
      std::vector<double> p(lp.size());
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(lp[i]);
      const auto q = apply_temperature(p, tau);
      double u = ad::unit_uniform(rng);
      std::size_t pick = 0;
      for (; pick + 1 < q.size(); ++pick) {
        if ((u -= q[pick]) < 0.0) break;
      }
      while (q[pick] == 0.0 && pick > 0) --pick;
      prev = static_cast<int>(pick);
      h.tokens.push_back(prev);
      h.score += lp[pick];
      if (prev == session.eos()) {
        h.finished = true;
        break;
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

// One generated continuation with its provenance.
struct Generation {
  std::string context_id;
  std::string generator;  // "BS", "TS" or "attr"
  nlohmann::json attribute;
  std::vector<std::string> tokens;  // <eos> removed
  double score = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

using GenerationList = std::vector<Generation>;

inline nlohmann::json to_json(const Generation& g) {
  nlohmann::json j = {{"context_id", g.context_id},
                      {"generator", g.generator},
                      {"attribute", g.attribute},
                      {"tokens", g.tokens},
                      {"score", g.score}};
  for (const auto& [k, v] : g.extra.items()) j[k] = v;
  return j;
}

inline Generation generation_from_json(const nlohmann::json& j) {
  Generation g;
  g.context_id = j.at("context_id").get<std::string>();
  g.generator = j.at("generator").get<std::string>();
  g.attribute = j.at("attribute");
  g.tokens = j.at("tokens").get<std::vector<std::string>>();
  g.score = j.at("score").get<double>();
  for (const auto& [k, v] : j.items()) {
    if (k != "context_id" && k != "generator" && k != "attribute" && k != "tokens" && k != "score") {
      g.extra[k] = v;
    }
  }
  return g;
}

inline void write_generations(std::ostream& out, const GenerationList& list) {
  for (const auto& g : list) out << to_json(g).dump() << '\n';
}

inline GenerationList read_generations(std::istream& in, const std::string& source = "generations") {
  GenerationList list;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      list.push_back(generation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return list;
}

// Groups a flat list by context id, preserving first-appearance order.
inline std::vector<GenerationList> group_by_context(const GenerationList& list) {
  std::vector<GenerationList> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& g : list) {
    auto [it, fresh] = index.emplace(g.context_id, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(g);
  }
  return groups;
}

template <typename T>
Generation make_generation(const Seq2Seq<T>& model, const std::string& context_id,
                           const std::string& generator, const AttributeValue& value,
                           const Hypothesis& h) {
  Generation g;
  g.context_id = context_id;
  g.generator = generator;
  g.attribute = model.embedder().value_to_json(value);
  g.tokens = model.vocab().decode(h.tokens);
  g.score = h.score;
  return g;
}

// One continuation per value: greedy for beam 1, else the top beam item.
template <typename T>
GenerationList generate_per_attribute(const Seq2Seq<T>& model, const std::string& context_id,
                                      std::span<const int> source,
                                      const std::vector<AttributeValue>& values, std::size_t beam = 1,
                                      std::size_t max_len = kMaxDecodeLength) {
  GenerationList out;
  for (const auto& v : values) {
    try {
      model.embedder().validate(v);
    } catch (const ContractError& e) {
      throw ContractError(std::string("generate_per_attribute: invalid value: ") + e.what());
    }
    const Hypothesis h = beam == 1 ? greedy(model, source, v, max_len)
                                   : beam_search(model, source, v, beam, max_len).front();
    out.push_back(make_generation(model, context_id, "attr", v, h));
  }
  return out;
}

}  // namespace storyctl
