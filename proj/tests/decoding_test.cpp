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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "storyctl/decoding/decode.hpp"
#include "storyctl/model/train.hpp"

namespace storyctl {
namespace {

using Model = Seq2Seq<double>;

Model random_model(std::size_t words, std::uint64_t seed, double scale = 1.5,
                   AttributeType type = AttributeType::kNone) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < words; ++i) w.push_back("w" + std::to_string(i));
  ModelConfig c;
  c.embed_dim = 4;
  c.hidden_dim = 6;
  c.encoder_layers = 1;
  c.init_scale = scale;
  c.seed = seed;
  AttributeEmbedder e;
  e.type = type;
  return Model(c, Vocabulary(w), e);
}

struct Scored {
  std::vector<int> tokens;
  double score;
};

// Every complete sequence: <eos> at step <= max_len, or any max_len prefix.
void enumerate(DecodeSession<double>& session, const DecodeSession<double>::State& state, int prev,
               Scored current, std::size_t max_len, std::vector<Scored>& out) {
  DecodeSession<double>::State next;
  const auto lp = session.step(state, prev, next);
  for (std::size_t v = 0; v < lp.size(); ++v) {
    Scored s = current;
    s.tokens.push_back(static_cast<int>(v));
    s.score += lp[v];
    if (static_cast<int>(v) == session.eos() || s.tokens.size() == max_len) {
      out.push_back(std::move(s));
    } else {
      enumerate(session, next, static_cast<int>(v), std::move(s), max_len, out);
    }
  }
}

std::vector<Scored> brute_force(const Model& m, std::span<const int> x, std::size_t max_len) {
  DecodeSession<double> session(m, x, {});
  std::vector<Scored> all;
  enumerate(session, session.initial(), session.eos(), {}, max_len, all);
  return all;
}

TEST(ApplyTemperature, Examples) {
  const std::vector<double> p = {0.8, 0.2};
  EXPECT_EQ(apply_temperature(p, 1.0), p);
  const auto q = apply_temperature(p, 0.5);
  EXPECT_NEAR(q[0], 0.64 / 0.68, 1e-12);
  EXPECT_NEAR(q[0], 0.9412, 1e-4);
  EXPECT_NEAR(q[1], 0.0588, 1e-4);
  const std::vector<double> u(5, 0.2);
  for (double tau : {0.1, 0.6, 3.0}) {
    for (double x : apply_temperature(u, tau)) EXPECT_NEAR(x, 0.2, 1e-15);
  }
  EXPECT_THROW(apply_temperature(p, 0.0), ContractError);
  EXPECT_THROW(apply_temperature(p, -1.0), ContractError);
}

TEST(ApplyTemperature, PreservesOrderAndNormalization) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(7);
    double z = 0.0;
    for (double& x : p) z += (x = ad::unit_uniform(rng) + 1e-3);
    for (double& x : p) x /= z;
    const double tau = 0.05 + 2.0 * ad::unit_uniform(rng);
    const auto q = apply_temperature(p, tau);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      sum += q[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) EXPECT_LE(q[i], q[j]);
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Greedy, PicksArgmaxAtEveryStep) {
  const Model m = random_model(4, 5);
  const std::vector<int> x = {0, 1, 2};
  const auto h = greedy(m, x, {}, 6);
  DecodeSession<double> session(m, x, {});
  auto state = session.initial();
  int prev = session.eos();
  double score = 0.0;
  for (int t : h.tokens) {
    const auto lp = session.step(state, prev, state);
    EXPECT_EQ(t, std::max_element(lp.begin(), lp.end()) - lp.begin());
    score += lp[static_cast<std::size_t>(t)];
    prev = t;
  }
  EXPECT_NEAR(h.score, score, 1e-12);
  EXPECT_TRUE(h.finished || h.tokens.size() == 6);
}

TEST(BeamSearch, WidthOneEqualsGreedy) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Model m = random_model(5, seed);
    const std::vector<int> x = {static_cast<int>(seed % 5), 2, 1};
    const auto g = greedy(m, x, {});
    const auto b = beam_search(m, x, {}, 1);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].tokens, g.tokens);
    EXPECT_EQ(b[0].score, g.score);
    EXPECT_EQ(b[0].finished, g.finished);
  }
}

TEST(BeamSearch, FullWidthRecoversBruteForceMode) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Model m = random_model(2, seed);  // V = 5
    const std::vector<int> x = {0, 1};
    const std::size_t max_len = 4;
    const auto all = brute_force(m, x, max_len);
    const auto best = std::max_element(all.begin(), all.end(),
                                       [](const Scored& a, const Scored& b) { return a.score < b.score; });
    const auto b = beam_search(m, x, {}, 625, max_len);
    EXPECT_EQ(b.size(), all.size());
    EXPECT_EQ(b.front().tokens, best->tokens);
    EXPECT_NEAR(b.front().score, best->score, 1e-12);
  }
}

TEST(BeamSearch, TopScoreAtLeastGreedyOnTinyVocabulary) {
  // V = 3 (the three specials), max_len 3: small enough to check exhaustively.
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Model m = random_model(0, seed, 2.0);
    const std::vector<int> x = {1, 0, 2};
    const double g = greedy(m, x, {}, 3).score;
    double exact = -std::numeric_limits<double>::infinity();
    for (const auto& s : brute_force(m, x, 3)) exact = std::max(exact, s.score);
    for (std::size_t beam = 1; beam <= 4; ++beam) {
      const auto b = beam_search(m, x, {}, beam, 3);
      EXPECT_GE(b.front().score, g - 1e-12) << "seed " << seed << " beam " << beam;
      EXPECT_LE(b.front().score, exact + 1e-12);
    }
  }
}

TEST(BeamSearch, SortedTerminatedAndScored) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Model m = random_model(6, seed, 0.8);
    const std::vector<int> x = {3, 4, 5};
    const auto b = beam_search(m, x, {}, 4, 8);
    ASSERT_FALSE(b.empty());
    EXPECT_LE(b.size(), 4u);
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LE(b[i].score, b[i - 1].score);
    for (const auto& h : b) {
      EXPECT_TRUE(h.finished ? h.tokens.back() == m.vocab().eos() : h.tokens.size() == 8);
      double score = 0.0;
      DecodeSession<double> session(m, x, {});
      auto state = session.initial();
      int prev = session.eos();
      for (int t : h.tokens) {
        score += session.step(state, prev, state)[static_cast<std::size_t>(t)];
        prev = t;
      }
      EXPECT_NEAR(h.score, score, 1e-9);
      for (std::size_t i = 0; i + 1 < h.tokens.size(); ++i) EXPECT_NE(h.tokens[i], m.vocab().eos());
    }
    EXPECT_EQ(beam_search(m, x, {}, 4, 8).front().tokens, b.front().tokens);
  }
  EXPECT_THROW(beam_search(random_model(2, 1), std::vector<int>{0}, {}, 0), ContractError);
}

TEST(TemperatureSample, DeterministicForSeed) {
  const Model m = random_model(6, 2, 1.0);
  const std::vector<int> x = {0, 1, 2};
  const auto a = temperature_sample(m, x, {}, 0.6, 5, 42);
  const auto b = temperature_sample(m, x, {}, 0.6, 5, 42);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_TRUE(a[i].finished || a[i].tokens.size() == kMaxDecodeLength);
  }
  const auto c = temperature_sample(m, x, {}, 1.5, 5, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].tokens != c[i].tokens;
  EXPECT_TRUE(differs);
  EXPECT_EQ(temperature_sample(m, x, {}, 0.5, 3, 1).size(), 3u);
  EXPECT_THROW(temperature_sample(m, x, {}, 0.0, 3, 1), ContractError);
}

TEST(TemperatureSample, LowTemperatureOnOverfitModelMatchesGreedy) {
  Model m = random_model(4, 3, 0.1);
  const Vocabulary& v = m.vocab();
  const std::vector<Example> data = {{"a", {0, 1, 2}, {3, 1, 0, 2, v.eos()}, {}},
                                     {"b", {2, 2, 3}, {0, 0, 1, v.eos()}, {}}};
  TrainConfig cfg;
  cfg.learning_rate = 2e-2;
  cfg.batch_size = 2;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  train(m, data, data, cfg);
  for (const auto& ex : data) {
    const auto g = greedy(m, ex.source, {});
    EXPECT_EQ(g.tokens, ex.target);
    for (const auto& s : temperature_sample(m, ex.source, {}, 0.01, 10, 9)) EXPECT_EQ(s.tokens, g.tokens);
  }
}

TEST(TemperatureSample, EmpiricalFrequenciesFollowTemperedDistribution) {
  const Model m = random_model(2, 8, 1.0);  // V = 5
  const std::vector<int> x = {0};
  DecodeSession<double> session(m, x, {});
  DecodeSession<double>::State next;
  const auto lp = session.step(session.initial(), session.eos(), next);
  std::vector<double> p(lp.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(lp[i]);
  const auto q = apply_temperature(p, 0.7);
  const std::size_t n = 20000;
  std::vector<double> freq(p.size(), 0.0);
  for (const auto& h : temperature_sample(m, x, {}, 0.7, n, 77, 1)) freq[static_cast<std::size_t>(h.tokens[0])] += 1.0 / n;
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(freq[i], q[i], 4.0 * std::sqrt(q[i] * (1 - q[i]) / n) + 1e-3);
}

TEST(GeneratePerAttribute, OneOutputPerValue) {
  const Model s = random_model(4, 1, 0.5, AttributeType::kSentiment);
  const std::vector<int> x = {0, 1};
  EXPECT_EQ(generate_per_attribute(s, "c1", x, s.embedder().enumerate()).size(), 3u);
  const Model l = random_model(4, 1, 0.5, AttributeType::kLength30);
  const auto list = generate_per_attribute(l, "c1", x, l.embedder().enumerate(), 2);
  ASSERT_EQ(list.size(), 30u);
  EXPECT_EQ(list[4].attribute, 4);
  EXPECT_EQ(list[4].generator, "attr");
  try {
    generate_per_attribute(s, "c1", x, {AttributeValue::of_category(7)});
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(GeneratePerAttribute, HundredFrames) {
  std::vector<std::string> words = {"a", "b"};
  AttributeEmbedder e;
  e.type = AttributeType::kFrames;
  e.frame_dim = 4;
  std::vector<std::string> names;
  for (int i = 0; i < 100; ++i) names.push_back("F" + std::to_string(i));
  e.inventory = FrameInventory(names);
  ModelConfig c;
  c.embed_dim = 4;
  c.hidden_dim = 4;
  const Model m(c, Vocabulary(words), e);
  const auto list = generate_per_attribute(m, "c", std::vector<int>{0, 1}, e.enumerate());
  EXPECT_EQ(list.size(), 100u);
  EXPECT_EQ(list[7].attribute, nlohmann::json::array({"F7"}));
}

TEST(GenerationList, JsonLinesRoundTrip) {
  GenerationList list(2);
  list[0] = {"s1", "BS", "positive", {"he", "was", "happy", "."}, -3.25, {{"rank", 0}}};
  list[1] = {"s2", "TS", nlohmann::json::array({"Kinship"}), {}, -0.5, nlohmann::json::object()};
  std::ostringstream out;
  write_generations(out, list);
  std::istringstream in(out.str());
  const auto back = read_generations(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(to_json(back[i]), to_json(list[i]));
  EXPECT_EQ(nlohmann::json::parse(out.str().substr(0, out.str().find('\n'))).at("rank"), 0);
  std::istringstream bad("{\"context_id\": 3}\n");
  EXPECT_THROW(read_generations(bad), FormatError);
}

TEST(GenerationList, GroupsByContextInOrder) {
  GenerationList list;
  for (const char* id : {"a", "b", "a", "c", "b"}) list.push_back({id, "BS", nullptr, {"x"}, 0.0, {}});
  const auto groups = group_by_context(list);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_EQ(groups[2][0].context_id, "c");
}

}  // namespace
}  // namespace storyctl
