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
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "storyctl/corpus/synthetic.hpp"
#include "storyctl/metrics/controllability.hpp"
#include "storyctl/metrics/metrics.hpp"
#include "storyctl/metrics/report.hpp"
#include "oracles.hpp"

namespace storyctl {
namespace {

using namespace oracle;

Tokens toks(const std::string& s) { return split_tokens(s); }

TEST(Bleu2, Examples) {
  EXPECT_NEAR(bleu2(toks("a b c"), toks("a b c")), 1.0, 1e-15);
  EXPECT_EQ(bleu2(toks("x y z"), toks("a b c")), 0.0);
  EXPECT_NEAR(bleu2(toks("a b c"), toks("a b d")), std::sqrt(1.0 / 3.0), 1e-12);
  EXPECT_NEAR(bleu2(toks("a b c"), toks("a b d")), 0.5774, 1e-4);
}

TEST(Bleu2, EmptyCandidateWarns) {
  std::vector<std::string> warnings;
  EXPECT_EQ(bleu2({}, toks("a b"), &warnings), 0.0);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Bleu2, ZeroBigramMatchesAreSmoothed) {
  const double v = bleu2(toks("b a"), toks("a b"));
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, std::sqrt(1.0 * 1e-9), 1e-15);
}

TEST(Bleu2, BrevityPenalty) {
  EXPECT_NEAR(bleu2(toks("a b"), toks("a b c d")), std::exp(1.0 - 2.0), 1e-12);
  EXPECT_NEAR(bleu2(toks("a b c d"), toks("a b")), std::sqrt(0.5 * (1.0 / 3.0)), 1e-12);
}

TEST(Bleu2, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    const Tokens c = random_sentence(rng), r = random_sentence(rng);
    EXPECT_NEAR(bleu2(c, r), oracle_bleu2(c, r), 1e-12) << join_tokens(c) << " | " << join_tokens(r);
  }
}

TEST(Bleu2, RangeAndIdentityProperty) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const Tokens c = random_sentence(rng), r = random_sentence(rng);
    const double v = bleu2(c, r);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-15);
    if (c != r) EXPECT_LT(v, 1.0 - 1e-12) << join_tokens(c) << " | " << join_tokens(r);
    EXPECT_NEAR(bleu2(c, c), 1.0, 1e-12);
  }
}

TEST(Rouge, Examples) {
  for (auto v : {RougeVariant::kUnigram, RougeVariant::kLcs}) {
    EXPECT_NEAR(rouge(toks("a b c"), toks("a b c"), v), 1.0, 1e-15);
    EXPECT_EQ(rouge(toks("a b"), toks("c d"), v), 0.0);
  }
  EXPECT_NEAR(rouge(toks("a c d"), toks("a b c d"), RougeVariant::kLcs), 6.0 / 7.0, 1e-12);
  EXPECT_NEAR(rouge(toks("a c d"), toks("a b c d"), RougeVariant::kLcs), 0.8571, 1e-4);
  EXPECT_NEAR(rouge(toks("b a"), toks("a b"), RougeVariant::kUnigram), 1.0, 1e-15);
  EXPECT_NEAR(rouge(toks("b a"), toks("a b"), RougeVariant::kLcs), 0.5, 1e-15);
  EXPECT_THROW(rouge({}, toks("a"), RougeVariant::kLcs), ContractError);
}

TEST(Rouge, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 50; ++i) {
    const Tokens c = random_sentence(rng), r = random_sentence(rng);
    EXPECT_EQ(lcs_length(c, r), oracle_lcs(c, r));
    const double l = static_cast<double>(oracle_lcs(c, r));
    const double f = l == 0 ? 0.0 : 2.0 * (l / c.size()) * (l / r.size()) / (l / c.size() + l / r.size());
    EXPECT_NEAR(rouge(c, r, RougeVariant::kLcs), f, 1e-12);
    EXPECT_NEAR(rouge(c, r, RougeVariant::kUnigram), oracle_rouge1(c, r), 1e-12);
  }
}

TEST(Rouge, RangeAndIdentityProperty) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const Tokens c = random_sentence(rng), r = random_sentence(rng);
    const double l = rouge(c, r, RougeVariant::kLcs), u = rouge(c, r, RougeVariant::kUnigram);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, u + 1e-15);  // an LCS is a sub-bag of the clipped overlap
    EXPECT_LE(u, 1.0 + 1e-15);
    if (c != r) EXPECT_LT(l, 1.0);
    Tokens sc = c, sr = r;
    std::sort(sc.begin(), sc.end());
    std::sort(sr.begin(), sr.end());
    EXPECT_EQ(std::abs(u - 1.0) < 1e-12, sc == sr);
  }
}

TEST(MaxAndAvg, Examples) {
  const Tokens ref = toks("a b c");
  const auto with_ref = max_and_avg({toks("x"), ref}, ref, [](const Tokens& c, const Tokens& r) { return bleu2(c, r); });
  EXPECT_NEAR(with_ref.max, 1.0, 1e-15);
  const auto same = max_and_avg({toks("a b"), toks("a b")}, ref, [](const Tokens& c, const Tokens& r) { return bleu2(c, r); });
  EXPECT_EQ(same.max, same.avg);
  std::size_t i = 0;
  const std::vector<double> fixed = {0.2, 0.5, 0.3};
  const auto m = max_and_avg({ref, ref, ref}, ref, [&](const Tokens&, const Tokens&) { return fixed[i++]; });
  EXPECT_EQ(m.max, 0.5);
  EXPECT_NEAR(m.avg, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(max_and_avg({}, ref, [](const Tokens&, const Tokens&) { return 0.0; }), ContractError);
}

TEST(MaxAndAvg, MaxDominatesAverageProperty) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 50; ++t) {
    std::vector<Tokens> list(2 + rng() % 4);
    for (auto& x : list) x = random_sentence(rng);
    const Tokens ref = random_sentence(rng);
    const auto m = max_and_avg(list, ref, [](const Tokens& c, const Tokens& r) { return rouge(c, r, RougeVariant::kLcs); });
    EXPECT_GE(m.max, m.avg - 1e-15);
    bool all_equal = true;
    for (const auto& x : list) all_equal = all_equal && rouge(x, ref, RougeVariant::kLcs) == m.max;
    EXPECT_EQ(all_equal, std::abs(m.max - m.avg) < 1e-15);
  }
}

TEST(SelfBleu, Examples) {
  EXPECT_NEAR(self_bleu({toks("a b"), toks("a b"), toks("a b")}), 1.0, 1e-15);
  EXPECT_EQ(self_bleu({toks("a b"), toks("c d"), toks("e f")}), 0.0);
  const std::vector<Tokens> list = {toks("a b"), toks("a c"), toks("a b")};
  double oracle = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) oracle += oracle_bleu2(list[i], list[j]) / 6.0;
    }
  }
  EXPECT_NEAR(self_bleu(list), oracle, 1e-12);
  EXPECT_THROW(self_bleu({toks("a")}), ContractError);
}

TEST(SelfBleu, OrderInvariantProperty) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    std::vector<Tokens> list(2 + rng() % 4);
    for (auto& x : list) x = random_sentence(rng);
    const double a = self_bleu(list), am = self_bleu(list, true);
    std::shuffle(list.begin(), list.end(), rng);
    EXPECT_NEAR(self_bleu(list), a, 1e-12);
    EXPECT_NEAR(self_bleu(list, true), am, 1e-12);
    EXPECT_GE(am, a - 1e-12);  // more references can only add matches
  }
}

TEST(ScoreSystem, AggregatesPerContextMeans) {
  GenerationList gens = {{"s1", "BS", nullptr, toks("a b c"), 0, {}}, {"s1", "BS", nullptr, toks("x"), 0, {}},
                         {"s2", "BS", nullptr, {}, 0, {}},          {"s2", "BS", nullptr, toks("d e"), 0, {}}};
  const std::map<std::string, Tokens> gold = {{"s1", toks("a b c")}, {"s2", toks("d e")}};
  const auto s = score_system("sys", gens, gold);
  EXPECT_EQ(s.contexts, 2u);
  EXPECT_EQ(s.list_size, 2u);
  EXPECT_NEAR(s.bleu, 50.0, 1e-9);         // first items score 1 and 0
  EXPECT_NEAR(s.max_bleu, 100.0, 1e-9);
  EXPECT_NEAR(s.avg_bleu, 50.0, 1e-9);
  ASSERT_TRUE(s.self_bleu.has_value());
  EXPECT_EQ(*s.self_bleu, 0.0);
  EXPECT_THROW(score_system("sys", gens, {{"s1", toks("a")}}), ContractError);
  const auto table = format_oracle_table({s});
  EXPECT_NE(table.find("n/a"), std::string::npos);
  EXPECT_NE(format_diversity_table({s}).find("Self-BLEU"), std::string::npos);
}

struct ControlFixture : ::testing::Test {
  Lexicons lex = synthetic::lexicons();
};

TEST_F(ControlFixture, SentimentConfusion) {
  AttributeEmbedder e;
  e.type = AttributeType::kSentiment;
  const Evaluator ev{AttributeType::kSentiment, &lex, &e};
  GenerationList gens;
  for (const char* text : {"a great day .", "an awful day ."}) gens.push_back({"s", "attr", "positive", toks(text), 0, {}});
  gens.push_back({"s", "attr", "negative", toks("an ugly day ."), 0, {}});
  const auto t = match_table_from_generations(ev, gens);
  ASSERT_EQ(t.rows, (std::vector<std::string>{"positive", "negative"}));
  EXPECT_EQ(t.counts[0], (std::vector<std::size_t>{1, 0, 1}));
  EXPECT_EQ(t.counts[1], (std::vector<std::size_t>{1, 0, 0}));
  EXPECT_EQ(t.match_percent(0), 50.0);
  EXPECT_EQ(t.match_percent(1), 100.0);
  EXPECT_NEAR(t.overall_match_percent(), 200.0 / 3.0, 1e-12);
  EXPECT_NE(format_match_table(t, "Sentiment").find("50.0"), std::string::npos);
}

TEST_F(ControlFixture, CategoricalRowsAlignWithColumns) {
  AttributeEmbedder e;
  e.type = AttributeType::kSentiment;
  const Evaluator ev{AttributeType::kSentiment, &lex, &e};
  auto t = empty_match_table(e, e.enumerate());
  for (std::size_t r = 0; r < 3; ++r) {
    const Tokens out = r == 0 ? toks("awful") : r == 1 ? toks("plain") : toks("great");
    ++t.counts[r][observe(ev, AttributeValue::of_category(r), out)];
  }
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(t.match_percent(r), 100.0);
  EXPECT_EQ(t.overall_match_percent(), 100.0);
}

TEST_F(ControlFixture, LengthRowsSumToHundred) {
  AttributeEmbedder e;
  e.type = AttributeType::kLength30;
  const Evaluator ev{AttributeType::kLength30, nullptr, &e};
  auto t = empty_match_table(e, e.enumerate());
  std::mt19937_64 rng(3);
  for (std::size_t r = 0; r < 30; ++r) {
    for (int k = 0; k < 7; ++k) {
      Tokens out(1 + rng() % 35, "w");
      ++t.counts[r][observe(ev, AttributeValue::of_category(r), out)];
    }
  }
  for (std::size_t r = 0; r < 30; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < t.columns.size(); ++c) total += t.percent(r, c);
    EXPECT_NEAR(total, 100.0, 1e-9);
  }
  EXPECT_EQ(observe(ev, AttributeValue::of_category(4), Tokens(5, "w")), 0u);
  EXPECT_EQ(observe(ev, AttributeValue::of_category(4), Tokens(8, "w")), 3u);
  EXPECT_NE(length_plot_csv(t).find("target"), std::string::npos);
}

TEST_F(ControlFixture, CopyingPredicateGivesFullMatch) {
  AttributeEmbedder e;
  e.type = AttributeType::kPredicates;
  e.top_predicates = {"bought", "lost", "found"};
  const Evaluator ev{AttributeType::kPredicates, &lex, &e};
  GenerationList gens;
  for (const auto& p : e.top_predicates) gens.push_back({"s", "attr", p, toks("he " + p + " it ."), 0, {}});
  const auto t = match_table_from_generations(ev, gens);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(t.match_percent(r), 100.0);
  EXPECT_EQ(observe(ev, e.parse("lost"), toks("he found it .")), 1u);
}

TEST_F(ControlFixture, FrameContainment) {
  AttributeEmbedder e;
  e.type = AttributeType::kFrames;
  e.inventory = FrameInventory({"Buildings", "Locative_relation", "Kinship"});
  const Evaluator ev{AttributeType::kFrames, &lex, &e};
  EXPECT_EQ(observe(ev, AttributeValue::of_frames({0, 1}), toks("she was at the store .")), 0u);
  EXPECT_EQ(observe(ev, AttributeValue::of_frames({2}), toks("she was at the store .")), 1u);
}

TEST_F(ControlFixture, ClusterNearestCentroid) {
  AttributeEmbedder e;
  e.type = AttributeType::kClusters;
  e.word_table = EmbeddingTable(2);
  e.word_table.add("x", {1, 0});
  e.word_table.add("y", {0, 1});
  e.centroids = {{0.9, 0.1}, {0.1, 0.9}};
  const Evaluator ev{AttributeType::kClusters, nullptr, &e};
  EXPECT_EQ(observe(ev, AttributeValue::of_category(0), toks("y y x")), 1u);
  EXPECT_EQ(observe(ev, AttributeValue::of_category(0), toks("x")), 0u);
}

TEST_F(ControlFixture, EvaluatorMismatchIsAnError) {
  AttributeEmbedder e;
  e.type = AttributeType::kSentiment;
  const Evaluator ev{AttributeType::kFrames, &lex, &e};
  EXPECT_THROW(observe(ev, AttributeValue::of_category(0), toks("a")), ContractError);
  AttributeEmbedder bow;
  bow.type = AttributeType::kBow;
  EXPECT_THROW(empty_match_table(bow, {}), ContractError);
}

}  // namespace
}  // namespace storyctl
