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
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "storyctl/corpus/annotation.hpp"
#include "storyctl/corpus/embeddings.hpp"
#include "storyctl/corpus/frames.hpp"
#include "storyctl/corpus/kmeans.hpp"
#include "storyctl/corpus/pca.hpp"
#include "storyctl/corpus/synthetic.hpp"
#include "storyctl/corpus/vocabulary.hpp"

namespace storyctl {
namespace {

std::vector<Story> parse(const std::string& text) {
  std::istringstream in(text);
  return read_corpus(in, "test");
}

Story story_of(const std::string& id, const std::string& continuation) {
  return parse(id + "\ta .\tb .\tc .\td .\t" + continuation + "\n").front();
}

TEST(LoadCorpus, ReadsWellFormedLines) {
  const auto stories = parse(
      "a .\tb .\tc .\td .\te .\n"
      "s2\tsandra needed a new phone .\tb .\tc .\td .\te .\n"
      "a .\tb .\tc .\td .\tf g .\n");
  ASSERT_EQ(stories.size(), 3u);
  EXPECT_EQ(stories[1].id, "s2");
  EXPECT_EQ(stories[1].context[0], (Tokens{"sandra", "needed", "a", "new", "phone", "."}));
  EXPECT_EQ(stories[2].continuation, (Tokens{"f", "g", "."}));
  EXPECT_NE(stories[0].id, stories[2].id);
}

TEST(LoadCorpus, MalformedLineNamesItsNumber) {
  try {
    parse("a .\tb .\tc .\td .\te .\na .\tb .\tc .\td .\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, EmptyInputIsAnError) {
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(load_corpus("/nonexistent/corpus.tsv"), FormatError);
}

TEST(LoadCorpus, EmptySentenceIsAnError) {
  EXPECT_THROW(parse("a .\t \tc .\td .\te .\n"), FormatError);
}

TEST(LoadCorpus, WriteThenReadRoundTrips) {
  const auto corpus = make_synthetic_corpus();
  std::ostringstream out;
  write_corpus(out, corpus.train);
  std::istringstream in(out.str());
  EXPECT_EQ(read_corpus(in), corpus.train);
}

TEST(Vocabulary, FourDistinctTokensPlusSpecials) {
  const auto v = Vocabulary::build(parse("a .\ta .\tb .\tb .\tc d .\n"));
  EXPECT_EQ(v.word_count(), 5u);  // a . b c d
  EXPECT_EQ(v.size(), 8u);
  const auto w = Vocabulary::build(parse("a\tb\tc\td\ta\n"));
  EXPECT_EQ(w.size(), 4u + 3u);
}

TEST(Vocabulary, KeepsMostFrequent) {
  // a:3 b:3 c:1
  const auto v = Vocabulary::build(parse("a\ta b\tb\ta c\tb\n"), 2);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(v.id("c"), v.unk());
  EXPECT_EQ(v.id("never-seen"), v.unk());
}

TEST(Vocabulary, TiesBreakLexicographically) {
  const auto v = Vocabulary::build(parse("z\ty\tx\tw\tv\n"), 3);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"v", "w", "x"}));
}

TEST(Vocabulary, DenseIdsAndSpecials) {
  const auto v = Vocabulary::build(make_synthetic_corpus().train);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(static_cast<int>(i))), static_cast<int>(i));
  EXPECT_EQ(v.token(v.unk()), Vocabulary::kUnk);
  EXPECT_EQ(v.token(v.eos()), Vocabulary::kEos);
  EXPECT_EQ(v.token(v.pad()), Vocabulary::kPad);
  EXPECT_THROW(Vocabulary::build({}, 10), ContractError);
  EXPECT_THROW(Vocabulary::build(parse("a\tb\tc\td\te\n"), 0), ContractError);
}

TEST(Vocabulary, DeterministicAndHashed) {
  const auto corpus = make_synthetic_corpus();
  const auto a = Vocabulary::build(corpus.train);
  const auto b = Vocabulary::build(corpus.train);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), Vocabulary::build(corpus.train, 20).hash());
}

TEST(Vocabulary, EncodeContextClosesSentencesWithEos) {
  const auto v = Vocabulary(std::vector<std::string>{"a", "b"});
  const std::array<Tokens, 2> ctx = {Tokens{"a"}, Tokens{"b", "zz"}};
  EXPECT_EQ(v.encode_context(ctx), (std::vector<int>{0, v.eos(), 1, v.unk(), v.eos()}));
  EXPECT_EQ(v.encode_target({"b"}), (std::vector<int>{1, v.eos()}));
}

TEST(BinLength, PaperBoundaries) {
  EXPECT_EQ(bin_length(7, LengthScheme::kThreeBins), 0u);
  EXPECT_EQ(bin_length(8, LengthScheme::kThreeBins), 1u);
  EXPECT_EQ(bin_length(13, LengthScheme::kThreeBins), 1u);
  EXPECT_EQ(bin_length(14, LengthScheme::kThreeBins), 2u);
  EXPECT_EQ(bin_length(500, LengthScheme::kThreeBins), 2u);
  EXPECT_EQ(bin_length(30, LengthScheme::kThirtyBins), 29u);
  EXPECT_EQ(bin_length(1, LengthScheme::kThirtyBins), 0u);
}

TEST(BinLength, Errors) {
  EXPECT_THROW(bin_length(0, LengthScheme::kThreeBins), ContractError);
  EXPECT_THROW(bin_length(31, LengthScheme::kThirtyBins), ContractError);
}

TEST(BinLength, MonotoneProperty) {
  for (auto scheme : {LengthScheme::kThreeBins, LengthScheme::kThirtyBins}) {
    const std::size_t top = scheme == LengthScheme::kThreeBins ? 100 : 30;
    for (std::size_t n = 1; n < top; ++n) {
      EXPECT_LE(bin_length(n, scheme), bin_length(n + 1, scheme));
      EXPECT_LT(bin_length(n, scheme), bin_count(scheme));
    }
  }
}

TEST(AnnotateHeuristic, SentimentSign) {
  Lexicons lex;
  lex.negative = {"disappointed"};
  lex.positive = {"happy"};
  EXPECT_EQ(annotate_heuristic({"i", "was", "disappointed", "."}, lex).sentiment, Sentiment::kNegative);
  EXPECT_EQ(annotate_heuristic({"i", "was", "here", "."}, lex).sentiment, Sentiment::kNeutral);
  EXPECT_EQ(annotate_heuristic({"happy", "happy", "disappointed"}, lex).sentiment, Sentiment::kPositive);
  EXPECT_EQ(annotate_heuristic({"happy", "disappointed"}, lex).sentiment, Sentiment::kNeutral);
}

TEST(AnnotateHeuristic, PredicatesAndFrames) {
  Lexicons lex;
  lex.verbs = {"wish", "known", "had"};
  lex.frame_triggers = {{"known", {"Awareness"}}, {"had", {"Possession"}}, {"before", {"Time_vector"}}};
  const auto a = annotate_heuristic({"i", "wish", "i", "had", "known", "that", "before", "."}, lex);
  EXPECT_EQ(std::set<std::string>(a.predicates.begin(), a.predicates.end()),
            (std::set<std::string>{"wish", "had", "known"}));
  EXPECT_EQ(a.frames, (std::vector<std::string>{"Awareness", "Possession", "Time_vector"}));
  EXPECT_EQ(a.length, 8u);
  EXPECT_EQ(annotate_heuristic({"nothing", "here"}, lex).frames.size(), 0u);
}

TEST(AnnotateHeuristic, PureFunction) {
  const auto corpus = make_synthetic_corpus();
  for (const Story& s : corpus.test) {
    EXPECT_EQ(annotate_heuristic(s.continuation, corpus.lexicons),
              annotate_heuristic(s.continuation, corpus.lexicons));
  }
}

TEST(AnnotateHeuristic, ReproducesSyntheticGold) {
  const auto corpus = make_synthetic_corpus();
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    for (const Story& s : *split) {
      Annotation mine = annotate_story(s, corpus.lexicons);
      const Annotation& gold = corpus.gold.at(s.id);
      mine.source = gold.source;
      mine.cluster = gold.cluster;
      EXPECT_EQ(mine, gold) << s.id;
    }
  }
}

TEST(Sidecar, RoundTrip) {
  auto corpus = make_synthetic_corpus();
  corpus.gold.find(corpus.train[0].id)->cluster = 3;
  std::ostringstream out;
  write_sidecar(out, corpus.gold);
  std::istringstream in(out.str());
  const Sidecar back = read_sidecar(in);
  for (const Story& s : corpus.train) EXPECT_EQ(back.at(s.id), corpus.gold.at(s.id));
  EXPECT_EQ(back.at(corpus.train[0].id).cluster, 3);
}

TEST(Sidecar, RejectsUnknownLabels) {
  std::istringstream in(R"({"id":"x","sentiment":"ecstatic","length":3,"predicates":[],"frames":[],"cluster":null})");
  EXPECT_THROW(read_sidecar(in), std::exception);
}

TEST(Sidecar, ReportsMissingStories) {
  const auto corpus = make_synthetic_corpus();
  Sidecar partial;
  partial.put(corpus.gold.at(corpus.train[0].id));
  const std::vector<Story> two = {corpus.train[0], corpus.train[1]};
  EXPECT_EQ(partial.missing(two), std::vector<std::string>{corpus.train[1].id});
}

TEST(Lexicons, SaveLoadRoundTrip) {
  const auto lex = synthetic::lexicons();
  const auto dir = std::filesystem::temp_directory_path() / "storyctl_lexicons_test";
  std::filesystem::create_directories(dir);
  save_lexicons(dir.string(), lex);
  const Lexicons back = load_lexicons(dir.string());
  EXPECT_EQ(back.positive, lex.positive);
  EXPECT_EQ(back.negative, lex.negative);
  EXPECT_EQ(back.verbs, lex.verbs);
  EXPECT_EQ(back.frame_triggers, lex.frame_triggers);
  std::filesystem::remove_all(dir);
}

TEST(Embeddings, GloveRoundTripAndErrors) {
  std::istringstream in("a 1 0 0\nb 0 1 0\n");
  const EmbeddingTable t = read_glove(in);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(*t.find("b"), (Vec{0, 1, 0}));
  std::ostringstream out;
  write_glove(out, t);
  std::istringstream again(out.str());
  EXPECT_EQ(*read_glove(again).find("a"), (Vec{1, 0, 0}));
  std::istringstream ragged("a 1 0 0\nb 0 1\n");
  EXPECT_THROW(read_glove(ragged), std::exception);
}

TEST(BowEmbed, Examples) {
  EmbeddingTable t(3);
  t.add("a", {1, 0, 0});
  t.add("b", {0, 1, 0});
  t.add("c", {0, 3, 4});
  const Vec c = bow_embed({"c"}, t);
  EXPECT_NEAR(c[1], 0.6, 1e-15);
  EXPECT_NEAR(c[2], 0.8, 1e-15);
  const Vec ab = bow_embed({"a", "b"}, t);
  EXPECT_NEAR(ab[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(ab[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(ab[2], 0.0);
  EXPECT_EQ(bow_embed({"zz"}, t), (Vec{0, 0, 0}));
  EXPECT_THROW(bow_embed({}, t), ContractError);
}

TEST(BowEmbed, UnknownTokensCountInDenominatorBeforeNormalizing) {
  EmbeddingTable t(2);
  t.add("a", {3, 4});
  const Vec v = bow_embed({"a", "zz", "zz"}, t);
  EXPECT_NEAR(v[0], 0.6, 1e-15);
  EXPECT_NEAR(v[1], 0.8, 1e-15);
}

TEST(BowEmbed, PermutationInvariant) {
  const auto corpus = make_synthetic_corpus();
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < 20; ++i) {
    Tokens t = corpus.train[i].continuation;
    const Vec before = bow_embed(t, corpus.embeddings);
    std::shuffle(t.begin(), t.end(), rng);
    const Vec after = bow_embed(t, corpus.embeddings);
    for (std::size_t j = 0; j < before.size(); ++j) EXPECT_NEAR(before[j], after[j], 1e-12);
  }
}

TEST(BowCounts, CountsIncludeUnk) {
  const Vocabulary v(std::vector<std::string>{"a"});
  EXPECT_EQ(bow_counts({"a", "a", "x"}, v), (Vec{2, 1, 0, 0}));
}

std::vector<Vec> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vec> rows(n, Vec(d));
  for (auto& r : rows) {
    for (auto& x : r) x = g(rng);
  }
  return rows;
}

TEST(Pca, RankDeficientDataReconstructsExactly) {
  const auto basis = random_rows(3, 100, 1);
  const auto coeffs = random_rows(80, 3, 2);
  std::vector<Vec> rows(80, Vec(100, 0.0));
  for (std::size_t r = 0; r < 80; ++r) {
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t i = 0; i < 100; ++i) rows[r][i] += coeffs[r][b] * basis[b][i] + 0.5;
    }
  }
  const auto p = fit_pca(rows, 64);
  ASSERT_EQ(p.output_dim(), 64u);
  for (std::size_t j = 3; j < 64; ++j) EXPECT_NEAR(p.explained_variance[j], 0.0, 1e-8);
  for (const Vec& r : rows) {
    const Vec back = p.reconstruct(p.project(r));
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(back[i], r[i], 1e-8);
  }
  for (double x : p.project(p.mean)) EXPECT_EQ(x, 0.0);
}

TEST(Pca, OrthonormalRowsAndSortedVariances) {
  const auto rows = random_rows(200, 100, 3);
  const auto p = fit_pca(rows, 64);
  for (std::size_t a = 0; a < 64; ++a) {
    for (std::size_t b = 0; b < 64; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < 100; ++i) dot += p.components[a][i] * p.components[b][i];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-6);
    }
  }
  for (std::size_t j = 1; j < 64; ++j) EXPECT_LE(p.explained_variance[j], p.explained_variance[j - 1]);
}

TEST(Pca, LeadingVarianceMatchesPowerIteration) {
  const auto rows = random_rows(200, 10, 4);
  Vec mean(10, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 10; ++i) mean[i] += r[i] / 200.0;
  }
  std::vector<Vec> cov(10, Vec(10, 0.0));
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < 10; ++j) cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / 199.0;
    }
  }
  Vec v(10, 1.0);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Vec w(10, 0.0);
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < 10; ++j) w[i] += cov[i][j] * v[j];
    }
    lambda = l2_norm(w);
    for (std::size_t i = 0; i < 10; ++i) v[i] = w[i] / lambda;
  }
  const auto p = fit_pca(rows, 2);
  EXPECT_NEAR(p.explained_variance[0], lambda, 1e-9);
  double dot = 0.0;
  for (std::size_t i = 0; i < 10; ++i) dot += v[i] * p.components[0][i];
  EXPECT_NEAR(std::abs(dot), 1.0, 1e-9);
}

TEST(Pca, Errors) {
  EXPECT_THROW(fit_pca(random_rows(10, 100, 1), 64), ContractError);
  EXPECT_THROW(fit_pca(random_rows(100, 10, 1), 64), ContractError);
}

TEST(Pca, JsonRoundTrip) {
  const auto p = fit_pca(random_rows(30, 8, 9), 4);
  EXPECT_EQ(pca_from_json(nlohmann::json::parse(to_json(p).dump())), p);
}

TEST(PredicateVector, Examples) {
  EmbeddingTable t(4);
  t.add("got", {1, 2, 0, 0});
  t.add("went", {0, 1, 3, 0});
  t.add("loved", {2, 0, 0, 1});
  const auto p = fit_pca(random_rows(20, 4, 6), 3);
  const auto single = predicate_vector({"loved"}, t, p);
  EXPECT_EQ(single.values, p.project({2, 0, 0, 1}));
  EXPECT_FALSE(single.degenerate);
  EXPECT_EQ(predicate_vector({"got", "went"}, t, p).values, predicate_vector({"went", "got"}, t, p).values);
  const auto unknown = predicate_vector({"zz"}, t, p);
  EXPECT_TRUE(unknown.degenerate);
  const Vec expected = p.project({0, 0, 0, 0});
  for (std::size_t i = 0; i < 3; ++i) {
    double oracle = 0.0;
    for (std::size_t j = 0; j < 4; ++j) oracle -= p.components[i][j] * p.mean[j];
    EXPECT_NEAR(unknown.values[i], oracle, 1e-12);
    EXPECT_EQ(unknown.values[i], expected[i]);
  }
  EXPECT_TRUE(predicate_vector({}, t, p).degenerate);
}

TEST(Kmeans, SingleClusterIsTheMean) {
  const auto rows = random_rows(50, 5, 2);
  const auto m = kmeans(rows, 1, 0);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[i] / 50.0;
    EXPECT_NEAR(m.centroids[0][i], mean, 1e-12);
  }
}

TEST(Kmeans, TwoDistantPoints) {
  std::vector<Vec> rows;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({0.0, 0.0});
    rows.push_back({100.0, 50.0});
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = kmeans(rows, 2, seed);
    std::set<Vec> got(m.centroids.begin(), m.centroids.end());
    EXPECT_EQ(got, (std::set<Vec>{{0.0, 0.0}, {100.0, 50.0}}));
    EXPECT_EQ(kmeans_objective(m, rows), 0.0);
  }
}

TEST(Kmeans, MonotoneObjectiveAndReproducible) {
  const auto rows = random_rows(300, 6, 11);
  for (std::uint64_t seed = 1; seed < 6; ++seed) {
    const auto m = kmeans(rows, 5, seed);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i) {
      EXPECT_LE(m.objective_history[i], m.objective_history[i - 1] + 1e-9);
    }
    EXPECT_EQ(m.centroids, kmeans(rows, 5, seed).centroids);
  }
}

TEST(Kmeans, Errors) {
  EXPECT_THROW(kmeans({{1.0}, {1.0}, {2.0}}, 3, 0), ContractError);
  EXPECT_THROW(kmeans({}, 1, 0), ContractError);
  EXPECT_THROW(kmeans({{1.0}}, 0, 0), ContractError);
}

TEST(Kmeans, JsonRoundTrip) {
  const auto m = kmeans(random_rows(40, 3, 1), 3, 7);
  const auto back = cluster_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.centroids, m.centroids);
  EXPECT_EQ(back.seed, 7u);
  auto bad = to_json(m);
  bad["schema_version"] = 99;
  EXPECT_THROW(cluster_model_from_json(bad), FormatError);
}

TEST(FrameInventory, RanksAndCatchAll) {
  std::vector<Annotation> anns(3);
  anns[0].frames = {"B", "A"};
  anns[1].frames = {"B", "C"};
  anns[2].frames = {"B", "C", "C"};
  const auto inv = FrameInventory::build(anns);
  EXPECT_EQ(inv.ranked(), (std::vector<std::string>{"B", "C", "A"}));
  EXPECT_EQ(inv.id("B"), 0);
  EXPECT_EQ(inv.id("Unseen"), FrameInventory::kCatchAll);
  EXPECT_EQ(resolve_frames({"C", "C", "Unseen"}, inv), (FrameSet{1, 100}));
  EXPECT_EQ(resolve_frames({"A", "A"}, inv), resolve_frames({"A"}, inv));
  EXPECT_EQ(frame_inventory_from_json(to_json(inv)), inv);
}

TEST(FrameInventory, CapsAtOneHundred) {
  std::vector<Annotation> anns(1);
  for (int i = 0; i < 150; ++i) anns[0].frames.push_back("F" + std::to_string(1000 + i));
  const auto inv = FrameInventory::build(anns);
  EXPECT_EQ(inv.ranked_count(), 100u);
  EXPECT_EQ(inv.id("F1000"), 0);
  EXPECT_EQ(inv.id("F1149"), 100);
}

TEST(Synthetic, LengthsRespectTheirBinsAndLabelsAreBalanced) {
  const auto corpus = make_synthetic_corpus();
  std::map<Sentiment, int> sentiments;
  for (const Story& s : corpus.train) {
    const auto& a = corpus.gold.at(s.id);
    EXPECT_EQ(a.length, s.continuation.size());
    EXPECT_LE(a.length, 30u);
    ++sentiments[a.sentiment];
  }
  EXPECT_EQ(sentiments.size(), 3u);
  for (const auto& [label, count] : sentiments) EXPECT_GT(count, 80) << to_string(label);
}

}  // namespace
}  // namespace storyctl
