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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "storyctl/autodiff/params.hpp"
#include "storyctl/corpus/annotation.hpp"
#include "storyctl/corpus/embeddings.hpp"

namespace storyctl {

struct SyntheticOptions {
  std::size_t stories = 500;
  std::size_t dev = 50;
  std::size_t test = 50;
  std::uint64_t seed = 7;
  std::size_t embedding_dim = 100;
};

// Templated five-sentence stories whose continuation attributes (verb,
// sentiment, length bin) are drawn independently of most of the context.
struct SyntheticCorpus {
  std::vector<Story> train;
  std::vector<Story> dev;
  std::vector<Story> test;
  Sidecar gold;  // labels known from the templates
  Lexicons lexicons;
  EmbeddingTable embeddings;
};

namespace synthetic {

struct Person {
  const char* name;
  const char* subject;
  const char* possessive;
};

inline constexpr std::array<Person, 8> kPeople = {{{"sandra", "she", "her"},
                                                   {"tom", "he", "his"},
                                                   {"amy", "she", "her"},
                                                   {"john", "he", "his"},
                                                   {"kate", "she", "her"},
                                                   {"mike", "he", "his"},
                                                   {"lisa", "she", "her"},
                                                   {"bob", "he", "his"}}};
inline constexpr std::array<const char*, 8> kItems = {"phone", "laptop", "bike",   "lamp",
                                                      "watch", "jacket", "camera", "chair"};
inline constexpr std::array<const char*, 4> kPlaces = {"store", "mall", "market", "shop"};

struct Verb {
  const char* word;
  const char* frame;
};
inline constexpr std::array<Verb, 10> kVerbs = {{{"bought", "Commerce_buy"},
                                                 {"kept", "Retaining"},
                                                 {"lost", "Losing"},
                                                 {"broke", "Cause_to_fragment"},
                                                 {"gave", "Giving"},
                                                 {"loved", "Experiencer_focus"},
                                                 {"found", "Locating"},
                                                 {"took", "Taking"},
                                                 {"sold", "Commerce_sell"},
                                                 {"returned", "Returning"}}};

// Fourth context sentence; hint h favours verbs 2h and 2h + 1.
inline constexpr std::array<const char*, 5> kHints = {
    "{pron} had some money saved .", "{pron} was in a big hurry .",
    "{pron} wanted a gift for a friend .", "{pron} looked around for a while .",
    "{pron} had an extra one at home ."};

inline constexpr std::array<const char*, 2> kPositive = {"great", "lovely"};
inline constexpr std::array<const char*, 2> kNegative = {"awful", "ugly"};

inline Lexicons lexicons() {
  Lexicons lex;
  lex.positive = {kPositive.begin(), kPositive.end()};
  lex.negative = {kNegative.begin(), kNegative.end()};
  for (const Verb& v : kVerbs) {
    lex.verbs.insert(v.word);
    lex.frame_triggers[v.word].push_back(v.frame);
  }
  for (const char* w : {"needed", "went", "had", "wanted", "looked", "was", "working"}) {
    lex.verbs.insert(w);
  }
  for (const char* w : {"great", "lovely", "awful", "ugly"}) {
    lex.frame_triggers[w].push_back("Desirability");
  }
  for (const char* p : kPlaces) lex.frame_triggers[p].push_back("Buildings");
  const std::array<std::pair<const char*, const char*>, 14> extra = {{
      {"at", "Locative_relation"},
      {"day", "Calendric_unit"},
      {"night", "Calendric_unit"},
      {"friend", "Personal_relationship"},
      {"brother", "Kinship"},
      {"needed", "Needing"},
      {"new", "Age"},
      {"old", "Age"},
      {"working", "Being_operational"},
      {"went", "Motion"},
      {"work", "Being_employed"},
      {"money", "Money"},
      {"gift", "Giving"},
      {"home", "Buildings"},
  }};
  for (const auto& [token, frame] : extra) lex.frame_triggers[token].push_back(frame);
  return lex;
}

inline std::string fill(std::string text, const Person& p, const std::string& item,
                        const std::string& place) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos)) {
      text.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace("{name}", p.name);
  replace("{pron}", p.subject);
  replace("{poss}", p.possessive);
  replace("{item}", item);
  replace("{place}", place);
  return text;
}

// Deterministic GloVe-style vector for a token.
inline Vec token_embedding(const std::string& token, std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 rng(fnv1a64(token) ^ (seed * 0x9e3779b97f4a7c15ULL));
  Vec v(dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    // Box-Muller on platform-independent uniforms.
    const double u1 = 1.0 - ad::unit_uniform(rng);
    const double u2 = ad::unit_uniform(rng);
    v[i] = scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  return v;
}

}  // namespace synthetic

inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opts = {}) {
  using namespace synthetic;
  if (opts.dev + opts.test >= opts.stories) {
    throw ContractError("synthetic corpus: dev + test must leave training stories");
  }
  SyntheticCorpus corpus;
  corpus.lexicons = lexicons();
  std::mt19937_64 rng(opts.seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::set<std::string> vocabulary;

  for (std::size_t s = 0; s < opts.stories; ++s) {
    const Person& person = kPeople[pick(kPeople.size())];
    const std::string item = kItems[pick(kItems.size())];
    const std::string place = kPlaces[pick(kPlaces.size())];
    const std::size_t hint = pick(kHints.size());
    const std::size_t verb_index =
        ad::unit_uniform(rng) < 0.6 ? 2 * hint + pick(2) : pick(kVerbs.size());
    const auto sentiment = static_cast<Sentiment>(pick(3));
    const std::size_t bin = pick(3);

    Story story;
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%04zu", s + 1);
    story.id = id;
    story.context[0] = split_tokens(fill("{name} needed a new {item} .", person, item, place));
    story.context[1] = split_tokens(fill("{poss} old {item} was not working .", person, item, place));
    story.context[2] = split_tokens(fill("{pron} went to the {place} after work .", person, item, place));
    story.context[3] = split_tokens(fill(kHints[hint], person, item, place));

    const Verb& verb = kVerbs[verb_index];
    Tokens cont = {person.name, verb.word, "the"};
    std::set<std::string> frames = {verb.frame};
    if (sentiment != Sentiment::kNeutral) {
      const auto& words = sentiment == Sentiment::kPositive ? kPositive : kNegative;
      cont.emplace_back(words[pick(words.size())]);
      frames.insert("Desirability");
    }
    cont.push_back(item);
    // Optional phrases: location (3 tokens), time (4), companion (3). Bin 1
    // takes a non-empty proper subset, bin 2 takes all three.
    unsigned phrases = 0;
    if (bin == 1) phrases = 1 + static_cast<unsigned>(pick(6));
    if (bin == 2) phrases = 7;
    if (phrases & 1u) {
      // Three forms so Locative_relation and Buildings also occur apart.
      switch (pick(3)) {
        case 0:
          cont.insert(cont.end(), {"at", "the", place});
          frames.insert({"Locative_relation", "Buildings"});
          break;
        case 1:
          cont.insert(cont.end(), {"from", "the", place});
          frames.insert("Buildings");
          break;
        default:
          cont.insert(cont.end(), {"at", "that", "moment"});
          frames.insert("Locative_relation");
          break;
      }
    }
    if (phrases & 2u) {
      const bool night = pick(2) == 1;
      cont.insert(cont.end(), {"on", "a", night ? "cold" : "quiet", night ? "night" : "day"});
      frames.insert("Calendric_unit");
    }
    if (phrases & 4u) {
      const bool brother = pick(2) == 1;
      cont.insert(cont.end(), {"with", person.possessive, brother ? "brother" : "friend"});
      frames.insert(brother ? "Kinship" : "Personal_relationship");
    }
    cont.emplace_back(".");
    story.continuation = cont;

    Annotation gold;
    gold.story_id = story.id;
    gold.sentiment = sentiment;
    gold.length = cont.size();
    gold.predicates = {verb.word};
    gold.frames.assign(frames.begin(), frames.end());
    for (const Tokens& sentence : story.context) {
      gold.context_frames.push_back(annotate_heuristic(sentence, corpus.lexicons).frames);
      vocabulary.insert(sentence.begin(), sentence.end());
    }
    vocabulary.insert(cont.begin(), cont.end());
    gold.source = AnnotationSource::kIngested;
    corpus.gold.put(std::move(gold));

    const std::size_t train_count = opts.stories - opts.dev - opts.test;
    if (s < train_count) {
      corpus.train.push_back(std::move(story));
    } else if (s < train_count + opts.dev) {
      corpus.dev.push_back(std::move(story));
    } else {
      corpus.test.push_back(std::move(story));
    }
  }
  corpus.embeddings = EmbeddingTable(opts.embedding_dim);
  for (const auto& token : vocabulary) {
    corpus.embeddings.add(token, token_embedding(token, opts.seed, opts.embedding_dim));
  }
  return corpus;
}

}  // namespace storyctl
