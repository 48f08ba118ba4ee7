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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "storyctl/corpus/synthetic.hpp"
#include "storyctl/model/train.hpp"

namespace storyctl {

// A corpus directory: train/dev/test.tsv, gold.jsonl, lexicons/ and
// embeddings.txt.
struct CorpusBundle {
  std::vector<Story> train, dev, test;
  Sidecar sidecar;
  Lexicons lexicons;
  EmbeddingTable embeddings;
};

inline void save_bundle(const std::string& dir, const SyntheticCorpus& c) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "lexicons");
  save_corpus(dir + "/train.tsv", c.train);
  save_corpus(dir + "/dev.tsv", c.dev);
  save_corpus(dir + "/test.tsv", c.test);
  save_sidecar(dir + "/gold.jsonl", c.gold);
  save_lexicons(dir + "/lexicons", c.lexicons);
  save_glove(dir + "/embeddings.txt", c.embeddings);
}

inline CorpusBundle load_bundle(const std::string& dir, const std::string& sidecar = "gold.jsonl") {
  CorpusBundle b;
  b.train = load_corpus(dir + "/train.tsv");
  b.dev = load_corpus(dir + "/dev.tsv");
  b.test = load_corpus(dir + "/test.tsv");
  b.sidecar = load_sidecar(dir + "/" + sidecar);
  b.lexicons = load_lexicons(dir + "/lexicons");
  b.embeddings = load_glove(dir + "/embeddings.txt");
  return b;
}

inline CorpusBundle bundle_of(const SyntheticCorpus& c) {
  return {c.train, c.dev, c.test, c.gold, c.lexicons, c.embeddings};
}

inline std::vector<Annotation> annotations_of(const std::vector<Story>& stories, const Sidecar& sidecar) {
  const auto missing = sidecar.missing(stories);
  if (!missing.empty()) {
    throw ContractError("missing annotations for stories: " + join_tokens(missing, ", "));
  }
  std::vector<Annotation> out;
  for (const Story& s : stories) out.push_back(sidecar.at(s.id));
  return out;
}

// PCA over the summed predicate embeddings of training continuations.
inline PcaProjection fit_predicate_pca(const std::vector<Story>& train, const Sidecar& sidecar,
                                       const EmbeddingTable& embeddings, std::size_t k = 64) {
  std::vector<Vec> rows;
  for (const auto& a : annotations_of(train, sidecar)) rows.push_back(predicate_sum(a.predicates, embeddings));
  return fit_pca(rows, k);
}

// k-means over BOW vectors of training continuations; every story in
// `label` gets its nearest-centroid id written into the sidecar.
inline ClusterModel cluster_continuations(const std::vector<Story>& train,
                                          const std::vector<const std::vector<Story>*>& label,
                                          Sidecar& sidecar, const EmbeddingTable& embeddings,
                                          std::size_t k = 5, std::uint64_t seed = 0) {
  std::vector<Vec> vectors;
  for (const Story& s : train) vectors.push_back(bow_embed(s.continuation, embeddings));
  ClusterModel model = kmeans(vectors, k, seed);
  model.examples.assign(k, {});
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto& ex = model.examples[model.assign(vectors[i])];
    if (ex.size() < 3) ex.push_back(join_tokens(train[i].continuation));
  }
  for (const auto* stories : label) {
    for (const Story& s : *stories) {
      Annotation a = sidecar.at(s.id);
      a.cluster = static_cast<int>(model.assign(bow_embed(s.continuation, embeddings)));
      sidecar.put(std::move(a));
    }
  }
  return model;
}

// Builds an untrained model for `type` with vocabulary and attribute
// resources drawn from the training split.
template <typename T>
Seq2Seq<T> build_model(AttributeType type, const CorpusBundle& data, const ModelConfig& config,
                       const AttributeResources& res, std::size_t vocab_size = 10000) {
  Vocabulary vocab = Vocabulary::build(data.train, vocab_size);
  std::vector<Annotation> anns;
  if (type != AttributeType::kNone && type != AttributeType::kBow) anns = annotations_of(data.train, data.sidecar);
  AttributeEmbedder e = make_attribute_embedder(type, anns, vocab.words(), res);
  return Seq2Seq<T>(config, std::move(vocab), std::move(e));
}

}  // namespace storyctl
