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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/autodiff/ops.hpp"
#include "storyctl/autodiff/params.hpp"
#include "storyctl/corpus/annotation.hpp"
#include "storyctl/corpus/embeddings.hpp"
#include "storyctl/corpus/frames.hpp"
#include "storyctl/corpus/kmeans.hpp"
#include "storyctl/corpus/pca.hpp"

namespace storyctl {

enum class AttributeType {
  kNone,
  kSentiment,
  kLength3,
  kLength30,
  kPredicates,
  kFrames,
  kClusters,
  kBow,
};

inline constexpr std::array<const char*, 8> kAttributeNames = {
    "none", "sentiment", "length3", "length30", "predicates", "frames", "clusters", "bow"};

inline std::string to_string(AttributeType t) {
  return kAttributeNames[static_cast<std::size_t>(t)];
}

inline AttributeType parse_attribute_type(const std::string& name) {
  for (std::size_t i = 0; i < kAttributeNames.size(); ++i) {
    if (name == kAttributeNames[i]) return static_cast<AttributeType>(i);
  }
  throw ContractError("unknown attribute type '" + name + "'");
}

// One control value. Only the field matching the embedder's type is read.
struct AttributeValue {
  std::size_t category = 0;             // sentiment, length bin, cluster id
  std::vector<std::string> predicates;  // bag of verbs
  FrameSet frames;                      // resolved frame ids
  Vec vector;                           // bow sentence vector

  static AttributeValue of_category(std::size_t c) {
    AttributeValue v;
    v.category = c;
    return v;
  }
  static AttributeValue of_frames(FrameSet f) {
    AttributeValue v;
    v.frames = std::move(f);
    return v;
  }

  friend bool operator==(const AttributeValue&, const AttributeValue&) = default;
};

// z for one value; z_enc and z_dec are the same vector.
struct AttributeVector {
  Vec z;
  bool degenerate = false;
};

// Maps attribute values to conditioning vectors and carries every resource
// needed to do so (inventory, PCA, word vectors, centroids) so a checkpoint
// is self-contained.
struct AttributeEmbedder {
  static constexpr std::size_t kFrameDim = 64;

  AttributeType type = AttributeType::kNone;
  std::size_t frame_dim = kFrameDim;
  FrameInventory inventory;            // frames
  std::vector<FrameSet> top_sets;      // frames: candidate pool for reranking
  PcaProjection pca;                   // predicates
  EmbeddingTable predicate_table;      // predicates
  std::vector<std::string> top_predicates;  // predicates, frequency-ranked
  EmbeddingTable word_table;           // bow, clusters
  std::vector<Vec> centroids;          // clusters

  bool learned() const { return type == AttributeType::kFrames; }

  // Width of z_enc (equal to z_dec).
  std::size_t dim() const {
    switch (type) {
      case AttributeType::kNone: return 0;
      case AttributeType::kSentiment: return 3;
      case AttributeType::kLength3: return 3;
      case AttributeType::kLength30: return 30;
      case AttributeType::kPredicates: return pca.output_dim();
      case AttributeType::kFrames: return frame_dim;
      case AttributeType::kClusters: return centroids.size();
      case AttributeType::kBow: return word_table.dim();
    }
    return 0;
  }

  std::size_t category_count() const {
    switch (type) {
      case AttributeType::kSentiment: return 3;
      case AttributeType::kLength3: return 3;
      case AttributeType::kLength30: return 30;
      case AttributeType::kClusters: return centroids.size();
      default: return 0;
    }
  }
  bool categorical() const { return category_count() > 0; }

  void validate(const AttributeValue& v) const {
    if (categorical() && v.category >= category_count()) {
      throw ContractError(to_string(type) + ": value id " + std::to_string(v.category) +
                          " out of range [0, " + std::to_string(category_count()) + ")");
    }
    if (type == AttributeType::kFrames) {
      for (int id : v.frames) {
        if (id < 0 || id > FrameInventory::kCatchAll) {
          throw ContractError("frames: frame id " + std::to_string(id) + " out of range");
        }
      }
    }
    if (type == AttributeType::kBow && v.vector.size() != dim()) {
      throw ContractError("bow: vector dimension " + std::to_string(v.vector.size()) +
                          " differs from " + std::to_string(dim()));
    }
  }

  // Value-level z. Learned frame vectors read the table R from `frames_table`.
  AttributeVector embed(const AttributeValue& v, const ad::Tensor<double>* frames_table = nullptr) const {
    validate(v);
    AttributeVector out;
    out.z.assign(dim(), 0.0);
    if (categorical()) {
      out.z[v.category] = 1.0;
    } else if (type == AttributeType::kPredicates) {
      const PredicateVector p = predicate_vector(v.predicates, predicate_table, pca);
      out.z = p.values;
      out.degenerate = p.degenerate;
    } else if (type == AttributeType::kBow) {
      out.z = v.vector;
    } else if (type == AttributeType::kFrames) {
      if (!frames_table) throw ContractError("frames: embedding table required");
      out.degenerate = v.frames.empty();
      for (int id : v.frames) {
        for (std::size_t k = 0; k < out.z.size(); ++k) {
          out.z[k] += frames_table->at(static_cast<std::size_t>(id), k);
        }
      }
    }
    return out;
  }

  // Oracle value read from a story's gold annotation.
  AttributeValue value_from(const Annotation& a, const Tokens& continuation) const {
    AttributeValue v;
    switch (type) {
      case AttributeType::kNone: break;
      case AttributeType::kSentiment: v.category = static_cast<std::size_t>(a.sentiment); break;
      case AttributeType::kLength3: v.category = bin_length(a.length, LengthScheme::kThreeBins); break;
      case AttributeType::kLength30: v.category = bin_length(a.length, LengthScheme::kThirtyBins); break;
      case AttributeType::kPredicates: v.predicates = a.predicates; break;
      case AttributeType::kFrames: v.frames = resolve_frames(a.frames, inventory); break;
      case AttributeType::kClusters:
        if (!a.cluster) throw ContractError("story " + a.story_id + " has no cluster label");
        v.category = static_cast<std::size_t>(*a.cluster);
        break;
      case AttributeType::kBow: v.vector = bow_embed(continuation, word_table); break;
    }
    validate(v);
    return v;
  }

  // The values generate_per_attribute iterates over.
  std::vector<AttributeValue> enumerate() const {
    std::vector<AttributeValue> out;
    if (categorical()) {
      for (std::size_t c = 0; c < category_count(); ++c) out.push_back(AttributeValue::of_category(c));
    } else if (type == AttributeType::kFrames) {
      for (std::size_t j = 0; j < inventory.ranked_count(); ++j) {
        out.push_back(AttributeValue::of_frames({static_cast<int>(j)}));
      }
    } else if (type == AttributeType::kPredicates) {
      for (const auto& p : top_predicates) {
        AttributeValue v;
        v.predicates = {p};
        out.push_back(std::move(v));
      }
    } else {
      throw ContractError(to_string(type) + ": values cannot be enumerated");
    }
    return out;
  }

  std::string describe(const AttributeValue& v) const {
    validate(v);
    switch (type) {
      case AttributeType::kNone: return "none";
      case AttributeType::kSentiment: return to_string(static_cast<Sentiment>(v.category));
      case AttributeType::kLength3: return bin_label(v.category, LengthScheme::kThreeBins);
      case AttributeType::kLength30: return bin_label(v.category, LengthScheme::kThirtyBins);
      case AttributeType::kClusters: return "cluster " + std::to_string(v.category);
      case AttributeType::kPredicates: return join_tokens(v.predicates, "+");
      case AttributeType::kFrames: {
        std::vector<std::string> names;
        for (int id : v.frames) names.push_back(frame_name(id));
        return names.empty() ? "{}" : join_tokens(names, "+");
      }
      case AttributeType::kBow: return "bow";
    }
    return "";
  }

  std::string frame_name(int id) const {
    return id == FrameInventory::kCatchAll || static_cast<std::size_t>(id) < inventory.ranked_count()
               ? inventory.name(id)
               : "frame-" + std::to_string(id);
  }

  // Parses a user-facing value: sentiment names, length bin ids or labels,
  // cluster ids, verb lists, frame names or ids, bow text or vectors.
  AttributeValue parse(const nlohmann::json& j) const {
    AttributeValue v;
    auto fail = [&](const std::string& why) -> AttributeValue {
      throw ContractError(to_string(type) + ": invalid value " + j.dump() + " (" + why + ")");
    };
    switch (type) {
      case AttributeType::kNone:
        if (!j.is_null()) return fail("model is unconditioned");
        break;
      case AttributeType::kSentiment:
        if (!j.is_string()) return fail("expected a sentiment name");
        try {
          v.category = static_cast<std::size_t>(parse_sentiment(j.get<std::string>()));
        } catch (const ContractError&) {
          return fail("expected negative, neutral or positive");
        }
        break;
      case AttributeType::kLength3:
      case AttributeType::kLength30:
      case AttributeType::kClusters:
        if (j.is_number_integer() && j.get<long long>() >= 0) {
          v.category = j.get<std::size_t>();
        } else if (j.is_string() && type != AttributeType::kClusters) {
          const auto scheme = type == AttributeType::kLength3 ? LengthScheme::kThreeBins
                                                              : LengthScheme::kThirtyBins;
          std::size_t c = 0;
          while (c < bin_count(scheme) && bin_label(c, scheme) != j.get<std::string>()) ++c;
          if (c == bin_count(scheme)) return fail("unknown bin label");
          v.category = c;
        } else {
          return fail("expected a non-negative id");
        }
        break;
      case AttributeType::kPredicates:
        if (j.is_string()) {
          v.predicates = split_tokens(j.get<std::string>());
        } else if (j.is_array()) {
          for (const auto& p : j) {
            if (!p.is_string()) return fail("expected verbs");
            v.predicates.push_back(p.get<std::string>());
          }
        } else {
          return fail("expected a verb list");
        }
        break;
      case AttributeType::kFrames: {
        if (!j.is_array()) return fail("expected a list of frame names");
        std::set<int> ids;
        for (const auto& f : j) {
          if (f.is_number_integer()) {
            ids.insert(f.get<int>());
          } else if (f.is_string()) {
            const int id = inventory.id(f.get<std::string>());
            if (id == FrameInventory::kCatchAll && f.get<std::string>() != "<catch-all>") {
              return fail("frame '" + f.get<std::string>() + "' is not in the inventory");
            }
            ids.insert(id);
          } else {
            return fail("expected frame names");
          }
        }
        v.frames.assign(ids.begin(), ids.end());
        break;
      }
      case AttributeType::kBow:
        if (j.is_string()) {
          v.vector = bow_embed(tokenize_raw(j.get<std::string>()), word_table);
        } else if (j.is_array()) {
          v.vector = j.get<Vec>();
        } else {
          return fail("expected text or a vector");
        }
        break;
    }
    try {
      validate(v);
    } catch (const ContractError& e) {
      return fail(e.what());
    }
    return v;
  }

  nlohmann::json value_to_json(const AttributeValue& v) const {
    switch (type) {
      case AttributeType::kNone: return nullptr;
      case AttributeType::kSentiment: return describe(v);
      case AttributeType::kPredicates: return v.predicates;
      case AttributeType::kFrames: {
        nlohmann::json names = nlohmann::json::array();
        for (int id : v.frames) names.push_back(frame_name(id));
        return names;
      }
      case AttributeType::kBow: return v.vector;
      default: return v.category;
    }
  }

  // Names of the legal values, for clients.
  std::vector<std::string> value_names() const {
    if (type == AttributeType::kNone || type == AttributeType::kBow) return {};
    std::vector<std::string> out;
    for (const auto& v : enumerate()) out.push_back(describe(v));
    return out;
  }
};

// Tape-level z. Returns nothing for the unconditioned model.
template <typename T>
std::optional<ad::NodeId> embed_attribute(ad::Tape<T>& tape, const AttributeEmbedder& embedder,
                                          const AttributeValue& value,
                                          std::optional<ad::NodeId> frames_table) {
  if (embedder.type == AttributeType::kNone) return std::nullopt;
  if (embedder.learned()) {
    embedder.validate(value);
    if (!frames_table) throw ContractError("frames: embedding table required");
    if (value.frames.empty()) {
      return tape.constant(ad::Tensor<T>({embedder.dim()}));
    }
    std::vector<ad::NodeId> rows;
    for (int id : value.frames) rows.push_back(ad::row(tape, *frames_table, static_cast<std::size_t>(id)));
    ad::NodeId z = rows.front();
    for (std::size_t i = 1; i < rows.size(); ++i) z = ad::add(tape, z, rows[i]);
    return z;
  }
  const Vec z = embedder.embed(value).z;
  return tape.constant(ad::Tensor<T>({z.size()}, std::vector<T>(z.begin(), z.end())));
}

inline nlohmann::json to_json(const AttributeEmbedder& e) {
  nlohmann::json j = {{"type", to_string(e.type)}, {"frame_dim", e.frame_dim}};
  if (e.type == AttributeType::kFrames) {
    j["inventory"] = e.inventory.ranked();
    j["top_sets"] = e.top_sets;
  }
  if (e.type == AttributeType::kPredicates) {
    j["pca"] = to_json(e.pca);
    j["top_predicates"] = e.top_predicates;
    nlohmann::json table = nlohmann::json::object();
    for (const auto& t : e.predicate_table.tokens()) table[t] = *e.predicate_table.find(t);
    j["predicate_table"] = table;
  }
  if (e.type == AttributeType::kBow || e.type == AttributeType::kClusters) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& t : e.word_table.tokens()) table.push_back({t, *e.word_table.find(t)});
    j["word_table"] = table;
    j["word_dim"] = e.word_table.dim();
  }
  if (e.type == AttributeType::kClusters) j["centroids"] = e.centroids;
  return j;
}

inline AttributeEmbedder attribute_embedder_from_json(const nlohmann::json& j) {
  AttributeEmbedder e;
  e.type = parse_attribute_type(j.at("type").get<std::string>());
  e.frame_dim = j.at("frame_dim").get<std::size_t>();
  if (j.contains("inventory")) e.inventory = FrameInventory(j.at("inventory").get<std::vector<std::string>>());
  if (j.contains("top_sets")) e.top_sets = j.at("top_sets").get<std::vector<FrameSet>>();
  if (j.contains("pca")) e.pca = pca_from_json(j.at("pca"));
  if (j.contains("top_predicates")) e.top_predicates = j.at("top_predicates").get<std::vector<std::string>>();
  if (j.contains("predicate_table")) {
    e.predicate_table = EmbeddingTable(e.pca.input_dim());
    for (const auto& [token, v] : j.at("predicate_table").items()) e.predicate_table.add(token, v.get<Vec>());
  }
  if (j.contains("word_table")) {
    e.word_table = EmbeddingTable(j.at("word_dim").get<std::size_t>());
    for (const auto& entry : j.at("word_table")) {
      e.word_table.add(entry.at(0).get<std::string>(), entry.at(1).get<Vec>());
    }
  }
  if (j.contains("centroids")) e.centroids = j.at("centroids").get<std::vector<Vec>>();
  return e;
}

// Resources an embedder may draw on when it is built for training.
struct AttributeResources {
  const EmbeddingTable* embeddings = nullptr;  // predicates, bow, clusters
  const PcaProjection* pca = nullptr;          // predicates
  const ClusterModel* clusters = nullptr;      // clusters
  std::size_t frame_dim = AttributeEmbedder::kFrameDim;
};

inline AttributeEmbedder make_attribute_embedder(AttributeType type,
                                                 const std::vector<Annotation>& training,
                                                 const std::vector<std::string>& vocabulary_words,
                                                 const AttributeResources& res) {
  AttributeEmbedder e;
  e.type = type;
  e.frame_dim = res.frame_dim;
  auto need = [&](const void* p, const char* what) {
    if (!p) throw ContractError(to_string(type) + " attribute needs " + what);
  };
  if (type == AttributeType::kFrames) {
    e.inventory = FrameInventory::build(training);
    e.top_sets = top_frame_sets(training, e.inventory);
  } else if (type == AttributeType::kPredicates) {
    need(res.embeddings, "word embeddings");
    need(res.pca, "a fitted PCA projection");
    e.pca = *res.pca;
    std::map<std::string, std::size_t> counts;
    for (const auto& a : training) {
      for (const auto& p : a.predicates) ++counts[p];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < 100; ++i) e.top_predicates.push_back(ranked[i].first);
    std::vector<std::string> keep;
    for (const auto& [p, n] : ranked) keep.push_back(p);
    e.predicate_table = res.embeddings->subset(keep);
    if (e.predicate_table.size() == 0) e.predicate_table = EmbeddingTable(res.pca->input_dim());
  } else if (type == AttributeType::kBow || type == AttributeType::kClusters) {
    need(res.embeddings, "word embeddings");
    e.word_table = res.embeddings->subset(vocabulary_words);
    if (e.word_table.size() == 0) e.word_table = EmbeddingTable(res.embeddings->dim());
    if (type == AttributeType::kClusters) {
      need(res.clusters, "a cluster model");
      e.centroids = res.clusters->centroids;
    }
  }
  return e;
}

}  // namespace storyctl
