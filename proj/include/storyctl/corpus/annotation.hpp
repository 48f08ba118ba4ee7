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
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/corpus/story.hpp"

namespace storyctl {

enum class Sentiment { kNegative = 0, kNeutral = 1, kPositive = 2 };

inline constexpr std::array<const char*, 3> kSentimentNames = {"negative", "neutral",
                                                               "positive"};

inline std::string to_string(Sentiment s) {
  return kSentimentNames[static_cast<std::size_t>(s)];
}

inline Sentiment parse_sentiment(const std::string& name) {
  for (std::size_t i = 0; i < kSentimentNames.size(); ++i) {
    if (name == kSentimentNames[i]) return static_cast<Sentiment>(i);
  }
  throw ContractError("unknown sentiment label '" + name + "'");
}

enum class LengthScheme { kThreeBins, kThirtyBins };

inline std::size_t bin_count(LengthScheme scheme) {
  return scheme == LengthScheme::kThreeBins ? 3 : 30;
}

// Three bins cover [1,7], [8,13], [14,inf); thirty bins give each length
// 1..30 its own id.
inline std::size_t bin_length(std::size_t n, LengthScheme scheme) {
  if (n < 1) throw ContractError("bin_length: length must be at least 1");
  if (scheme == LengthScheme::kThreeBins) {
    return n <= 7 ? 0 : (n <= 13 ? 1 : 2);
  }
  if (n > 30) {
    throw ContractError("bin_length: length " + std::to_string(n) +
                        " exceeds the 30-bin scheme");
  }
  return n - 1;
}

inline std::string bin_label(std::size_t bin, LengthScheme scheme) {
  if (scheme == LengthScheme::kThirtyBins) return std::to_string(bin + 1);
  static const std::array<const char*, 3> labels = {"[1,7]", "[8,13]", "[14,inf)"};
  return labels.at(bin);
}

// Word lists backing the built-in annotators.
struct Lexicons {
  std::set<std::string> positive;
  std::set<std::string> negative;
  std::set<std::string> verbs;
  std::map<std::string, std::vector<std::string>> frame_triggers;  // token -> frames
};

namespace detail {

inline std::set<std::string> read_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open word list");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& t : split_tokens(line)) {
      if (t.front() == '#') break;
      words.insert(t);
    }
  }
  return words;
}

}  // namespace detail

// Reads positive.txt, negative.txt, verbs.txt and frames.tsv (token TAB
// frame per line) from `dir`.
inline Lexicons load_lexicons(const std::string& dir) {
  Lexicons lex;
  lex.positive = detail::read_word_list(dir + "/positive.txt");
  lex.negative = detail::read_word_list(dir + "/negative.txt");
  lex.verbs = detail::read_word_list(dir + "/verbs.txt");
  const std::string frames_path = dir + "/frames.tsv";
  std::ifstream in(frames_path);
  if (!in) throw FormatError(frames_path + ": cannot open frame triggers");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (split_tokens(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(frames_path + ":" + std::to_string(number) +
                        ": expected 'token<TAB>frame'");
    }
    auto token = split_tokens(line.substr(0, tab));
    auto frame = split_tokens(line.substr(tab + 1));
    if (token.size() != 1 || frame.size() != 1) {
      throw FormatError(frames_path + ":" + std::to_string(number) +
                        ": expected one token and one frame");
    }
    lex.frame_triggers[token[0]].push_back(frame[0]);
  }
  return lex;
}

inline void save_lexicons(const std::string& dir, const Lexicons& lex) {
  auto write_list = [&](const std::string& name, const std::set<std::string>& words) {
    std::ofstream out(dir + "/" + name);
    if (!out) throw FormatError(dir + "/" + name + ": cannot write");
    for (const auto& w : words) out << w << '\n';
  };
  write_list("positive.txt", lex.positive);
  write_list("negative.txt", lex.negative);
  write_list("verbs.txt", lex.verbs);
  std::ofstream out(dir + "/frames.tsv");
  if (!out) throw FormatError(dir + "/frames.tsv: cannot write");
  for (const auto& [token, frames] : lex.frame_triggers) {
    for (const auto& f : frames) out << token << '\t' << f << '\n';
  }
}

struct SentenceAnnotation {
  Sentiment sentiment = Sentiment::kNeutral;
  std::size_t length = 0;
  std::vector<std::string> predicates;  // order of first appearance
  std::vector<std::string> frames;      // sorted, distinct

  friend bool operator==(const SentenceAnnotation&, const SentenceAnnotation&) = default;
};

// Lexicon-driven stand-in for external sentiment, SRL and frame analyzers.
inline SentenceAnnotation annotate_heuristic(const Tokens& sentence, const Lexicons& lex) {
  SentenceAnnotation out;
  out.length = sentence.size();
  long balance = 0;
  std::set<std::string> frames;
  for (const auto& t : sentence) {
    if (lex.positive.count(t)) ++balance;
    if (lex.negative.count(t)) --balance;
    if (lex.verbs.count(t) &&
        std::find(out.predicates.begin(), out.predicates.end(), t) == out.predicates.end()) {
      out.predicates.push_back(t);
    }
    if (auto it = lex.frame_triggers.find(t); it != lex.frame_triggers.end()) {
      frames.insert(it->second.begin(), it->second.end());
    }
  }
  out.sentiment = balance > 0 ? Sentiment::kPositive
                              : (balance < 0 ? Sentiment::kNegative : Sentiment::kNeutral);
  out.frames.assign(frames.begin(), frames.end());
  return out;
}

enum class AnnotationSource { kIngested, kHeuristic };

// Per-story sidecar record describing the continuation.
struct Annotation {
  std::string story_id;
  Sentiment sentiment = Sentiment::kNeutral;
  std::size_t length = 0;
  std::vector<std::string> predicates;
  std::vector<std::string> frames;
  std::optional<int> cluster;
  // Frames of the four context sentences, when annotated.
  std::vector<std::vector<std::string>> context_frames;
  AnnotationSource source = AnnotationSource::kIngested;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

inline Annotation annotate_story(const Story& story, const Lexicons& lex) {
  const SentenceAnnotation cont = annotate_heuristic(story.continuation, lex);
  Annotation a;
  a.story_id = story.id;
  a.sentiment = cont.sentiment;
  a.length = cont.length;
  a.predicates = cont.predicates;
  a.frames = cont.frames;
  for (const Tokens& sentence : story.context) {
    a.context_frames.push_back(annotate_heuristic(sentence, lex).frames);
  }
  a.source = AnnotationSource::kHeuristic;
  return a;
}

inline nlohmann::json to_json(const Annotation& a) {
  nlohmann::json j;
  j["id"] = a.story_id;
  j["sentiment"] = to_string(a.sentiment);
  j["length"] = a.length;
  j["predicates"] = a.predicates;
  j["frames"] = a.frames;
  j["cluster"] = a.cluster ? nlohmann::json(*a.cluster) : nlohmann::json(nullptr);
  if (!a.context_frames.empty()) j["context_frames"] = a.context_frames;
  j["source"] = a.source == AnnotationSource::kHeuristic ? "heuristic" : "ingested";
  return j;
}

inline Annotation annotation_from_json(const nlohmann::json& j) {
  Annotation a;
  a.story_id = j.at("id").get<std::string>();
  a.sentiment = parse_sentiment(j.at("sentiment").get<std::string>());
  a.length = j.at("length").get<std::size_t>();
  a.predicates = j.at("predicates").get<std::vector<std::string>>();
  a.frames = j.at("frames").get<std::vector<std::string>>();
  if (j.contains("cluster") && !j.at("cluster").is_null()) a.cluster = j.at("cluster").get<int>();
  if (j.contains("context_frames")) {
    a.context_frames = j.at("context_frames").get<std::vector<std::vector<std::string>>>();
    if (a.context_frames.size() != 4) {
      throw ContractError("annotation '" + a.story_id + "': context_frames needs 4 entries");
    }
  }
  const std::string source = j.value("source", std::string("ingested"));
  if (source != "ingested" && source != "heuristic") {
    throw ContractError("annotation '" + a.story_id + "': unknown source '" + source + "'");
  }
  a.source = source == "heuristic" ? AnnotationSource::kHeuristic : AnnotationSource::kIngested;
  return a;
}

// Annotations keyed by story id, kept in file order.
class Sidecar {
 public:
  void put(Annotation a) {
    auto it = index_.find(a.story_id);
    if (it != index_.end()) {
      records_[it->second] = std::move(a);
      return;
    }
    index_.emplace(a.story_id, records_.size());
    records_.push_back(std::move(a));
  }
  const Annotation* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  Annotation* find(const std::string& id) {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  const Annotation& at(const std::string& id) const {
    const Annotation* a = find(id);
    if (!a) throw ContractError("sidecar: no annotation for story '" + id + "'");
    return *a;
  }
  const std::vector<Annotation>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Ids of `stories` lacking a record.
  std::vector<std::string> missing(const std::vector<Story>& stories) const {
    std::vector<std::string> ids;
    for (const Story& s : stories) {
      if (!find(s.id)) ids.push_back(s.id);
    }
    return ids;
  }

  friend bool operator==(const Sidecar& a, const Sidecar& b) { return a.records_ == b.records_; }

 private:
  std::vector<Annotation> records_;
  std::map<std::string, std::size_t> index_;
};

inline Sidecar read_sidecar(std::istream& in, const std::string& source = "sidecar") {
  Sidecar sidecar;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (split_tokens(line).empty()) continue;
    try {
      sidecar.put(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return sidecar;
}

inline Sidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open sidecar");
  return read_sidecar(in, path);
}

inline void write_sidecar(std::ostream& out, const Sidecar& sidecar) {
  for (const Annotation& a : sidecar.records()) out << to_json(a).dump() << '\n';
}

inline void save_sidecar(const std::string& path, const Sidecar& sidecar) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write sidecar");
  write_sidecar(out, sidecar);
}

}  // namespace storyctl
