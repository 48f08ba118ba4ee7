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
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyctl/corpus/story.hpp"

namespace storyctl {

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Frequency-ranked word list followed by <unk>, <eos> and <pad>.
class Vocabulary {
 public:
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kEos = "<eos>";
  static constexpr const char* kPad = "<pad>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  // Words must be distinct and must not collide with the special tokens.
  explicit Vocabulary(std::vector<std::string> words) : tokens_(std::move(words)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i] == kUnk || tokens_[i] == kEos || tokens_[i] == kPad) {
        throw ContractError("vocabulary: '" + tokens_[i] + "' is reserved");
      }
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
        throw ContractError("vocabulary: duplicate word '" + tokens_[i] + "'");
      }
    }
    word_count_ = tokens_.size();
    for (const char* special : {kUnk, kEos, kPad}) {
      index_.emplace(special, static_cast<int>(tokens_.size()));
      tokens_.emplace_back(special);
    }
  }

  // Keeps the `size` most frequent training tokens; ties break
  // lexicographically.
  static Vocabulary build(const std::vector<Story>& stories, std::size_t size = 10000) {
    if (size < 1) throw ContractError("vocabulary: size must be at least 1");
    if (stories.empty()) throw ContractError("vocabulary: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const Story& s : stories) {
      for (const Tokens& sentence : s.context) {
        for (const auto& t : sentence) ++counts[t];
      }
      for (const auto& t : s.continuation) ++counts[t];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words;
    for (std::size_t i = 0; i < ranked.size() && words.size() < size; ++i) {
      if (ranked[i].first == kUnk || ranked[i].first == kEos || ranked[i].first == kPad) {
        continue;
      }
      words.push_back(ranked[i].first);
    }
    return Vocabulary(std::move(words));
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t word_count() const { return word_count_; }
  int unk() const { return static_cast<int>(word_count_); }
  int eos() const { return static_cast<int>(word_count_ + 1); }
  int pad() const { return static_cast<int>(word_count_ + 2); }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk() : it->second;
  }
  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw ContractError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }
  std::vector<std::string> words() const {
    return {tokens_.begin(), tokens_.begin() + static_cast<std::ptrdiff_t>(word_count_)};
  }

  std::vector<int> encode(const Tokens& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }
  // Maps ids back to strings, dropping <eos> and <pad>.
  Tokens decode(std::span<const int> ids) const {
    Tokens out;
    for (int i : ids) {
      if (i == eos() || i == pad()) continue;
      out.push_back(token(i));
    }
    return out;
  }

  // Context sentences joined into one sequence, each closed by <eos>.
  std::vector<int> encode_context(std::span<const Tokens> sentences) const {
    std::vector<int> ids;
    for (const Tokens& s : sentences) {
      for (const auto& t : s) ids.push_back(id(t));
      ids.push_back(eos());
    }
    return ids;
  }
  // Continuation ids terminated by <eos>.
  std::vector<int> encode_target(const Tokens& tokens) const {
    std::vector<int> ids = encode(tokens);
    ids.push_back(eos());
    return ids;
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      h = fnv1a64(t, h);
      h = fnv1a64("\n", h);
    }
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t word_count_ = 0;
  std::unordered_map<std::string, int> index_;
};

}  // namespace storyctl
