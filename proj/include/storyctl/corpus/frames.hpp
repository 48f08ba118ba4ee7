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
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/corpus/annotation.hpp"

namespace storyctl {

inline constexpr int kArtifactSchemaVersion = 1;

// Ranked names of the most frequent training frames; every other frame maps
// to the catch-all id.
class FrameInventory {
 public:
  static constexpr std::size_t kTopFrames = 100;
  static constexpr int kCatchAll = 100;
  static constexpr std::size_t kSlots = kTopFrames + 1;

  FrameInventory() = default;
  explicit FrameInventory(std::vector<std::string> ranked) : names_(std::move(ranked)) {
    if (names_.size() > kTopFrames) {
      throw ContractError("frame inventory: more than 100 ranked frames");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!rank_.emplace(names_[i], static_cast<int>(i)).second) {
        throw ContractError("frame inventory: duplicate frame '" + names_[i] + "'");
      }
    }
  }

  // Ranks frames by the number of training continuations evoking them;
  // ties break lexicographically.
  static FrameInventory build(const std::vector<Annotation>& annotations) {
    std::map<std::string, std::size_t> counts;
    for (const Annotation& a : annotations) {
      std::set<std::string> distinct(a.frames.begin(), a.frames.end());
      for (const auto& f : distinct) ++counts[f];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> names;
    for (std::size_t i = 0; i < ranked.size() && i < kTopFrames; ++i) {
      names.push_back(ranked[i].first);
    }
    return FrameInventory(std::move(names));
  }

  int id(const std::string& frame) const {
    auto it = rank_.find(frame);
    return it == rank_.end() ? kCatchAll : it->second;
  }
  std::string name(int id) const {
    if (id == kCatchAll) return "<catch-all>";
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
      throw ContractError("frame inventory: id " + std::to_string(id) + " is unused");
    }
    return names_[static_cast<std::size_t>(id)];
  }
  const std::vector<std::string>& ranked() const { return names_; }
  std::size_t ranked_count() const { return names_.size(); }

  friend bool operator==(const FrameInventory& a, const FrameInventory& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> rank_;
};

using FrameSet = std::vector<int>;  // sorted, distinct ids in [0, 100]

// Maps names to ids; unknown frames pool into the catch-all, duplicates
// collapse.
inline FrameSet resolve_frames(const std::vector<std::string>& names,
                               const FrameInventory& inventory) {
  std::set<int> ids;
  for (const auto& n : names) ids.insert(inventory.id(n));
  return {ids.begin(), ids.end()};
}

// The `limit` most frequent resolved frame sets among training
// continuations, distinct, frequency-ranked, ties by lexicographic id order.
inline std::vector<FrameSet> top_frame_sets(const std::vector<Annotation>& annotations,
                                            const FrameInventory& inventory,
                                            std::size_t limit = 100) {
  std::map<FrameSet, std::size_t> counts;
  for (const Annotation& a : annotations) {
    FrameSet s = resolve_frames(a.frames, inventory);
    if (!s.empty()) ++counts[s];
  }
  std::vector<std::pair<FrameSet, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<FrameSet> out;
  for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) out.push_back(ranked[i].first);
  return out;
}

inline nlohmann::json to_json(const FrameInventory& inv) {
  return {{"schema_version", kArtifactSchemaVersion},
          {"kind", "frame_inventory"},
          {"frames", inv.ranked()},
          {"catch_all_id", FrameInventory::kCatchAll}};
}

inline void require_artifact(const nlohmann::json& j, const std::string& kind) {
  const int version = j.at("schema_version").get<int>();
  if (version != kArtifactSchemaVersion) {
    throw FormatError(kind + ": schema version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kArtifactSchemaVersion) + ")");
  }
  if (j.at("kind").get<std::string>() != kind) {
    throw FormatError("expected a '" + kind + "' artifact, got '" +
                      j.at("kind").get<std::string>() + "'");
  }
}

inline FrameInventory frame_inventory_from_json(const nlohmann::json& j) {
  require_artifact(j, "frame_inventory");
  return FrameInventory(j.at("frames").get<std::vector<std::string>>());
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write");
  out << j.dump(2) << '\n';
}

}  // namespace storyctl
