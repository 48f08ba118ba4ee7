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

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/corpus/annotation.hpp"
#include "storyctl/decoding/decode.hpp"
#include "storyctl/model/attribute.hpp"

namespace storyctl {

// Target value x observed value counts. For predicates and frames the
// columns are {contains, missing}; for length they are dif buckets.
struct MatchTable {
  std::string attribute;
  std::string column_title;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> match_column;  // per row: the column that counts as a match

  std::size_t row_total(std::size_t r) const {
    std::size_t n = 0;
    for (std::size_t c : counts.at(r)) n += c;
    return n;
  }
  double percent(std::size_t r, std::size_t c) const {
    const std::size_t n = row_total(r);
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(counts.at(r).at(c)) / static_cast<double>(n);
  }
  // Percentage of outputs that realise their target (observed = target,
  // dif = 0 or containment, depending on the attribute).
  double match_percent(std::size_t r) const { return percent(r, match_column.at(r)); }
  double overall_match_percent() const {
    std::size_t hit = 0, total = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      hit += counts[r][match_column.at(r)];
      total += row_total(r);
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
  }
};

// Re-annotates generated text with the same heuristics used for training
// labels.
struct Evaluator {
  AttributeType type = AttributeType::kNone;
  const Lexicons* lexicons = nullptr;
  const AttributeEmbedder* embedder = nullptr;  // inventory, centroids, word vectors
};

inline MatchTable empty_match_table(const AttributeEmbedder& e, const std::vector<AttributeValue>& targets) {
  MatchTable t;
  t.attribute = to_string(e.type);
  for (const auto& v : targets) t.rows.push_back(e.describe(v));
  switch (e.type) {
    case AttributeType::kSentiment:
      t.column_title = "observed";
      t.columns = {kSentimentNames.begin(), kSentimentNames.end()};
      break;
    case AttributeType::kClusters:
      t.column_title = "observed";
      for (std::size_t c = 0; c < e.category_count(); ++c) t.columns.push_back(e.describe(AttributeValue::of_category(c)));
      break;
    case AttributeType::kLength3:
    case AttributeType::kLength30:
      t.column_title = "dif";
      for (std::size_t d = 0; d < e.category_count(); ++d) t.columns.push_back(std::to_string(d));
      break;
    case AttributeType::kPredicates:
    case AttributeType::kFrames:
      t.column_title = "containment";
      t.columns = {"contains", "missing"};
      break;
    default:
      throw ContractError("controllability: attribute " + to_string(e.type) + " has no match table");
  }
  t.counts.assign(t.rows.size(), std::vector<std::size_t>(t.columns.size(), 0));
  for (const auto& v : targets) t.match_column.push_back(t.column_title == "observed" ? v.category : 0);
  return t;
}

// Column index of one generated continuation for a target value.
inline std::size_t observe(const Evaluator& ev, const AttributeValue& target, const Tokens& output) {
  const AttributeEmbedder& e = *ev.embedder;
  if (ev.type != e.type) {
    throw ContractError("controllability: evaluator for " + to_string(ev.type) +
                        " cannot score a " + to_string(e.type) + " model");
  }
  if (!ev.lexicons && e.type != AttributeType::kClusters && e.type != AttributeType::kLength3 &&
      e.type != AttributeType::kLength30) {
    throw ContractError("controllability: evaluator needs lexicons");
  }
  switch (e.type) {
    case AttributeType::kSentiment:
      return static_cast<std::size_t>(annotate_heuristic(output, *ev.lexicons).sentiment);
    case AttributeType::kLength3:
    case AttributeType::kLength30: {
      const auto scheme = e.type == AttributeType::kLength3 ? LengthScheme::kThreeBins
                                                            : LengthScheme::kThirtyBins;
      const std::size_t n = std::clamp<std::size_t>(output.size(), 1, 30);
      const std::size_t got = bin_length(n, scheme);
      return got > target.category ? got - target.category : target.category - got;
    }
    case AttributeType::kPredicates: {
      const auto found = annotate_heuristic(output, *ev.lexicons).predicates;
      for (const auto& p : target.predicates) {
        if (std::find(found.begin(), found.end(), p) == found.end()) return 1;
      }
      return 0;
    }
    case AttributeType::kFrames: {
      const FrameSet got = resolve_frames(annotate_heuristic(output, *ev.lexicons).frames, e.inventory);
      for (int id : target.frames) {
        if (!std::binary_search(got.begin(), got.end(), id)) return 1;
      }
      return 0;
    }
    case AttributeType::kClusters: {
      if (output.empty()) return 0;
      ClusterModel nearest;
      nearest.centroids = e.centroids;
      return nearest.assign(bow_embed(output, e.word_table));
    }
    default:
      throw ContractError("controllability: attribute " + to_string(e.type) + " has no match table");
  }
}

// Generates one continuation per (story, target value) and tallies how
// often the evaluator recovers the target.
template <typename T>
MatchTable controllability_report(const Seq2Seq<T>& model, const std::vector<Story>& stories,
                                  const Evaluator& evaluator, const std::vector<AttributeValue>& targets,
                                  std::size_t beam = 1,
                                  GenerationList* generations = nullptr) {
  MatchTable table = empty_match_table(model.embedder(), targets);
  for (const Story& s : stories) {
    const auto source = model.vocab().encode_context(s.context);
    const auto list = generate_per_attribute(model, s.id, source, targets, beam);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      ++table.counts[r][observe(evaluator, targets[r], list[r].tokens)];
    }
    if (generations) generations->insert(generations->end(), list.begin(), list.end());
  }
  return table;
}

// Tallies saved per-attribute generations; rows follow the first
// appearance of each target value.
inline MatchTable match_table_from_generations(const Evaluator& evaluator, const GenerationList& generations) {
  const AttributeEmbedder& e = *evaluator.embedder;
  std::vector<AttributeValue> targets;
  std::vector<std::size_t> row_of;
  for (const auto& g : generations) {
    const AttributeValue v = e.parse(g.attribute);
    auto it = std::find(targets.begin(), targets.end(), v);
    row_of.push_back(static_cast<std::size_t>(it - targets.begin()));
    if (it == targets.end()) targets.push_back(v);
  }
  MatchTable table = empty_match_table(e, targets);
  for (std::size_t i = 0; i < generations.size(); ++i) {
    ++table.counts[row_of[i]][observe(evaluator, targets[row_of[i]], generations[i].tokens)];
  }
  return table;
}

inline nlohmann::json to_json(const MatchTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    nlohmann::json pct = nlohmann::json::array();
    for (std::size_t c = 0; c < t.columns.size(); ++c) pct.push_back(t.percent(r, c));
    rows.push_back({{"target", t.rows[r]},
                    {"counts", t.counts[r]},
                    {"percent", pct},
                    {"match_percent", t.match_percent(r)}});
  }
  return {{"attribute", t.attribute},
          {"column_title", t.column_title},
          {"columns", t.columns},
          {"rows", rows},
          {"overall_match_percent", t.overall_match_percent()}};
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

// Aligned text: one row per target value, percentages per column and the
// match percentage (M%).
inline std::string format_match_table(const MatchTable& t, const std::string& title) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"target"};
  for (const auto& c : t.columns) header.push_back(t.column_title == "dif" ? "dif=" + c : c);
  header.push_back("M%");
  cells.push_back(header);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<std::string> row = {t.rows[r]};
    for (std::size_t c = 0; c < t.columns.size(); ++c) row.push_back(format_percent(t.percent(r, c)));
    row.push_back(format_percent(t.match_percent(r)));
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  out << title << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      out << (c == 0 ? "" : "  ") << (c == 0 ? std::left : std::right)
          << std::setw(static_cast<int>(width[c])) << cells[r][c];
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  out << "overall M% " << format_percent(t.overall_match_percent()) << '\n';
  return out.str();
}

// Length-vs-match-rate series for plotting (30-bin length tables).
inline std::string length_plot_csv(const MatchTable& t) {
  if (t.column_title != "dif") throw ContractError("length_plot_csv: not a length table");
  std::ostringstream out;
  out << "target,match_rate\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out << t.rows[r] << ',' << t.percent(r, 0) / 100.0 << '\n';
  }
  return out.str();
}

}  // namespace storyctl
