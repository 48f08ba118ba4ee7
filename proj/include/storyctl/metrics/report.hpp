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

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/decoding/decode.hpp"
#include "storyctl/metrics/controllability.hpp"
#include "storyctl/metrics/metrics.hpp"

namespace storyctl {

// Reference-based scores of one system over a set of contexts. BLEU and
// ROUGE are means of sentence-level scores, reported x100.
struct SystemScores {
  std::string system;
  std::optional<double> perplexity;
  double bleu = 0.0;  // first item of each list
  double rouge1 = 0.0;
  double rougel = 0.0;
  double max_bleu = 0.0, avg_bleu = 0.0;
  double max_rouge1 = 0.0, avg_rouge1 = 0.0;
  double max_rougel = 0.0, avg_rougel = 0.0;
  std::optional<double> self_bleu;  // lists with at least 2 items
  std::size_t contexts = 0;
  std::size_t list_size = 0;
};

// Scores grouped generations against gold continuations keyed by story id.
inline SystemScores score_system(const std::string& name, const GenerationList& generations,
                                 const std::map<std::string, Tokens>& gold,
                                 bool multi_reference_self_bleu = false) {
  SystemScores s;
  s.system = name;
  double self_total = 0.0;
  std::size_t self_count = 0;
  for (const auto& group : group_by_context(generations)) {
    auto it = gold.find(group.front().context_id);
    if (it == gold.end()) {
      throw ContractError("score_system: no gold continuation for '" + group.front().context_id + "'");
    }
    const Tokens& ref = it->second;
    std::vector<Tokens> list;
    for (const auto& g : group) list.push_back(g.tokens.empty() ? Tokens{"<empty>"} : g.tokens);
    const auto b = max_and_avg(list, ref, [](const Tokens& c, const Tokens& r) { return bleu2(c, r); });
    const auto r1 = max_and_avg(list, ref, [](const Tokens& c, const Tokens& r) {
      return rouge(c, r, RougeVariant::kUnigram);
    });
    const auto rl = max_and_avg(list, ref, [](const Tokens& c, const Tokens& r) {
      return rouge(c, r, RougeVariant::kLcs);
    });
    s.bleu += bleu2(list.front(), ref);
    s.rouge1 += rouge(list.front(), ref, RougeVariant::kUnigram);
    s.rougel += rouge(list.front(), ref, RougeVariant::kLcs);
    s.max_bleu += b.max;
    s.avg_bleu += b.avg;
    s.max_rouge1 += r1.max;
    s.avg_rouge1 += r1.avg;
    s.max_rougel += rl.max;
    s.avg_rougel += rl.avg;
    if (list.size() >= 2) {
      self_total += self_bleu(list, multi_reference_self_bleu);
      ++self_count;
    }
    s.list_size = std::max(s.list_size, list.size());
    ++s.contexts;
  }
  if (s.contexts == 0) throw ContractError("score_system: no generations");
  const double n = static_cast<double>(s.contexts);
  for (double* v : {&s.bleu, &s.rouge1, &s.rougel, &s.max_bleu, &s.avg_bleu, &s.max_rouge1,
                    &s.avg_rouge1, &s.max_rougel, &s.avg_rougel}) {
    *v = 100.0 * *v / n;
  }
  if (self_count > 0) s.self_bleu = 100.0 * self_total / static_cast<double>(self_count);
  return s;
}

inline nlohmann::json to_json(const SystemScores& s) {
  nlohmann::json j = {{"system", s.system},
                      {"bleu", s.bleu},
                      {"rouge1", s.rouge1},
                      {"rougeL", s.rougel},
                      {"max_bleu", s.max_bleu},
                      {"avg_bleu", s.avg_bleu},
                      {"max_rouge1", s.max_rouge1},
                      {"avg_rouge1", s.avg_rouge1},
                      {"max_rougeL", s.max_rougel},
                      {"avg_rougeL", s.avg_rougel},
                      {"contexts", s.contexts},
                      {"list_size", s.list_size},
                      {"scale", "x100, mean of sentence-level scores"}};
  j["ppl"] = s.perplexity ? nlohmann::json(*s.perplexity) : nlohmann::json(nullptr);
  j["self_bleu"] = s.self_bleu ? nlohmann::json(*s.self_bleu) : nlohmann::json(nullptr);
  return j;
}

// Generic aligned table; missing values print as "-".
inline std::string format_rows(const std::string& title, const std::vector<std::string>& header,
                               const std::vector<std::vector<std::string>>& rows,
                               const std::string& note = "") {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  out << title << '\n';
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      out << (c == 0 ? "" : "  ") << (c == 0 ? std::left : std::right)
          << std::setw(static_cast<int>(width[c])) << (c < row.size() ? row[c] : "-");
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  out << std::string(total - 2, '-') << '\n';
  for (const auto& row : rows) line(row);
  if (!note.empty()) out << note << '\n';
  return out.str();
}

// Reference-based table: PPL, BLEU, ROUGE-1, ROUGE-L per system. The
// learned story-quality columns (O, R, I) need an external scorer and are
// shown as placeholders.
inline std::string format_oracle_table(const std::vector<SystemScores>& systems,
                                       const std::string& title = "Oracle attributes") {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : systems) {
    rows.push_back({s.system, s.perplexity ? format_percent(*s.perplexity) : "-",
                    format_percent(s.bleu), format_percent(s.rouge1), format_percent(s.rougel),
                    "n/a", "n/a", "n/a"});
  }
  return format_rows(title, {"system", "PPL", "BLEU", "ROUGE-1", "ROUGE-L", "O", "R", "I"},
                     rows, "O/R/I need an external story scorer; not computed.");
}

// List-based table: Max/Avg BLEU and ROUGE-L, Self-BLEU.
inline std::string format_diversity_table(const std::vector<SystemScores>& systems,
                                          const std::string& title = "Diverse lists") {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : systems) {
    rows.push_back({s.system, std::to_string(s.list_size), format_percent(s.max_bleu),
                    format_percent(s.avg_bleu), format_percent(s.max_rougel),
                    format_percent(s.avg_rougel), s.self_bleu ? format_percent(*s.self_bleu) : "-"});
  }
  return format_rows(title,
                     {"system", "n", "Max-BLEU", "Avg-BLEU", "Max-ROUGE-L", "Avg-ROUGE-L", "Self-BLEU"},
                     rows);
}

}  // namespace storyctl
