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
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "storyctl/autodiff/tensor.hpp"

namespace storyctl {

// Raised for malformed input files; the message names the file and line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Tokens = std::vector<std::string>;

// A five-sentence story: four context sentences and the gold continuation
// (without its terminal <eos>).
struct Story {
  std::string id;
  std::array<Tokens, 4> context;
  Tokens continuation;

  friend bool operator==(const Story&, const Story&) = default;
};

// Splits pre-tokenized text on whitespace.
inline Tokens split_tokens(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// Tokenizer for raw user text: lowercases and splits punctuation off words.
inline Tokens tokenize_raw(std::string_view text) {
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c) && ch != '\'' && ch != '-' && ch != '$') {
      spaced += ' ';
      spaced += ch;
      spaced += ' ';
    } else {
      spaced += static_cast<char>(std::tolower(c));
    }
  }
  return split_tokens(spaced);
}

inline std::string join_tokens(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// Space-joined text with the space before sentence-final punctuation removed.
inline std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const std::string& t : tokens) {
    const bool attach = t == "." || t == "!" || t == "?" || t == "," || t == ";" ||
                        t == ":" || t == "'s" || t == "n't";
    if (!out.empty() && !attach) out += ' ';
    out += t;
  }
  return out;
}

// Parses one corpus line: 5 tab-separated sentences, optionally preceded by
// an id column.
inline Story parse_story_line(const std::string& line, std::size_t line_number,
                              const std::string& source = "corpus") {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos
                                                                 : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  const std::string where = source + ":" + std::to_string(line_number);
  if (fields.size() != 5 && fields.size() != 6) {
    throw FormatError(where + ": expected 5 sentences (optionally after an id), got " +
                      std::to_string(fields.size()) + " fields");
  }
  Story story;
  std::size_t first = 0;
  if (fields.size() == 6) {
    story.id = fields[0];
    if (split_tokens(story.id).empty()) throw FormatError(where + ": empty story id");
    first = 1;
  } else {
    story.id = "line-" + std::to_string(line_number);
  }
  for (std::size_t s = 0; s < 5; ++s) {
    Tokens tokens = split_tokens(fields[first + s]);
    if (tokens.empty()) {
      throw FormatError(where + ": sentence " + std::to_string(s + 1) + " is empty");
    }
    if (s < 4) {
      story.context[s] = std::move(tokens);
    } else {
      story.continuation = std::move(tokens);
    }
  }
  return story;
}

inline std::vector<Story> read_corpus(std::istream& in, const std::string& source = "corpus") {
  std::vector<Story> stories;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_tokens(line).empty()) continue;
    stories.push_back(parse_story_line(line, number, source));
  }
  if (stories.empty()) throw FormatError(source + ": corpus is empty");
  return stories;
}

inline std::vector<Story> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open corpus");
  return read_corpus(in, path);
}

inline void write_corpus(std::ostream& out, const std::vector<Story>& stories) {
  for (const Story& s : stories) {
    out << s.id;
    for (const Tokens& sentence : s.context) out << '\t' << join_tokens(sentence);
    out << '\t' << join_tokens(s.continuation) << '\n';
  }
}

inline void save_corpus(const std::string& path, const std::vector<Story>& stories) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write corpus");
  write_corpus(out, stories);
}

}  // namespace storyctl
