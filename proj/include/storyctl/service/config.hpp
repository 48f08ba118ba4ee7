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

#include <fstream>
#include <istream>
#include <map>
#include <string>

#include "storyctl/model/train.hpp"
#include "storyctl/selection/frame_predictor.hpp"

namespace storyctl {

// `key = value` lines; `#` starts a comment. Later keys override earlier
// ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "config") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t n = 0;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
      ++n;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw FormatError(source + ":" + std::to_string(n) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw FormatError(source + ":" + std::to_string(n) + ": empty key");
      cfg.values_[key] = {trim(line.substr(eq + 1)), source + ":" + std::to_string(n)};
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open config");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = {value, "override"}; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.text;
  }
  double get(const std::string& key, double fallback) const { return number<double>(key, fallback); }
  std::size_t get(const std::string& key, std::size_t fallback) const {
    return number<std::size_t>(key, fallback);
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return number<std::uint64_t>(key, fallback);
  }

  // Keys never read by any get(); typos show up here.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(v.where + ": " + k);
    }
    return out;
  }

 private:
  struct Value {
    std::string text;
    std::string where;
  };

  template <typename N>
  N number(const std::string& key, N fallback) const {
    used_[key] = true;
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      N v;
      if constexpr (std::is_floating_point_v<N>) {
        v = static_cast<N>(std::stod(it->second.text, &pos));
      } else {
        if (it->second.text.find('-') != std::string::npos) throw std::invalid_argument("negative");
        v = static_cast<N>(std::stoull(it->second.text, &pos));
      }
      if (pos != it->second.text.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw FormatError(it->second.where + ": bad value '" + it->second.text + "' for " + key);
    }
  }

  std::map<std::string, Value> values_;
  mutable std::map<std::string, bool> used_;
};

inline TrainConfig train_config_from(const KeyValueConfig& c, TrainConfig t = {}) {
  t.learning_rate = c.get("learning_rate", t.learning_rate);
  t.batch_size = c.get("batch_size", t.batch_size);
  t.max_epochs = c.get("max_epochs", t.max_epochs);
  t.patience = c.get("patience", t.patience);
  t.seed = c.get_u64("seed", t.seed);
  t.clip_norm = c.get("clip_norm", t.clip_norm);
  t.validate();
  return t;
}

inline ModelConfig model_config_from(const KeyValueConfig& c, ModelConfig m = {}) {
  m.embed_dim = c.get("embed_dim", m.embed_dim);
  m.hidden_dim = c.get("hidden_dim", m.hidden_dim);
  m.encoder_layers = c.get("encoder_layers", m.encoder_layers);
  m.init_scale = c.get("init_scale", m.init_scale);
  m.seed = c.get_u64("model_seed", m.seed);
  m.validate();
  return m;
}

inline FramePredictorConfig frame_predictor_config_from(const KeyValueConfig& c,
                                                        FramePredictorConfig f = {}) {
  f.hidden_dim = c.get("predictor_hidden_dim", f.hidden_dim);
  f.learning_rate = c.get("predictor_learning_rate", f.learning_rate);
  f.batch_size = c.get("predictor_batch_size", f.batch_size);
  f.max_epochs = c.get("predictor_max_epochs", f.max_epochs);
  f.patience = c.get("predictor_patience", f.patience);
  f.seed = c.get_u64("seed", f.seed);
  f.validate();
  return f;
}

}  // namespace storyctl
