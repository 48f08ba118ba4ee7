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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/model/seq2seq.hpp"

namespace storyctl {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'O', 'R', 'Y', 'C', 'K', 'P'};

// Versioned binary container: magic, u32 version, JSON header, raw double
// payload, FNV-1a checksum over everything before it. Integers and doubles
// are stored in host byte order.
struct Container {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json header;  // must hold "kind" and "tensors": [{name, shape, trainable}]
  std::vector<ad::Tensor<double>> tensors;
};

namespace detail {

template <typename V>
void put(std::string& out, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  out.append(bytes, sizeof(V));
}

template <typename V>
V take(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(V) > in.size()) throw FormatError(path + ": truncated checkpoint");
  V v;
  std::memcpy(&v, in.data() + pos, sizeof(V));
  pos += sizeof(V);
  return v;
}

}  // namespace detail

inline std::string encode_container(const Container& c) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, c.version);
  const std::string header = c.header.dump();
  detail::put<std::uint64_t>(out, header.size());
  out += header;
  std::uint64_t payload = 0;
  for (const auto& t : c.tensors) payload += t.size() * sizeof(double);
  detail::put<std::uint64_t>(out, payload);
  for (const auto& t : c.tensors) {
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  detail::put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

inline Container decode_container(const std::string& bytes, const std::string& path) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError(path + ": not a storyctl checkpoint");
  }
  std::size_t pos = sizeof(kCheckpointMagic);
  Container c;
  c.version = detail::take<std::uint32_t>(bytes, pos, path);
  if (c.version != kCheckpointVersion) {
    throw FormatError(path + ": checkpoint version " + std::to_string(c.version) +
                      " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < pos + sizeof(std::uint64_t)) throw FormatError(path + ": truncated checkpoint");
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored), sizeof(stored));
  if (stored != fnv1a64(std::string_view(bytes).substr(0, bytes.size() - sizeof(stored)))) {
    throw FormatError(path + ": checksum mismatch (file is corrupt)");
  }
  const auto header_len = detail::take<std::uint64_t>(bytes, pos, path);
  if (pos + header_len > bytes.size()) throw FormatError(path + ": truncated header");
  try {
    c.header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  }
  pos += header_len;
  const auto payload = detail::take<std::uint64_t>(bytes, pos, path);
  if (pos + payload + sizeof(std::uint64_t) != bytes.size()) {
    throw FormatError(path + ": payload length does not match file size");
  }
  std::uint64_t used = 0;
  try {
    for (const auto& entry : c.header.at("tensors")) {
      const auto shape = entry.at("shape").get<ad::Shape>();
      const std::size_t count = ad::shape_count(shape);
      if (used + count * sizeof(double) > payload) throw FormatError(path + ": payload too short");
      std::vector<double> values(count);
      std::memcpy(values.data(), bytes.data() + pos + used, count * sizeof(double));
      used += count * sizeof(double);
      c.tensors.emplace_back(shape, std::move(values));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad tensor table: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(path + ": bad tensor table: " + e.what());
  }
  if (used != payload) throw FormatError(path + ": payload has trailing bytes");
  return c;
}

inline void save_container(const std::string& path, const Container& c) {
  const std::string bytes = encode_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path + ": write failed");
}

inline Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open checkpoint");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_container(buf.str(), path);
}

template <typename T>
nlohmann::json tensor_table(const ad::ParamStore<T>& store) {
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    table.push_back({{"name", store.entry(i).name},
                     {"shape", store.value(i).shape()},
                     {"trainable", store.trainable(i)}});
  }
  return table;
}

inline ad::ParamStore<double> store_from_container(const Container& c) {
  ad::ParamStore<double> store;
  const auto& table = c.header.at("tensors");
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    store.add(table[i].at("name").get<std::string>(), c.tensors[i],
              table[i].at("trainable").get<bool>());
  }
  return store;
}

template <typename T>
std::vector<ad::Tensor<double>> tensors_of(const ad::ParamStore<T>& store) {
  std::vector<ad::Tensor<double>> out;
  for (std::size_t i = 0; i < store.size(); ++i) out.push_back(store.value(i).template cast<double>());
  return out;
}

struct LoadedModel {
  Seq2Seq<double> model;
  nlohmann::json header;
  std::string path;
};

template <typename T>
void save_model(const std::string& path, const Seq2Seq<T>& model, double best_dev_perplexity,
                const nlohmann::json& extra = nlohmann::json::object()) {
  Container c;
  c.header = {{"kind", "seq2seq"},
              {"config", to_json(model.config())},
              {"vocabulary", model.vocab().words()},
              {"vocab_hash", model.vocab().hash()},
              {"attribute", to_json(model.embedder())},
              {"best_dev_ppl", best_dev_perplexity},
              {"extra", extra},
              {"tensors", tensor_table(model.params())}};
  c.tensors = tensors_of(model.params());
  save_container(path, c);
}

// Any failure leaves nothing constructed. When `expected_vocab_hash` is
// given and differs, a warning goes to `warn`.
inline LoadedModel load_model(const std::string& path,
                              std::optional<std::uint64_t> expected_vocab_hash = std::nullopt,
                              std::ostream& warn = std::cerr) {
  Container c = load_container(path);
  try {
    if (c.header.at("kind") != "seq2seq") {
      throw FormatError(path + ": checkpoint holds a " + c.header.at("kind").get<std::string>() +
                        ", not a seq2seq model");
    }
    Vocabulary vocab(c.header.at("vocabulary").get<std::vector<std::string>>());
    if (vocab.hash() != c.header.at("vocab_hash").get<std::uint64_t>()) {
      throw FormatError(path + ": vocabulary hash does not match stored vocabulary");
    }
    if (expected_vocab_hash && *expected_vocab_hash != vocab.hash()) {
      warn << "warning: " << path << ": vocabulary hash differs from the current corpus\n";
    }
    Seq2Seq<double> model(model_config_from_json(c.header.at("config")), std::move(vocab),
                          attribute_embedder_from_json(c.header.at("attribute")),
                          store_from_container(c));
    return {std::move(model), std::move(c.header), path};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace storyctl
