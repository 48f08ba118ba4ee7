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

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyctl/corpus/annotation.hpp"
#include "storyctl/decoding/decode.hpp"
#include "storyctl/model/checkpoint.hpp"
#include "storyctl/selection/frame_predictor.hpp"
#include "storyctl/selection/rerank.hpp"

namespace storyctl {

// Error carried to HTTP clients as {code, message}.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class ValueMode { kExplicit, kAutoRerank, kAutoPredict };
enum class DecodeMethod { kBeam, kSample };

struct SuggestionRequest {
  std::vector<std::string> context;  // 1-4 raw sentences
  std::optional<std::string> attribute;  // must match the loaded model when given
  nlohmann::json value;                  // explicit value spec
  ValueMode mode = ValueMode::kExplicit;
  std::size_t n = 3;
  DecodeMethod method = DecodeMethod::kBeam;
  double temperature = 0.6;
  std::uint64_t seed = 0;
};

struct Suggestion {
  std::string text;
  std::vector<std::string> tokens;
  nlohmann::json attribute;
  double score = 0.0;
  std::optional<int> frame_id;  // auto-predict

  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

struct SuggestionResponse {
  std::vector<Suggestion> suggestions;
  std::string model;
  std::vector<std::string> warnings;

  friend bool operator==(const SuggestionResponse&, const SuggestionResponse&) = default;
};

inline SuggestionRequest request_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& m) { return ServiceError(400, "bad_request", m); };
  if (!j.is_object()) throw bad("request must be a JSON object");
  SuggestionRequest r;
  const auto& ctx = j.contains("context") ? j.at("context") : nlohmann::json();
  if (ctx.is_string()) {
    r.context = {ctx.get<std::string>()};
  } else if (ctx.is_array()) {
    for (const auto& s : ctx) {
      if (!s.is_string()) throw bad("context must hold strings");
      r.context.push_back(s.get<std::string>());
    }
  } else {
    throw bad("context is required (string or list of 1-4 sentences)");
  }
  if (r.context.empty() || r.context.size() > 4) throw bad("context must hold 1-4 sentences");
  if (j.contains("attribute") && !j.at("attribute").is_null()) {
    if (!j.at("attribute").is_string()) throw bad("attribute must be a string");
    r.attribute = j.at("attribute").get<std::string>();
  }
  r.value = j.contains("value") ? j.at("value") : nlohmann::json();
  if (r.value == "auto-rerank") r.mode = ValueMode::kAutoRerank;
  if (r.value == "auto-predict") r.mode = ValueMode::kAutoPredict;
  if (j.contains("n")) {
    if (!j.at("n").is_number_integer() || j.at("n").get<long long>() < 1) throw bad("n must be a positive integer");
    r.n = j.at("n").get<std::size_t>();
  }
  if (j.contains("method")) {
    const auto m = j.at("method");
    if (m == "beam") {
      r.method = DecodeMethod::kBeam;
    } else if (m == "sample") {
      r.method = DecodeMethod::kSample;
    } else {
      throw bad("method must be 'beam' or 'sample'");
    }
  }
  if (j.contains("temperature")) {
    if (!j.at("temperature").is_number() || !(j.at("temperature").get<double>() > 0.0)) {
      throw bad("temperature must be a positive number");
    }
    r.temperature = j.at("temperature").get<double>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw bad("seed must be a non-negative integer");
    r.seed = j.at("seed").get<std::uint64_t>();
  }
  return r;
}

inline nlohmann::json to_json(const SuggestionRequest& r) {
  nlohmann::json j = {{"context", r.context},
                      {"n", r.n},
                      {"method", r.method == DecodeMethod::kBeam ? "beam" : "sample"},
                      {"temperature", r.temperature},
                      {"seed", r.seed}};
  if (r.attribute) j["attribute"] = *r.attribute;
  j["value"] = r.mode == ValueMode::kAutoRerank    ? nlohmann::json("auto-rerank")
               : r.mode == ValueMode::kAutoPredict ? nlohmann::json("auto-predict")
                                                   : r.value;
  return j;
}

inline nlohmann::json to_json(const SuggestionResponse& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : r.suggestions) {
    nlohmann::json item = {{"text", s.text}, {"tokens", s.tokens}, {"attribute", s.attribute}, {"score", s.score}};
    if (s.frame_id) item["frame_id"] = *s.frame_id;
    items.push_back(item);
  }
  return {{"suggestions", items}, {"model", r.model}, {"warnings", r.warnings}};
}

inline SuggestionResponse response_from_json(const nlohmann::json& j) {
  SuggestionResponse r;
  for (const auto& item : j.at("suggestions")) {
    Suggestion s;
    s.text = item.at("text").get<std::string>();
    s.tokens = item.at("tokens").get<std::vector<std::string>>();
    s.attribute = item.at("attribute");
    s.score = item.at("score").get<double>();
    if (item.contains("frame_id")) s.frame_id = item.at("frame_id").get<int>();
    r.suggestions.push_back(std::move(s));
  }
  r.model = j.at("model").get<std::string>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

// Immutable set of loaded models; only the generation model is required.
struct ServiceModels {
  std::shared_ptr<const Seq2Seq<double>> model;
  std::shared_ptr<const Seq2Seq<double>> reverse;
  std::shared_ptr<const FramePredictor> predictor;
  std::optional<Lexicons> lexicons;  // annotates context frames for auto-predict
  std::string model_id;
};

// Holds the current snapshot; readers take a reference-counted copy so a
// swap never disturbs a request in flight.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::shared_ptr<const ServiceModels> initial) : current_(std::move(initial)) {
    if (!current_ || !current_->model) throw ContractError("service: a generation model is required");
  }
  std::shared_ptr<const ServiceModels> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return current_;
  }
  void swap(std::shared_ptr<const ServiceModels> next) {
    if (!next || !next->model) throw ContractError("service: a generation model is required");
    std::lock_guard<std::mutex> lock(mu_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ServiceModels> current_;
};

struct ServicePaths {
  std::string model;
  std::string reverse;
  std::string predictor;
  std::string lexicons;
};

inline std::shared_ptr<const ServiceModels> load_service_models(const ServicePaths& paths) {
  auto m = std::make_shared<ServiceModels>();
  m->model = std::make_shared<const Seq2Seq<double>>(load_model(paths.model).model);
  m->model_id = paths.model;
  if (!paths.reverse.empty()) m->reverse = std::make_shared<const Seq2Seq<double>>(load_model(paths.reverse).model);
  if (!paths.predictor.empty()) m->predictor = std::make_shared<const FramePredictor>(load_frame_predictor(paths.predictor));
  if (!paths.lexicons.empty()) m->lexicons = load_lexicons(paths.lexicons);
  return m;
}

inline nlohmann::json attributes_json(const ServiceModels& m) {
  const auto& e = m.model->embedder();
  nlohmann::json j = {{"attribute", to_string(e.type)},
                      {"values", e.value_names()},
                      {"model", m.model_id},
                      {"auto_rerank", e.type == AttributeType::kFrames && m.reverse != nullptr},
                      {"auto_predict", e.type == AttributeType::kFrames && m.predictor && m.lexicons}};
  j["frames"] = e.type == AttributeType::kFrames ? nlohmann::json(e.inventory.ranked()) : nlohmann::json::array();
  return j;
}

namespace detail {

inline Suggestion to_suggestion(const Generation& g) {
  Suggestion s;
  s.tokens = g.tokens;
  s.text = detokenize(g.tokens);
  s.attribute = g.attribute;
  s.score = g.score;
  return s;
}

}  // namespace detail

// Generates suggestions for one request against one model snapshot.
inline SuggestionResponse suggest(const SuggestionRequest& req, const ServiceModels& models) {
  const Seq2Seq<double>& model = *models.model;
  const AttributeEmbedder& e = model.embedder();
  SuggestionResponse resp;
  resp.model = models.model_id;
  if (req.attribute && *req.attribute != to_string(e.type)) {
    throw ServiceError(400, "attribute_mismatch",
                       "model is conditioned on " + to_string(e.type) + ", not " + *req.attribute);
  }
  if (req.n < 1) throw ServiceError(400, "bad_request", "n must be at least 1");

  std::vector<Tokens> context;
  std::set<std::string> unknown;
  for (const auto& sentence : req.context) {
    Tokens t = tokenize_raw(sentence);
    if (t.empty()) throw ServiceError(400, "bad_request", "context sentences must not be empty");
    for (const auto& w : t) {
      if (!model.vocab().contains(w)) unknown.insert(w);
    }
    context.push_back(std::move(t));
  }
  if (!unknown.empty()) {
    resp.warnings.push_back("unknown words mapped to <unk>: " +
                            join_tokens({unknown.begin(), unknown.end()}, ", "));
  }
  const auto source = model.vocab().encode_context(context);

  auto decode = [&](const AttributeValue& v, std::size_t count, std::uint64_t seed) {
    GenerationList out;
    if (req.method == DecodeMethod::kSample) {
      for (const auto& h : temperature_sample(model, source, v, req.temperature, count, seed)) {
        out.push_back(make_generation(model, "request", "TS", v, h));
      }
    } else {
      for (const auto& h : beam_search(model, source, v, count)) {
        out.push_back(make_generation(model, "request", "BS", v, h));
      }
    }
    return out;
  };

  if (req.mode == ValueMode::kExplicit) {
    AttributeValue value;
    try {
      value = e.parse(req.value);
    } catch (const ContractError& err) {
      throw ServiceError(400, "invalid_attribute_value", err.what());
    }
    if (e.type == AttributeType::kFrames && value.frames.empty()) {
      resp.warnings.push_back("empty frame set: conditioning on the zero vector");
    }
    for (const auto& g : decode(value, req.n, req.seed)) resp.suggestions.push_back(detail::to_suggestion(g));
  } else if (req.mode == ValueMode::kAutoRerank) {
    if (e.type != AttributeType::kFrames) {
      throw ServiceError(400, "unsupported_mode", "auto-rerank needs a frames model, loaded model is " + to_string(e.type));
    }
    if (!models.reverse) throw ServiceError(501, "not_available", "auto-rerank needs a reverse model");
    RerankConfig cfg;
    cfg.k = std::min(req.n, e.top_sets.size());
    for (const auto& g : rerank_frame_sets(model, *models.reverse, "request", context, cfg)) {
      resp.suggestions.push_back(detail::to_suggestion(g));
    }
  } else {
    if (e.type != AttributeType::kFrames) {
      throw ServiceError(400, "unsupported_mode", "auto-predict needs a frames model, loaded model is " + to_string(e.type));
    }
    if (!models.predictor || !models.lexicons) {
      throw ServiceError(501, "not_available", "auto-predict needs a frame predictor and lexicons");
    }
    std::array<std::vector<double>, 4> frames;
    const std::size_t pad = 4 - context.size();
    for (std::size_t i = 0; i < 4; ++i) {
      frames[i] = i < pad ? frame_vector({})
                          : frame_vector(resolve_frames(annotate_heuristic(context[i - pad], *models.lexicons).frames,
                                                        models.predictor->inventory()));
    }
    const std::size_t k = std::min(req.n, FrameInventory::kSlots);
    std::uint64_t seed = req.seed;
    for (int id : predict_topk_frames(*models.predictor, frames, k)) {
      // Predictor ids are names in its inventory; map them into the model's.
      const std::string name = id == FrameInventory::kCatchAll ? "<catch-all>"
                               : static_cast<std::size_t>(id) < models.predictor->inventory().ranked_count()
                                   ? models.predictor->inventory().name(id)
                                   : "";
      const int model_id = name.empty() ? FrameInventory::kCatchAll
                           : name == "<catch-all>" ? FrameInventory::kCatchAll
                                                   : e.inventory.id(name);
      const AttributeValue v = AttributeValue::of_frames({model_id});
      Suggestion s = detail::to_suggestion(decode(v, 1, seed++).front());
      s.frame_id = id;
      resp.suggestions.push_back(std::move(s));
    }
  }
  if (resp.suggestions.size() < req.n) {
    resp.warnings.push_back("returned " + std::to_string(resp.suggestions.size()) + " of " +
                            std::to_string(req.n) + " requested suggestions");
  }
  return resp;
}

}  // namespace storyctl
