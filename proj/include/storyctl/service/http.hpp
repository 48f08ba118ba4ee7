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

#include <functional>
#include <memory>
#include <string>

// Eigen comes in before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "storyctl/service/suggest.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace storyctl {

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
}

// Registers the /v1 routes. `reload`, when set, builds a fresh snapshot for
// POST /v1/reload.
inline void install_routes(httplib::Server& server, std::shared_ptr<ModelRegistry> registry,
                           std::function<std::shared_ptr<const ServiceModels>()> reload = {}) {
  server.Get("/v1/health", [registry](const httplib::Request&, httplib::Response& res) {
    const auto snap = registry->snapshot();
    res.set_content(nlohmann::json{{"status", "ok"}, {"model", snap->model_id}}.dump(), "application/json");
  });
  server.Get("/v1/attributes", [registry](const httplib::Request&, httplib::Response& res) {
    res.set_content(attributes_json(*registry->snapshot()).dump(), "application/json");
  });
  server.Post("/v1/suggest", [registry](const httplib::Request& req, httplib::Response& res) {
    try {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception& e) {
        throw ServiceError(400, "bad_json", e.what());
      }
      const auto snap = registry->snapshot();
      res.set_content(to_json(suggest(request_from_json(body), *snap)).dump(), "application/json");
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const ContractError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });
  server.Post("/v1/reload", [registry, reload](const httplib::Request&, httplib::Response& res) {
    if (!reload) return send_error(res, 501, "not_available", "reload is not configured");
    try {
      registry->swap(reload());
      res.set_content(nlohmann::json{{"status", "reloaded"}, {"model", registry->snapshot()->model_id}}.dump(),
                      "application/json");
    } catch (const std::exception& e) {
      send_error(res, 500, "reload_failed", e.what());
    }
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "http_" + std::to_string(res.status), "no such route");
  });
}

}  // namespace storyctl
