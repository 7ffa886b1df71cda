// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lwdock/error.hpp"

namespace lwdock {

class Registry;

/// Wire-level error. The code set is closed: anchor-mismatch,
/// zero-vector-spec, dim-mismatch, not-found, bad-request, internal.
struct ApiError {
  std::string code;
  std::string message;
  int http_status = 500;
};

ApiError to_api_error(ErrorCode code, std::string message);
nlohmann::json to_json(const ApiError& e);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// The dock's HTTP/JSON surface. Routing and handlers live here independent
/// of the transport so they can be exercised in-process:
///
///   GET    /api/v1/anchor
///   POST   /api/v1/learnwares        {model_uri, metadata, spec_b64}
///   GET    /api/v1/learnwares
///   GET    /api/v1/learnwares/{id}
///   DELETE /api/v1/learnwares/{id}
///   POST   /api/v1/identify          {spec_b64, k}
///   GET    /healthz
///
/// No endpoint accepts raw examples; only specification bytes and URIs.
class DockApi {
 public:
  explicit DockApi(Registry& registry) : registry_(registry) {}

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

 private:
  Registry& registry_;
};

/// Blocking HTTP server over DockApi. Requests are handled concurrently;
/// mutation goes through the registry's single-writer path.
class DockServer {
 public:
  explicit DockServer(Registry& registry);
  ~DockServer();
  DockServer(const DockServer&) = delete;
  DockServer& operator=(const DockServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws Error(kIo) when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a successful bind().
  void listen();
  void stop();
  bool is_running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; throws Error(kBadRequest) on malformed input.
std::pair<std::string, int> parse_host_port(std::string_view addr);

}  // namespace lwdock
