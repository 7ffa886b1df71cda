// Copyright 2026 The lwdock Authors
// SPDX-License-Identifier: Apache-2.0

#include "lwdock/service.hpp"

#include <algorithm>
#include <charconv>
#include <optional>

#include <httplib.h>

#include "lwdock/digest.hpp"
#include "lwdock/identify.hpp"
#include "lwdock/registry.hpp"
#include "lwdock/spec.hpp"

namespace lwdock {

namespace {

constexpr std::string_view kLearnwaresPath = "/api/v1/learnwares";

[[noreturn]] void bad_request(const std::string& message) { throw Error(ErrorCode::kBadRequest, message); }

nlohmann::json parse_body(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_request("request body must be a JSON object");
  return j;
}

Specification spec_from_body(const nlohmann::json& j) {
  if (!j.contains("spec_b64") || !j["spec_b64"].is_string()) bad_request("missing string field 'spec_b64'");
  return read_spec_file(base64_decode(j["spec_b64"].get<std::string>()));
}

Metadata metadata_from_body(const nlohmann::json& j) {
  Metadata out;
  if (!j.contains("metadata") || j["metadata"].is_null()) return out;
  if (!j["metadata"].is_object()) bad_request("'metadata' must be an object of strings");
  for (const auto& [key, value] : j["metadata"].items()) {
    if (!value.is_string()) bad_request("metadata value for '" + key + "' must be a string");
    out.emplace(key, value.get<std::string>());
  }
  return out;
}

std::optional<std::uint64_t> parse_id(std::string_view text) {
  std::uint64_t id = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, id);
  if (text.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
  return id;
}

}  // namespace

ApiError to_api_error(ErrorCode code, std::string message) {
  switch (code) {
    case ErrorCode::kAnchorMismatch:
      return {"anchor-mismatch", std::move(message), 409};
    case ErrorCode::kZeroVectorSpec:
    case ErrorCode::kZeroVector:
      return {"zero-vector-spec", std::move(message), 400};
    case ErrorCode::kDimMismatch:
    case ErrorCode::kLengthMismatch:
      return {"dim-mismatch", std::move(message), 400};
    case ErrorCode::kNotFound:
      return {"not-found", std::move(message), 404};
    case ErrorCode::kInternal:
    case ErrorCode::kIo:
    case ErrorCode::kCorruptIndex:
      return {"internal", std::move(message), 500};
    case ErrorCode::kBadRequest:
      return {"bad-request", std::move(message), 400};
    default:
      // Codec failures and invalid specs are the client's; keep the detail.
      return {"bad-request", std::string(to_string(code)) + ": " + message, 400};
  }
}

nlohmann::json to_json(const ApiError& e) { return nlohmann::json{{"code", e.code}, {"message", e.message}}; }

ApiResponse DockApi::handle(std::string_view method, std::string_view path, std::string_view body) const {
  try {
    if (path == "/healthz" && method == "GET") return {200, {{"status", "ok"}}};
    if (path == "/api/v1/anchor" && method == "GET") return {200, to_json(registry_.descriptor())};

    if (path == kLearnwaresPath) {
      if (method == "GET") {
        nlohmann::json list = nlohmann::json::array();
        for (const Learnware& lw : registry_.list()) list.push_back(summary_json(lw));
        return {200, {{"learnwares", list}}};
      }
      if (method == "POST") {
        const nlohmann::json j = parse_body(body);
        if (!j.contains("model_uri") || !j["model_uri"].is_string() || j["model_uri"].get<std::string>().empty()) {
          bad_request("missing non-empty string field 'model_uri'");
        }
        const std::uint64_t id =
            registry_.submit(j["model_uri"].get<std::string>(), spec_from_body(j), metadata_from_body(j));
        return {201, {{"id", id}}};
      }
    }

    if (path.starts_with(kLearnwaresPath) && path.size() > kLearnwaresPath.size() &&
        path[kLearnwaresPath.size()] == '/') {
      const auto id = parse_id(path.substr(kLearnwaresPath.size() + 1));
      if (!id) bad_request("learnware id must be an unsigned integer");
      if (method == "GET") {
        const Learnware lw = registry_.get(*id);
        nlohmann::json j = summary_json(lw);
        j["spec_b64"] = base64_encode(write_spec_file(lw.spec));
        return {200, j};
      }
      if (method == "DELETE") {
        registry_.remove(*id);
        return {200, {{"deleted", *id}}};
      }
    }

    if (path == "/api/v1/identify" && method == "POST") {
      const nlohmann::json j = parse_body(body);
      std::size_t k = 1;
      if (j.contains("k")) {
        if (!j["k"].is_number_unsigned()) bad_request("'k' must be a positive integer");
        k = j["k"].get<std::size_t>();
      }
      if (k == 0) bad_request("'k' must be >= 1");
      const Specification spec = spec_from_body(j);
      registry_.check_compatible(spec);
      // Rank and describe from one snapshot so a concurrent delete cannot
      // leave a match without its entry.
      const Registry::Snapshot snap = registry_.snapshot();
      std::vector<Candidate> candidates;
      candidates.reserve(snap->size());
      for (const Learnware& lw : *snap) candidates.push_back(Candidate{lw.id, lw.spec.vector});
      nlohmann::json matches = nlohmann::json::array();
      for (const RankedMatch& m : rank_by_cosine(spec.vector, candidates, k)) {
        const auto it = std::find_if(snap->begin(), snap->end(),
                                     [&](const Learnware& lw) { return lw.id == m.learnware_id; });
        matches.push_back({{"id", m.learnware_id},
                           {"similarity", m.similarity},
                           {"rank", m.rank},
                           {"model_uri", it->model_uri},
                           {"metadata", it->metadata}});
      }
      return {200, {{"matches", matches}}};
    }

    const ApiError e = to_api_error(ErrorCode::kNotFound, "no route for " + std::string(method) + " " +
                                                              std::string(path));
    return {e.http_status, to_json(e)};
  } catch (const Error& err) {
    const ApiError e = to_api_error(err.code(), err.message());
    return {e.http_status, to_json(e)};
  } catch (const std::exception& err) {
    const ApiError e = to_api_error(ErrorCode::kInternal, err.what());
    return {e.http_status, to_json(e)};
  }
}

struct DockServer::Impl {
  explicit Impl(Registry& registry) : api(registry) {}
  DockApi api;
  httplib::Server server;
  bool bound = false;
};

DockServer::DockServer(Registry& registry) : impl_(std::make_unique<Impl>(registry)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = impl_->api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  // Paper-scale specifications are ~17 MB of base64; leave headroom.
  impl_->server.set_payload_max_length(std::size_t{256} << 20);
  // httplib also sets SO_REUSEPORT, which would let a second dock silently
  // share the port. Address reuse alone is enough for fast restarts.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  impl_->server.Get(".*", route);
  impl_->server.Post(".*", route);
  impl_->server.Delete(".*", route);
  impl_->server.Put(".*", route);
  impl_->server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    const ApiError e = to_api_error(ErrorCode::kInternal, "unhandled server error");
    res.status = e.http_status;
    res.set_content(to_json(e).dump(), "application/json");
  });
}

DockServer::~DockServer() { stop(); }

int DockServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void DockServer::listen() {
  if (!impl_->bound) throw Error(ErrorCode::kInternal, "listen() before bind()");
  impl_->server.listen_after_bind();
}

void DockServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool DockServer::is_running() const { return impl_->server.is_running(); }

std::pair<std::string, int> parse_host_port(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0) bad_request("address must be HOST:PORT");
  const std::string_view port_text = addr.substr(colon + 1);
  int port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (port_text.empty() || ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 ||
      port > 65535) {
    bad_request("invalid port in '" + std::string(addr) + "'");
  }
  return {std::string(addr.substr(0, colon)), port};
}

}  // namespace lwdock
