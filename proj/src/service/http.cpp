// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/service/http.hpp"

#include <algorithm>

#include "httplib.h"

namespace linkguard::service {

struct HttpService::Impl {
  SessionManager& manager;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Parses the body; replies 400 and returns false on invalid JSON.
bool parse_body(const httplib::Request& req, httplib::Response& res, Json& out) {
  try {
    out = Json::parse(req.body.empty() ? std::string("{}") : req.body);
    return true;
  } catch (const nlohmann::json::parse_error& e) {
    send(res, error_reply(400, "invalid_json", e.what()));
    return false;
  }
}

}  // namespace

HttpService::HttpService(SessionManager& manager) : impl_(new Impl{manager, {}}) {
  auto& s = impl_->server;
  auto& m = impl_->manager;
  s.Post("/sessions", [&m](const httplib::Request& req, httplib::Response& res) {
    Json body;
    if (parse_body(req, res, body)) send(res, m.create(body));
  });
  s.Get(R"(/sessions/([^/]+))", [&m](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::uint64_t> since;
    int wait_ms = 0;
    try {
      if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
      if (req.has_param("wait_ms")) wait_ms = std::stoi(req.get_param_value("wait_ms"));
    } catch (const std::exception&) {
      send(res, error_reply(400, "invalid_request", "since and wait_ms must be integers"));
      return;
    }
    send(res, m.state(req.matches[1], since, std::min(wait_ms, 30000)));
  });
  s.Post(R"(/sessions/([^/]+)/answer)", [&m](const httplib::Request& req, httplib::Response& res) {
    Json body;
    if (parse_body(req, res, body)) send(res, m.answer(req.matches[1], body));
  });
  s.Get(R"(/sessions/([^/]+)/result)", [&m](const httplib::Request& req, httplib::Response& res) {
    send(res, m.result(req.matches[1]));
  });
  s.Get("/runs", [&m](const httplib::Request&, httplib::Response& res) { send(res, m.runs()); });
  s.Get(R"(/runs/([^/]+))", [&m](const httplib::Request& req, httplib::Response& res) {
    send(res, m.run(req.matches[1]));
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const auto r = error_reply(res.status, res.status == 404 ? "not_found" : "http_error",
                                 "no such endpoint");
      res.set_content(r.body.dump(), "application/json");
    }
  });
}

HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace linkguard::service
