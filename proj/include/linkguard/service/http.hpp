// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "linkguard/service/session_service.hpp"

namespace linkguard::service {

// HTTP transport over a SessionManager.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager);
  ~HttpService();

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace linkguard::service
