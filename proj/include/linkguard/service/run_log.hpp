// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace linkguard::service {

using Json = nlohmann::ordered_json;

struct RunRecord {
  std::string id;  // assigned on append
  std::string command;
  Json config = Json::object();
  Json seeds = Json::object();
  Json artifacts = Json::object();  // name -> path
  std::string started_at;
  std::string finished_at;
  int exit_code = 0;
  Json outcome = Json::object();
};

Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);

// UTC, second resolution: 2026-01-31T12:00:00Z
std::string utc_timestamp();

// $LINKGUARD_WORKSPACE, else ./linkguard-workspace.
std::filesystem::path workspace_dir();

// Append-only run log (runs.jsonl) in a workspace directory. One writer per
// workspace is assumed; appends from one process are serialized.
class RunLog {
 public:
  explicit RunLog(std::filesystem::path workspace);

  const std::filesystem::path& path() const { return path_; }
  // Assigns the next sequential id ("run-000001", ...) and returns it.
  std::string append(RunRecord record);
  std::vector<RunRecord> list() const;
  std::optional<RunRecord> find(const std::string& id) const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
};

}  // namespace linkguard::service
