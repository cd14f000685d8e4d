// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/service/run_log.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "linkguard/common/error.hpp"

namespace linkguard::service {

Json to_json(const RunRecord& r) {
  return Json{{"id", r.id},
              {"command", r.command},
              {"config", r.config},
              {"seeds", r.seeds},
              {"artifacts", r.artifacts},
              {"started_at", r.started_at},
              {"finished_at", r.finished_at},
              {"exit_code", r.exit_code},
              {"outcome", r.outcome}};
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.config = j.value("config", Json::object());
    r.seeds = j.value("seeds", Json::object());
    r.artifacts = j.value("artifacts", Json::object());
    r.started_at = j.value("started_at", "");
    r.finished_at = j.value("finished_at", "");
    r.exit_code = j.value("exit_code", 0);
    r.outcome = j.value("outcome", Json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run record: ") + e.what());
  }
  return r;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path workspace_dir() {
  if (const char* env = std::getenv("LINKGUARD_WORKSPACE"); env && *env) return env;
  return std::filesystem::current_path() / "linkguard-workspace";
}

RunLog::RunLog(std::filesystem::path workspace) {
  std::filesystem::create_directories(workspace);
  path_ = workspace / "runs.jsonl";
}

namespace {

std::vector<RunRecord> read_log(const std::filesystem::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(run_record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<RunRecord> RunLog::list() const {
  std::lock_guard lock(mu_);
  return read_log(path_);
}

std::optional<RunRecord> RunLog::find(const std::string& id) const {
  for (auto& r : list()) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

std::string RunLog::append(RunRecord record) {
  std::lock_guard lock(mu_);
  const std::size_t count = read_log(path_).size();
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%06zu", count + 1);
  record.id = buf;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to run log " + path_.string());
  out << to_json(record).dump() << '\n';
  if (!out.flush()) throw std::runtime_error("failed writing run log " + path_.string());
  return record.id;
}

}  // namespace linkguard::service
