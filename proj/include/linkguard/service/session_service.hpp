// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "linkguard/conformal/calibrator.hpp"
#include "linkguard/linker/session.hpp"
#include "linkguard/service/run_log.hpp"
#include "linkguard/sim/sim.hpp"

namespace linkguard::service {

inline constexpr const char* kSchema = "linkguard.session/1";

Json to_json(const linker::Question& q);
Json to_json(const linker::SessionOutcome& o);

// What sessions are built from: a simulated catalog and calibrated models.
struct ServiceContext {
  core::SchemaCatalog catalog;
  sim::SimConfig sim;
  std::shared_ptr<const conformal::BppModel> table_model;
  std::shared_ptr<const conformal::BppModel> column_model;  // may be null
  std::uint64_t seed = 1;  // base of default session seeds
};

struct DetectorSpec {
  std::string kind = "mbpp";  // mbpp | oracle | mbpp+oracle | never
  linker::Aggregator aggregator = linker::Aggregator::random_permutation;
  double theta = 0.5;
  std::vector<std::size_t> layers;  // empty = model selection
};

struct SessionRequest {
  std::size_t instance = 0;  // simulator instance index
  linker::Stage stage = linker::Stage::tables;
  linker::Policy policy = linker::Policy::human;
  DetectorSpec detector;
  std::optional<std::uint64_t> seed;
};

SessionRequest parse_session_request(const Json& body);
Json to_json(const SessionRequest& r);

// Default session seed of an instance; matches the evaluation harness.
std::uint64_t default_session_seed(std::uint64_t base, std::size_t instance);

// Everything a LinkingSession borrows, owned in one place.
struct SessionParts {
  sim::SimInstance instance;
  linker::StageInput input;
  std::vector<std::string> gt;
  std::unique_ptr<sim::SimGenerator> model;
  std::shared_ptr<linker::Detector> detector;
  std::unique_ptr<sim::SimSurrogate> surrogate;
  std::uint64_t seed = 0;
};

SessionParts build_session_parts(const ServiceContext& ctx, const SessionRequest& request);

struct Reply {
  int status = 200;
  Json body;
};

// Transport-independent session service. Every reply body carries
// "schema": kSchema. Answers to one session are serialized; distinct
// sessions proceed independently.
class SessionManager {
 public:
  explicit SessionManager(ServiceContext ctx, RunLog* log = nullptr);
  ~SessionManager();

  Reply create(const Json& body);
  // Long-poll: with `since` set, waits up to wait_ms for the version to move.
  Reply state(const std::string& id, std::optional<std::uint64_t> since = std::nullopt,
              int wait_ms = 0);
  Reply answer(const std::string& id, const Json& body);
  Reply result(const std::string& id);
  Reply runs() const;
  Reply run(const std::string& id) const;

 private:
  struct Slot;
  std::shared_ptr<Slot> find(const std::string& id) const;
  Json state_json(const std::string& id, const Slot& slot) const;
  void record_if_finished(const std::string& id, Slot& slot);

  ServiceContext ctx_;
  RunLog* log_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_id_ = 1;
};

Reply error_reply(int status, const std::string& code, const std::string& message);

}  // namespace linkguard::service
