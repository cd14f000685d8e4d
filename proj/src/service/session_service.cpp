// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/service/session_service.hpp"

#include <chrono>
#include <cstdio>

#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::service {

using linker::Policy;
using linker::Stage;
using linker::Status;

Json to_json(const linker::Question& q) {
  return Json{{"question_id", q.id},
              {"kind", linker::question_kind_name(q.kind)},
              {"subject", q.subject},
              {"context", q.context}};
}

Json to_json(const linker::SessionOutcome& o) {
  Json fires = Json::array();
  for (const auto& f : o.fires) {
    fires.push_back({{"position", f.position}, {"candidates", f.candidates}, {"resolution", f.resolution}});
  }
  Json transcript = Json::array();
  for (const auto& e : o.transcript) {
    transcript.push_back({{"question", to_json(e.question)}, {"answer", e.answer}});
  }
  Json fired = Json::array();
  for (auto f : o.fired) fired.push_back(static_cast<int>(f));
  return Json{{"status", linker::status_name(o.status)},
              {"linking", o.linking},
              {"tokens", o.tokens},
              {"fired", fired},
              {"fires", fires},
              {"transcript", transcript},
              {"corrections", o.corrections},
              {"abstain_reason", o.abstain_reason}};
}

SessionRequest parse_session_request(const Json& body) {
  if (!body.is_object()) throw PreconditionError("request body must be a JSON object");
  SessionRequest r;
  try {
    const auto& sel = body.at("instance");
    if (sel.is_object()) {
      r.instance = sel.at("index").get<std::size_t>();
      if (sel.contains("stage")) {
        const auto st = sel.at("stage").get<std::string>();
        if (st != "tables" && st != "columns") {
          throw PreconditionError("instance.stage must be tables or columns");
        }
        r.stage = st == "columns" ? Stage::columns : Stage::tables;
      }
    } else {
      r.instance = sel.get<std::size_t>();
    }
    if (body.contains("policy")) r.policy = linker::parse_policy(body.at("policy").get<std::string>());
    if (body.contains("detector")) {
      const auto& d = body.at("detector");
      r.detector.kind = d.value("kind", r.detector.kind);
      if (d.contains("aggregator")) {
        r.detector.aggregator = linker::parse_aggregator(d.at("aggregator").get<std::string>());
      }
      r.detector.theta = d.value("theta", r.detector.theta);
      if (d.contains("layers")) r.detector.layers = d.at("layers").get<std::vector<std::size_t>>();
    }
    if (body.contains("seed")) r.seed = body.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed session request: ") + e.what());
  }
  const auto& k = r.detector.kind;
  if (k != "mbpp" && k != "oracle" && k != "mbpp+oracle" && k != "never") {
    throw PreconditionError("detector.kind must be mbpp, oracle, mbpp+oracle or never");
  }
  return r;
}

Json to_json(const SessionRequest& r) {
  Json j{{"instance", {{"index", r.instance}, {"stage", linker::stage_name(r.stage)}}},
         {"policy", linker::policy_name(r.policy)},
         {"detector",
          {{"kind", r.detector.kind},
           {"aggregator", linker::aggregator_name(r.detector.aggregator)},
           {"theta", r.detector.theta},
           {"layers", r.detector.layers}}}};
  if (r.seed) j["seed"] = *r.seed;
  return j;
}

std::uint64_t default_session_seed(std::uint64_t base, std::size_t instance) {
  return derive_seed(base, {static_cast<std::uint64_t>(instance)});
}

SessionParts build_session_parts(const ServiceContext& ctx, const SessionRequest& request) {
  SessionParts p;
  p.instance = sim::generate_instances(ctx.sim, ctx.catalog, 1, request.instance).at(0);
  p.input = sim::stage_input(ctx.catalog, p.instance, request.stage);
  p.gt = sim::stage_gt(p.instance, p.input);
  p.model = std::make_unique<sim::SimGenerator>(p.input.entities, ctx.catalog.vocabulary(), p.gt,
                                                ctx.sim, sim::stage_seed(p.instance, request.stage));
  const auto& model = request.stage == Stage::tables ? ctx.table_model : ctx.column_model;
  auto mbpp = [&]() -> std::shared_ptr<linker::Detector> {
    if (!model) {
      throw PreconditionError("no calibrated " + linker::stage_name(request.stage) +
                              "-stage model loaded");
    }
    return std::make_shared<linker::MbppDetector>(model, request.detector.layers,
                                                  request.detector.aggregator, request.detector.theta);
  };
  const auto& kind = request.detector.kind;
  if (kind == "mbpp") {
    p.detector = mbpp();
  } else if (kind == "oracle") {
    p.detector = std::make_shared<linker::OracleDetector>();
  } else if (kind == "mbpp+oracle") {
    p.detector = std::make_shared<linker::UnionDetector>(mbpp(), std::make_shared<linker::OracleDetector>());
  } else {
    p.detector = std::make_shared<linker::NeverDetector>();
  }
  if (request.policy == Policy::surrogate) {
    p.surrogate = std::make_unique<sim::SimSurrogate>(
        p.gt, request.stage == Stage::tables ? ctx.sim.surrogate_accuracy_tables
                                             : ctx.sim.surrogate_accuracy_columns);
  }
  p.seed = request.seed.value_or(default_session_seed(ctx.seed, request.instance));
  return p;
}

Reply error_reply(int status, const std::string& code, const std::string& message) {
  return {status, Json{{"schema", kSchema}, {"error", {{"code", code}, {"message", message}}}}};
}

struct SessionManager::Slot {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t version = 0;
  SessionRequest request;
  SessionParts parts;
  std::unique_ptr<linker::LinkingSession> session;
  std::string started_at;
  bool recorded = false;
};

SessionManager::SessionManager(ServiceContext ctx, RunLog* log) : ctx_(std::move(ctx)), log_(log) {}
SessionManager::~SessionManager() = default;

std::shared_ptr<SessionManager::Slot> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Json SessionManager::state_json(const std::string& id, const Slot& slot) const {
  const auto& s = *slot.session;
  Json j{{"schema", kSchema},
         {"session_id", id},
         {"version", slot.version},
         {"status", linker::status_name(s.status())},
         {"stage", linker::stage_name(s.stage())},
         {"policy", linker::policy_name(slot.request.policy)},
         {"question", s.question()}};
  if (s.pending()) j["pending_question"] = to_json(*s.pending());
  j["partial_linking"] = s.partial_linking();
  return j;
}

void SessionManager::record_if_finished(const std::string& id, Slot& slot) {
  if (!log_ || slot.recorded || !slot.session->terminal()) return;
  const auto o = slot.session->outcome();
  RunRecord r;
  r.command = "session";
  r.config = to_json(slot.request);
  r.seeds = Json{{"session", slot.parts.seed}, {"sim", ctx_.sim.seed}};
  r.started_at = slot.started_at;
  r.finished_at = utc_timestamp();
  r.outcome = Json{{"session_id", id},
                   {"status", linker::status_name(o.status)},
                   {"linking", o.linking},
                   {"corrections", o.corrections},
                   {"abstain_reason", o.abstain_reason}};
  log_->append(std::move(r));
  slot.recorded = true;
}

Reply SessionManager::create(const Json& body) {
  auto slot = std::make_shared<Slot>();
  try {
    slot->request = parse_session_request(body);
    slot->parts = build_session_parts(ctx_, slot->request);
  } catch (const std::invalid_argument& e) {
    return error_reply(400, "invalid_request", e.what());
  }
  auto& p = slot->parts;
  slot->started_at = utc_timestamp();
  slot->session = std::make_unique<linker::LinkingSession>(
      p.input.question, p.input.stage, p.input.entities, p.input.vocabulary, *p.model, *p.detector,
      linker::SessionOptions{slot->request.policy, p.seed}, p.surrogate.get());
  try {
    slot->session->advance();
  } catch (const std::exception& e) {
    return error_reply(500, "runtime", e.what());
  }
  std::string id;
  {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s-%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
    sessions_[id] = slot;
  }
  std::lock_guard lock(slot->mu);
  record_if_finished(id, *slot);
  return {201, state_json(id, *slot)};
}

Reply SessionManager::state(const std::string& id, std::optional<std::uint64_t> since, int wait_ms) {
  auto slot = find(id);
  if (!slot) return error_reply(404, "not_found", "unknown session '" + id + "'");
  std::unique_lock lock(slot->mu);
  if (since && wait_ms > 0) {
    slot->cv.wait_for(lock, std::chrono::milliseconds(wait_ms),
                      [&] { return slot->version != *since; });
  }
  return {200, state_json(id, *slot)};
}

Reply SessionManager::answer(const std::string& id, const Json& body) {
  auto slot = find(id);
  if (!slot) return error_reply(404, "not_found", "unknown session '" + id + "'");
  std::uint64_t qid = 0;
  std::string ans;
  try {
    qid = body.at("question_id").get<std::uint64_t>();
    ans = body.at("answer").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, "invalid_request",
                       std::string("answer body needs question_id and answer: ") + e.what());
  }
  std::lock_guard lock(slot->mu);
  try {
    slot->session->answer(qid, ans);
  } catch (const SessionError& e) {
    auto r = error_reply(409, "conflict", e.what());
    r.body["state"] = state_json(id, *slot);
    return r;
  } catch (const std::invalid_argument& e) {
    return error_reply(400, "invalid_answer", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "runtime", e.what());
  }
  ++slot->version;
  slot->cv.notify_all();
  record_if_finished(id, *slot);
  return {200, state_json(id, *slot)};
}

Reply SessionManager::result(const std::string& id) {
  auto slot = find(id);
  if (!slot) return error_reply(404, "not_found", "unknown session '" + id + "'");
  std::lock_guard lock(slot->mu);
  if (!slot->session->terminal()) {
    auto r = error_reply(409, "not_finished", "session '" + id + "' is still " +
                                                  linker::status_name(slot->session->status()));
    r.body["state"] = state_json(id, *slot);
    return r;
  }
  const auto o = slot->session->outcome();
  return {200, Json{{"schema", kSchema},
                    {"session_id", id},
                    {"status", linker::status_name(o.status)},
                    {"linking", o.linking},
                    {"abstain_reason", o.abstain_reason},
                    {"outcome", to_json(o)}}};
}

Reply SessionManager::runs() const {
  Json list = Json::array();
  if (log_) {
    for (const auto& r : log_->list()) list.push_back(to_json(r));
  }
  return {200, Json{{"schema", kSchema}, {"runs", list}}};
}

Reply SessionManager::run(const std::string& id) const {
  if (log_) {
    if (auto r = log_->find(id)) return {200, Json{{"schema", kSchema}, {"run", to_json(*r)}}};
  }
  return error_reply(404, "not_found", "unknown run '" + id + "'");
}

}  // namespace linkguard::service
