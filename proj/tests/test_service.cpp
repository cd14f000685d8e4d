// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "linkguard/eval/harness.hpp"
#include "linkguard/service/http.hpp"
#include "linkguard/service/run_log.hpp"
#include "linkguard/service/session_service.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

using namespace linkguard;
using namespace linkguard::service;
using linker::Policy;
using linker::Stage;

namespace {

namespace fs = std::filesystem;

fs::path temp_workspace(const std::string& name) {
  auto p = fs::temp_directory_path() / ("linkguard-test-" + name + "-" +
                                        std::to_string(std::chrono::steady_clock::now()
                                                           .time_since_epoch()
                                                           .count()));
  fs::create_directories(p);
  return p;
}

const eval::Pipeline& pipeline() {
  static const eval::Pipeline p = [] {
    eval::PipelineConfig c;
    c.train_instances = 300;
    c.test_instances = 50;
    c.hp.hidden_width = 8;
    c.hp.epochs = 60;
    return eval::build_pipeline(c);
  }();
  return p;
}

ServiceContext context() {
  const auto& p = pipeline();
  return {p.catalog, p.config.sim, p.tables.model, p.columns.model, 1};
}

// Answers at random from a seeded stream, including invalid names.
class RandomResponder : public linker::Responder {
 public:
  explicit RandomResponder(std::uint64_t seed) : rng_(seed) {}
  bool relevant(const std::string&, const linker::LinkingSession&) override {
    return std::bernoulli_distribution(0.5)(rng_);
  }
  std::string provide_correct(linker::QuestionKind, const linker::LinkingSession& s) override {
    const auto n = s.entities().size();
    auto i = std::uniform_int_distribution<std::size_t>(0, n)(rng_);
    return i == n ? "noSuchEntity" : s.entities()[i].name;
  }

 private:
  Rng rng_;
};

// Index of a simulator instance whose table stage has exactly `branches`
// planted errors.
std::size_t find_instance(std::size_t branches) {
  const auto& p = pipeline();
  for (std::size_t i = 0;; ++i) {
    auto inst = sim::generate_instances(p.config.sim, p.catalog, 1, i).at(0);
    if (inst.planted.size() == branches) return i;
  }
}

Json oracle_request(std::size_t instance) {
  return {{"instance", instance}, {"policy", "human"}, {"detector", {{"kind", "oracle"}}}};
}

}  // namespace

TEST_CASE("run log assigns sequential ids and round-trips") {
  auto ws = temp_workspace("runlog");
  RunLog log(ws);
  RunRecord r;
  r.command = "evaluate";
  r.config = {{"x", 1}};
  r.outcome = {{"ok", true}};
  r.exit_code = 0;
  CHECK(log.append(r) == "run-000001");
  r.command = "link";
  CHECK(log.append(r) == "run-000002");
  auto all = log.list();
  REQUIRE(all.size() == 2);
  CHECK(all[0].command == "evaluate");
  CHECK(all[1].id == "run-000002");
  CHECK(to_json(*log.find("run-000001")).dump() == to_json(all[0]).dump());
  CHECK(!log.find("run-000009"));
  // Append-only: a second handle continues the sequence.
  RunLog again(ws);
  CHECK(again.append(r) == "run-000003");
  CHECK(utc_timestamp().size() == 20);

  setenv("LINKGUARD_WORKSPACE", ws.c_str(), 1);
  CHECK(workspace_dir() == ws);
  unsetenv("LINKGUARD_WORKSPACE");
  fs::remove_all(ws);
}

TEST_CASE("session request parsing") {
  auto r = parse_session_request(
      {{"instance", {{"index", 4}, {"stage", "columns"}}}, {"policy", "surrogate"},
       {"detector", {{"kind", "mbpp"}, {"aggregator", "half_vote"}, {"layers", {1, 2}}}},
       {"seed", 9}});
  CHECK(r.instance == 4);
  CHECK(r.stage == Stage::columns);
  CHECK(r.policy == Policy::surrogate);
  CHECK(r.detector.aggregator == linker::Aggregator::half_vote);
  CHECK(r.detector.layers == std::vector<std::size_t>{1, 2});
  CHECK(r.seed == 9u);
  CHECK(parse_session_request({{"instance", 3}}).policy == Policy::human);
  CHECK_THROWS_AS(parse_session_request({{"policy", "human"}}), std::invalid_argument);
  CHECK_THROWS_AS(parse_session_request({{"instance", 1}, {"detector", {{"kind", "x"}}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_session_request(Json::array()), std::invalid_argument);
  CHECK(default_session_seed(1, 5) == derive_seed(1, {5}));
}

TEST_CASE("happy path: one confirmation then done") {
  SessionManager m(context());
  const auto idx = find_instance(1);
  auto c = m.create(oracle_request(idx));
  REQUIRE(c.status == 201);
  CHECK(c.body["schema"] == kSchema);
  CHECK(c.body["status"] == "awaiting_answer");
  const auto id = c.body["session_id"].get<std::string>();
  const auto q = c.body["pending_question"];
  CHECK(q["kind"] == "confirm_table");
  CHECK(!q["subject"].get<std::string>().empty());

  CHECK(m.result(id).status == 409);
  auto a = m.answer(id, {{"question_id", q["question_id"]}, {"answer", "yes"}});
  REQUIRE(a.status == 200);
  CHECK(a.body["status"] == "done");
  CHECK(a.body["version"] == c.body["version"].get<std::uint64_t>() + 1);
  auto res = m.result(id);
  REQUIRE(res.status == 200);
  CHECK(res.body["schema"] == kSchema);
  CHECK(res.body["status"] == "done");
  CHECK(res.body["outcome"]["transcript"].size() == 1);
  CHECK(res.body["outcome"]["fires"][0]["resolution"] == "affirmed");
}

TEST_CASE("deny then request a correct table") {
  SessionManager m(context());
  const auto idx = find_instance(1);
  const auto& p = pipeline();
  auto inst = sim::generate_instances(p.config.sim, p.catalog, 1, idx).at(0);
  auto st = m.create(oracle_request(idx)).body;
  const auto id = st["session_id"].get<std::string>();
  // Refuse every confirmation until a request arrives.
  while (st["pending_question"]["kind"] == "confirm_table") {
    st = m.answer(id, {{"question_id", st["pending_question"]["question_id"]}, {"answer", "no"}})
             .body;
  }
  REQUIRE(st["pending_question"]["kind"] == "request_table");
  // The settled prefix plus the requested table: pick a gt table not yet emitted.
  const auto partial = st["partial_linking"].get<std::vector<std::string>>();
  std::string want;
  for (const auto& g : inst.gt_tables) {
    if (std::find(partial.begin(), partial.end(), g) == partial.end()) want = g;
  }
  REQUIRE(!want.empty());
  auto a = m.answer(id, {{"question_id", st["pending_question"]["question_id"]}, {"answer", want}});
  REQUIRE(a.status == 200);
  auto res = m.result(id).body;
  REQUIRE(res["status"] == "done");
  const auto linking = res["linking"].get<std::vector<std::string>>();
  CHECK(std::find(linking.begin(), linking.end(), want) != linking.end());
  CHECK(res["outcome"]["corrections"] == 1);
}

TEST_CASE("stale, malformed and unknown requests leave state unchanged") {
  SessionManager m(context());
  auto c = m.create(oracle_request(find_instance(2))).body;
  const auto id = c["session_id"].get<std::string>();
  const auto qid = c["pending_question"]["question_id"].get<std::uint64_t>();
  const auto before = m.state(id).body.dump();

  auto stale = m.answer(id, {{"question_id", qid + 7}, {"answer", "yes"}});
  CHECK(stale.status == 409);
  CHECK(stale.body["schema"] == kSchema);
  CHECK(stale.body["error"]["code"] == "conflict");
  CHECK(stale.body["state"].dump() == before);
  CHECK(m.state(id).body.dump() == before);

  auto bad = m.answer(id, {{"question_id", qid}, {"answer", "maybe"}});
  CHECK(bad.status == 400);
  CHECK(m.state(id).body.dump() == before);
  CHECK(m.answer(id, {{"answer", "yes"}}).status == 400);
  CHECK(m.state(id).body.dump() == before);

  for (const auto& r : {m.state("s-999999"), m.answer("s-999999", {}), m.result("nope"),
                        m.run("run-000001")}) {
    CHECK(r.status == 404);
    CHECK(r.body["schema"] == kSchema);
  }
  CHECK(m.create({{"instance", "x"}}).status == 400);
  // Answering the same question twice: the second is stale.
  auto ok = m.answer(id, {{"question_id", qid}, {"answer", "yes"}});
  CHECK(ok.status == 200);
  CHECK(m.answer(id, {{"question_id", qid}, {"answer", "yes"}}).status == 409);
}

TEST_CASE("sessions need a model for mbpp detectors") {
  auto ctx = context();
  ctx.column_model = nullptr;
  SessionManager m(ctx);
  auto r = m.create({{"instance", {{"index", 1}, {"stage", "columns"}}}, {"policy", "abstain"}});
  CHECK(r.status == 400);
  CHECK(r.body["error"]["message"].get<std::string>().find("columns") != std::string::npos);
}

TEST_CASE("replay equivalence with the in-process human policy") {
  const auto ctx = context();
  SessionManager m(ctx);
  std::size_t with_questions = 0;
  for (std::size_t idx = 0; idx < 120; ++idx) {
    for (auto stage : {Stage::tables, Stage::columns}) {
      for (const char* kind : {"mbpp", "mbpp+oracle"}) {
        SessionRequest req;
        req.instance = idx;
        req.stage = stage;
        req.detector.kind = kind;
        auto parts = build_session_parts(ctx, req);
        RandomResponder human(derive_seed(77, {idx}));
        auto expected = linker::run_policy_human(parts.input, *parts.model, *parts.detector, human,
                                                 parts.seed);
        with_questions += !expected.transcript.empty();

        auto st = m.create({{"instance", {{"index", idx}, {"stage", linker::stage_name(stage)}}},
                            {"policy", "human"},
                            {"detector", {{"kind", kind}}}})
                      .body;
        const auto id = st["session_id"].get<std::string>();
        for (const auto& ex : expected.transcript) {
          REQUIRE(st["status"] == "awaiting_answer");
          REQUIRE(st["pending_question"]["question_id"] == ex.question.id);
          CHECK(st["pending_question"]["context"] == ex.question.context);
          auto a = m.answer(id, {{"question_id", ex.question.id}, {"answer", ex.answer}});
          REQUIRE(a.status == 200);
          st = a.body;
        }
        auto res = m.result(id);
        REQUIRE(res.status == 200);
        CHECK(res.body["outcome"].dump() == to_json(expected).dump());
      }
    }
  }
  CHECK(with_questions > 20);
}

TEST_CASE("finished sessions are recorded in the run log") {
  auto ws = temp_workspace("svc");
  RunLog log(ws);
  SessionManager m(context(), &log);
  auto c = m.create({{"instance", 0}, {"detector", {{"kind", "never"}}}});
  REQUIRE(c.body["status"] == "done");
  auto runs = m.runs();
  REQUIRE(runs.status == 200);
  REQUIRE(runs.body["runs"].size() == 1);
  const auto run_id = runs.body["runs"][0]["id"].get<std::string>();
  auto one = m.run(run_id);
  CHECK(one.status == 200);
  CHECK(one.body["run"]["command"] == "session");
  fs::remove_all(ws);
}

TEST_CASE("long poll wakes on an answer") {
  SessionManager m(context());
  auto c = m.create(oracle_request(find_instance(1))).body;
  const auto id = c["session_id"].get<std::string>();
  const auto v = c["version"].get<std::uint64_t>();
  auto t0 = std::chrono::steady_clock::now();
  auto idle = m.state(id, v, 50);
  CHECK(idle.body["version"] == v);
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(40));

  std::thread answerer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    m.answer(id, {{"question_id", c["pending_question"]["question_id"]}, {"answer", "yes"}});
  });
  auto woke = m.state(id, v, 5000);
  answerer.join();
  CHECK(woke.body["version"] == v + 1);
}

TEST_CASE("HTTP round trip") {
  auto ws = temp_workspace("http");
  RunLog log(ws);
  SessionManager m(context(), &log);
  HttpService http(m);
  const int port = http.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread server([&] { http.listen(); });

  httplib::Client cli("127.0.0.1", port);
  auto created = cli.Post("/sessions", oracle_request(find_instance(1)).dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  auto body = Json::parse(created->body);
  CHECK(body["schema"] == kSchema);
  const auto id = body["session_id"].get<std::string>();

  auto got = cli.Get("/sessions/" + id);
  REQUIRE(got);
  CHECK(got->status == 200);
  CHECK(Json::parse(got->body)["session_id"] == id);
  auto polled = cli.Get("/sessions/" + id + "?since=" + std::to_string(body["version"].get<int>()) +
                        "&wait_ms=20");
  REQUIRE(polled);
  CHECK(polled->status == 200);

  const auto qid = body["pending_question"]["question_id"];
  auto stale = cli.Post("/sessions/" + id + "/answer",
                        Json{{"question_id", qid.get<int>() + 1}, {"answer", "yes"}}.dump(),
                        "application/json");
  REQUIRE(stale);
  CHECK(stale->status == 409);
  auto garbage = cli.Post("/sessions/" + id + "/answer", "{not json", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);
  CHECK(Json::parse(garbage->body)["schema"] == kSchema);

  auto ans = cli.Post("/sessions/" + id + "/answer",
                      Json{{"question_id", qid}, {"answer", "yes"}}.dump(), "application/json");
  REQUIRE(ans);
  CHECK(ans->status == 200);
  auto res = cli.Get("/sessions/" + id + "/result");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["status"] == "done");

  auto missing = cli.Get("/sessions/s-424242");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["schema"] == kSchema);
  auto nowhere = cli.Get("/no/such/route");
  REQUIRE(nowhere);
  CHECK(nowhere->status == 404);
  CHECK(Json::parse(nowhere->body)["schema"] == kSchema);

  auto runs = cli.Get("/runs");
  REQUIRE(runs);
  auto list = Json::parse(runs->body)["runs"];
  REQUIRE(list.size() == 1);
  auto one = cli.Get("/runs/" + list[0]["id"].get<std::string>());
  REQUIRE(one);
  CHECK(one->status == 200);

  http.stop();
  server.join();
  fs::remove_all(ws);
}
