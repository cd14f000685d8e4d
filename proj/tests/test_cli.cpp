// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "linkguard/conformal/calibrator.hpp"
#include "linkguard/core/trace_io.hpp"
#include "linkguard/service/run_log.hpp"
#include "linkguard/service/session_service.hpp"

using namespace linkguard;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() /
          ("linkguard-cli-" +
           std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  Result run(std::vector<std::string> args, const std::string& input = "") const {
    std::vector<std::string> full{"linkguard", "--workspace", dir.string()};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string last_line(const std::string& text) {
  auto t = text;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  return t.substr(t.rfind('\n') == std::string::npos ? 0 : t.rfind('\n') + 1);
}

// Tiny settings so full pipelines run in seconds.
const char* kTinyConfig = R"({
  "pipeline": {"train_instances": 200, "test_instances": 50, "train_columns": false},
  "hyperparams": {"hidden_width": 8, "epochs": 30},
  "eval": {"instances": 30, "joint": false},
  "coverage": {"n_train": 300, "n_cal": 500, "n_test": 500}
})";

}  // namespace

TEST_CASE("simulate-data is byte-identical across runs") {
  Workspace ws;
  auto a = ws.run({"simulate-data", "--instances", "40", "--seed", "1", "--out", ws.path("a.jsonl")});
  auto b = ws.run({"simulate-data", "--instances", "40", "--seed", "1", "--out", ws.path("b.jsonl")});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(ws.path("a.jsonl")) == slurp(ws.path("b.jsonl")));
  CHECK(!slurp(ws.path("a.jsonl")).empty());
  CHECK(core::read_traces(fs::path(ws.path("a.jsonl"))).size() == 40);
  CHECK(fs::exists(core::catalog_sidecar_path(ws.path("a.jsonl"))));
  auto c = ws.run({"simulate-data", "--instances", "40", "--seed", "2", "--out", ws.path("c.jsonl")});
  CHECK(slurp(ws.path("a.jsonl")) != slurp(ws.path("c.jsonl")));
  // Every command lands in the run log.
  service::RunLog log(ws.dir);
  CHECK(log.list().size() == 3);
  CHECK(log.list()[0].command == "simulate-data");
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(ws.run({}).code == cli::kExitValidation);
  CHECK(ws.run({"no-such-command"}).code == cli::kExitValidation);
  CHECK(ws.run({"simulate-data"}).code == cli::kExitValidation);
  CHECK(ws.run({"simulate-data", "--out", ws.path("x"), "--bogus"}).code == cli::kExitValidation);
  auto missing = ws.run({"build-branch-dataset", "--traces", ws.path("absent.jsonl"), "--out-train",
                         ws.path("t"), "--out-calibration", ws.path("c")});
  CHECK(missing.code == cli::kExitValidation);
  CHECK(missing.err.find("absent.jsonl") != std::string::npos);
  auto bad_cfg = ws.write("bad.json", R"({"sim": {"tabels": 3}})");
  auto r = ws.run({"--config", bad_cfg, "simulate-data", "--out", ws.path("x")});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("sim.tabels") != std::string::npos);
  ws.write("garbage.jsonl", "{\"id\": 3}\n");
  CHECK(ws.run({"build-branch-dataset", "--traces", ws.path("garbage.jsonl"), "--out-train",
                ws.path("t"), "--out-calibration", ws.path("c")})
            .code == cli::kExitValidation);
  CHECK(ws.run({"link", "--stage", "rows", "--detector", "oracle"}).code == cli::kExitValidation);
  // mbpp without a model is a validation error.
  CHECK(ws.run({"link", "--policy", "abstain"}).code == cli::kExitValidation);
  CHECK(ws.run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("simulate, split, train, calibrate and link") {
  Workspace ws;
  REQUIRE(ws.run({"simulate-data", "--instances", "300", "--out", ws.path("tr.jsonl")}).code == 0);
  REQUIRE(ws.run({"build-branch-dataset", "--traces", ws.path("tr.jsonl"), "--out-train",
                  ws.path("train.ds"), "--out-calibration", ws.path("cal.ds")})
              .code == 0);
  auto train = core::read_dataset(fs::path(ws.path("train.ds")));
  auto cal = core::read_dataset(fs::path(ws.path("cal.ds")));
  CHECK(train.size() > 0);
  CHECK(cal.size() ==
        static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(train.size() + cal.size()))));

  REQUIRE(ws.run({"train-bpp", "--train", ws.path("train.ds"), "--out", ws.path("raw.model"),
                  "--epochs", "40", "--hidden", "8"})
              .code == 0);
  auto raw = conformal::read_model(ws.path("raw.model"));
  CHECK(!raw.calibrated());
  CHECK(raw.classifiers.size() == 8);
  // Uncalibrated models are refused where detection needs them.
  CHECK(ws.run({"link", "--policy", "abstain", "--model", ws.path("raw.model")}).code ==
        cli::kExitValidation);

  REQUIRE(ws.run({"calibrate", "--model", ws.path("raw.model"), "--calibration", ws.path("cal.ds"),
                  "--out", ws.path("cal.model")})
              .code == 0);
  auto model = conformal::read_model(ws.path("cal.model"));
  REQUIRE(model.calibrated());
  CHECK(model.selection->k == 5);
  CHECK(model.calibrators[0].alpha == 0.1);
  CHECK(model.calibrators[0].mode == conformal::Mode::exchangeable);

  auto link = ws.run({"link", "--instance", "3", "--policy", "abstain", "--model", ws.path("cal.model")});
  REQUIRE(link.code == 0);
  auto j = service::Json::parse(last_line(link.out));
  CHECK((j["status"] == "done" || j["status"] == "abstained"));
  auto again = ws.run({"link", "--instance", "3", "--policy", "abstain", "--model", ws.path("cal.model")});
  CHECK(last_line(again.out) == last_line(link.out));
}

TEST_CASE("interactive link follows a scripted transcript") {
  Workspace ws;
  const sim::SimConfig sim;
  const auto catalog = sim::generate_catalog(sim);
  service::ServiceContext ctx{catalog, sim, nullptr, nullptr, 1};
  // Instance with a planted error, answered the way the oracle would.
  std::size_t idx = 0;
  while (sim::generate_instances(sim, catalog, 1, idx).at(0).planted.empty()) ++idx;
  service::SessionRequest req;
  req.instance = idx;
  req.detector.kind = "oracle";
  auto parts = service::build_session_parts(ctx, req);
  sim::OracleResponder oracle(parts.gt);
  auto expected = linker::run_policy_human(parts.input, *parts.model, *parts.detector, oracle,
                                           parts.seed);
  REQUIRE(!expected.transcript.empty());
  std::string script = "maybe\n";  // rejected, then re-asked
  for (const auto& ex : expected.transcript) script += ex.answer + "\n";

  auto r = ws.run({"link", "--instance", std::to_string(idx), "--detector", "oracle",
                   "--interactive"},
                  script);
  REQUIRE(r.code == 0);
  CHECK(r.out.find(expected.transcript[0].question.context) != std::string::npos);
  CHECK(r.out.find("Please answer yes or no") != std::string::npos);
  CHECK(r.out.find("Session done") != std::string::npos);
  CHECK(last_line(r.out) == service::to_json(expected).dump());

  // Non-interactive human mode answers with the oracle.
  auto auto_run = ws.run({"link", "--instance", std::to_string(idx), "--detector", "oracle"});
  CHECK(last_line(auto_run.out) == service::to_json(expected).dump());

  // Input ending mid-session is a runtime failure.
  auto cut = ws.run({"link", "--instance", std::to_string(idx), "--detector", "oracle",
                     "--interactive"},
                    "");
  CHECK(cut.code == cli::kExitRuntime);
}

TEST_CASE("evaluate writes reports and reproduces from the run log") {
  Workspace ws;
  auto cfg = ws.write("tiny.json", kTinyConfig);
  auto r = ws.run({"--config", cfg, "evaluate", "--out-dir", ws.path("out")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"summary.json", "records.jsonl", "summary.txt", "k_sweep.csv",
                        "alpha_sweep.csv"}) {
    CHECK_MESSAGE(fs::exists(ws.dir / "out" / f), f);
  }
  auto summary = service::Json::parse(slurp(ws.path("out/summary.json")));
  CHECK(summary["policies"].size() == 4);

  service::RunLog log(ws.dir);
  auto runs = log.list();
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].command == "evaluate");
  CHECK(runs[0].exit_code == 0);

  // No --config: the recorded config drives the rerun.
  auto again = ws.run({"evaluate", "--from-run", runs[0].id});
  REQUIRE_MESSAGE(again.code == 0, again.err);
  CHECK(again.out.find("reproduced " + runs[0].id) != std::string::npos);
  CHECK(ws.run({"evaluate", "--from-run", "run-999999"}).code == cli::kExitValidation);
}

TEST_CASE("validate-theorems writes a report") {
  Workspace ws;
  auto cfg = ws.write("tiny.json", kTinyConfig);
  auto r = ws.run({"--config", cfg, "validate-theorems", "--trials", "5000", "--out",
                   ws.path("th.json"), "--coverage-csv", ws.path("cov.csv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto j = service::Json::parse(slurp(ws.path("th.json")));
  CHECK(j.contains("regimes"));
  CHECK(slurp(ws.path("cov.csv")).find("alpha") != std::string::npos);
}
