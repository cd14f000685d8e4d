// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "linkguard/common/error.hpp"
#include "linkguard/conformal/calibrator.hpp"
#include "linkguard/core/trace_io.hpp"
#include "linkguard/eval/config.hpp"
#include "linkguard/eval/harness.hpp"
#include "linkguard/eval/report.hpp"
#include "linkguard/eval/theorems.hpp"
#include "linkguard/service/http.hpp"
#include "linkguard/service/run_log.hpp"
#include "linkguard/service/session_service.hpp"

namespace linkguard::cli {

namespace fs = std::filesystem;
using Json = eval::Json;

namespace {

struct Common {
  std::string config_path;
  std::string workspace;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) {
    throw PreconditionError(std::string(what) + " '" + path + "' does not exist");
  }
}

eval::RunConfig load_config(const Common& c) {
  if (c.config_path.empty()) return {};
  require_file(c.config_path, "config file");
  return eval::load_run_config(c.config_path);
}

service::RunLog open_log(const Common& c) {
  return service::RunLog(c.workspace.empty() ? service::workspace_dir() : fs::path(c.workspace));
}

// Appends the run record and reports its id on `err`.
void record(const Common& c, service::RunRecord r, std::ostream& err) {
  r.finished_at = service::utc_timestamp();
  auto log = open_log(c);
  const auto id = log.append(std::move(r));
  err << "run " << id << " recorded in " << log.path().string() << '\n';
}

service::RunRecord start_record(const std::string& command, const eval::RunConfig& cfg) {
  service::RunRecord r;
  r.command = command;
  r.config = eval::to_json(cfg);
  r.started_at = service::utc_timestamp();
  return r;
}

linker::Stage parse_stage(const std::string& s) {
  if (s == "tables") return linker::Stage::tables;
  if (s == "columns") return linker::Stage::columns;
  throw PreconditionError("stage must be tables or columns, got '" + s + "'");
}

std::shared_ptr<const conformal::BppModel> load_model(const std::string& path) {
  if (path.empty()) return nullptr;
  require_file(path, "model file");
  auto m = std::make_shared<const conformal::BppModel>(conformal::read_model(path));
  if (!m->calibrated()) {
    throw PreconditionError("model '" + path + "' is not calibrated; run 'linkguard calibrate' first");
  }
  return m;
}

service::ServiceContext make_context(const eval::RunConfig& cfg, const std::string& table_model,
                                     const std::string& column_model) {
  service::ServiceContext ctx;
  ctx.sim = cfg.pipeline.sim;
  ctx.catalog = sim::generate_catalog(ctx.sim);
  ctx.table_model = load_model(table_model);
  ctx.column_model = load_model(column_model);
  ctx.seed = cfg.eval.seed;
  return ctx;
}

// Human responder over a pair of streams.
class StreamResponder : public linker::Responder {
 public:
  StreamResponder(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  bool relevant(const std::string& entity, const linker::LinkingSession& s) override {
    prompt(s, entity);
    for (;;) {
      const auto a = read_line();
      if (a == "yes" || a == "y") return true;
      if (a == "no" || a == "n") return false;
      out_ << "Please answer yes or no: " << std::flush;
    }
  }
  std::string provide_correct(linker::QuestionKind, const linker::LinkingSession& s) override {
    prompt(s, "");
    return read_line();
  }

 private:
  void prompt(const linker::LinkingSession& s, const std::string& subject) {
    if (s.pending()) {
      out_ << s.pending()->context;
    } else {
      out_ << "Is '" << subject << "' relevant?";
    }
    out_ << "\n> " << std::flush;
  }
  std::string read_line() {
    std::string line;
    if (!std::getline(in_, line)) throw SessionError("input closed while a question was pending");
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    return line;
  }
  std::istream& in_;
  std::ostream& out_;
};

int cmd_simulate(const Common& c, std::size_t instances, std::size_t first, std::string stage,
                 std::uint64_t seed, bool seed_set, const std::string& out_path, std::ostream& out,
                 std::ostream& err) {
  auto cfg = load_config(c);
  if (seed_set) cfg.pipeline.sim.seed = seed;
  cfg.pipeline.sim.validate();
  const auto st = parse_stage(stage);
  const auto catalog = sim::generate_catalog(cfg.pipeline.sim);
  const auto inst = sim::generate_instances(cfg.pipeline.sim, catalog, instances, first);
  const auto traces = sim::produce_traces(catalog, cfg.pipeline.sim, inst, st);
  core::write_traces(out_path, traces);
  const auto sidecar = core::catalog_sidecar_path(out_path);
  core::write_catalog(sidecar, catalog);
  std::size_t branches = 0, tokens = 0;
  for (const auto& t : traces) {
    tokens += t.labels.size();
    for (auto l : t.labels) branches += l;
  }
  out << "wrote " << traces.size() << " traces (" << tokens << " tokens, " << branches
      << " branching points) to " << out_path << '\n';
  auto r = start_record("simulate-data", cfg);
  r.seeds = Json{{"sim", cfg.pipeline.sim.seed}};
  r.artifacts = Json{{"traces", out_path}, {"catalog", sidecar.string()}};
  r.outcome = Json{{"traces", traces.size()}, {"tokens", tokens}, {"branches", branches},
                   {"stage", stage}, {"first_index", first}};
  record(c, std::move(r), err);
  return kExitOk;
}

int cmd_build_dataset(const Common& c, const std::string& traces_path, const std::string& train_out,
                      const std::string& cal_out, double fraction, bool fraction_set,
                      std::uint64_t split_seed, bool seed_set, std::ostream& out,
                      std::ostream& err) {
  auto cfg = load_config(c);
  if (fraction_set) cfg.pipeline.calib_fraction = fraction;
  if (seed_set) cfg.pipeline.split_seed = split_seed;
  require_file(traces_path, "trace file");
  const auto traces = core::read_traces(fs::path(traces_path));
  const auto ds = core::build_branch_dataset(traces);
  for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
  const auto split = core::split_dataset(ds, cfg.pipeline.calib_fraction, cfg.pipeline.split_seed);
  core::write_dataset(train_out, split.train);
  core::write_dataset(cal_out, split.calibration);
  out << "dataset: " << ds.size() << " rows, " << ds.positives() << " branching, " << ds.layers()
      << " layers x " << ds.dim() << " dims; train " << split.train.size() << ", calibration "
      << split.calibration.size() << '\n';
  auto r = start_record("build-branch-dataset", cfg);
  r.seeds = Json{{"split", cfg.pipeline.split_seed}};
  r.artifacts = Json{{"traces", traces_path}, {"train", train_out}, {"calibration", cal_out}};
  r.outcome = Json{{"rows", ds.size()},
                   {"positives", ds.positives()},
                   {"train_rows", split.train.size()},
                   {"calibration_rows", split.calibration.size()},
                   {"warnings", ds.warnings}};
  record(c, std::move(r), err);
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& train_path, const std::string& model_out,
              CLI::App& sub, std::size_t epochs, std::size_t hidden, double lr, std::uint64_t seed,
              std::ostream& out, std::ostream& err) {
  auto cfg = load_config(c);
  auto& hp = cfg.pipeline.hp;
  if (sub.count("--epochs")) hp.epochs = epochs;
  if (sub.count("--hidden")) hp.hidden_width = hidden;
  if (sub.count("--lr")) hp.learning_rate = lr;
  if (sub.count("--seed")) hp.seed = seed;
  if (hp.hidden_width == 0) throw PreconditionError("--hidden must be positive");
  if (!(hp.learning_rate > 0.0)) throw PreconditionError("--lr must be positive");
  require_file(train_path, "dataset file");
  const auto ds = core::read_dataset(fs::path(train_path));
  if (ds.single_class()) {
    throw PreconditionError("training dataset '" + train_path +
                            "' contains a single class; both labels are required");
  }
  conformal::BppModel model;
  model.classifiers = bpp::train_all_layers(ds, hp);
  conformal::write_model(model_out, model);
  Json losses = Json::array();
  for (const auto& cl : model.classifiers) {
    losses.push_back(cl.info.final_loss);
    out << "layer " << cl.layer_index << ": final loss " << cl.info.final_loss << ", train acc "
        << bpp::training_accuracy(cl, ds.layer(cl.layer_index)) << '\n';
  }
  auto r = start_record("train-bpp", cfg);
  r.seeds = Json{{"init", hp.seed}};
  r.artifacts = Json{{"train", train_path}, {"model", model_out}};
  r.outcome = Json{{"layers", model.classifiers.size()}, {"final_loss", losses}};
  record(c, std::move(r), err);
  return kExitOk;
}

int cmd_calibrate(const Common& c, const std::string& model_path, const std::string& cal_path,
                  const std::string& model_out, CLI::App& sub, double alpha, std::size_t k,
                  const std::string& mode, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(c);
  auto& opts = cfg.pipeline.calibration;
  if (sub.count("--alpha")) opts.alpha = alpha;
  if (sub.count("--k")) opts.k = k;
  if (sub.count("--mode")) opts.mode = conformal::parse_mode(mode);
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw PreconditionError("--alpha must lie in (0,1)");
  require_file(model_path, "model file");
  require_file(cal_path, "dataset file");
  auto model = conformal::read_model(model_path);
  const auto ds = core::read_dataset(fs::path(cal_path));
  if (opts.k == 0 || opts.k > model.classifiers.size()) {
    throw PreconditionError("--k must lie in [1, " + std::to_string(model.classifiers.size()) + "]");
  }
  const auto calibrated = conformal::calibrate_model(std::move(model.classifiers), ds, opts);
  conformal::write_model(model_out, calibrated);
  Json ranking = Json::array();
  for (const auto& rl : calibrated.selection->ranking) {
    ranking.push_back({{"layer", rl.layer}, {"auc", rl.auc}});
  }
  out << "selected layers:";
  for (auto l : calibrated.selection->chosen()) out << ' ' << l;
  out << " (alpha " << opts.alpha << ", k " << opts.k << ", " << conformal::mode_name(opts.mode)
      << ")\n";
  auto r = start_record("calibrate", cfg);
  r.artifacts = Json{{"model_in", model_path}, {"calibration", cal_path}, {"model", model_out}};
  r.outcome = Json{{"ranking", ranking}, {"selected", calibrated.selection->chosen()}};
  record(c, std::move(r), err);
  return kExitOk;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  f << s;
}

int cmd_evaluate(const Common& c, CLI::App& sub, std::size_t instances, const std::string& out_dir,
                 const std::string& from_run, std::ostream& out, std::ostream& err) {
  eval::RunConfig cfg;
  Json stored;
  if (!from_run.empty()) {
    auto log = open_log(c);
    const auto rec = log.find(from_run);
    if (!rec) throw PreconditionError("run '" + from_run + "' not found in " + log.path().string());
    if (rec->command != "evaluate" || !rec->outcome.contains("summary")) {
      throw PreconditionError("run '" + from_run + "' is a '" + rec->command +
                              "' run without an evaluation summary");
    }
    eval::apply_json(rec->config, cfg);
    stored = rec->outcome.at("summary");
  } else {
    cfg = load_config(c);
    if (sub.count("--instances")) cfg.eval.instances = instances;
  }
  const auto pipeline = eval::build_pipeline(cfg.pipeline);
  const auto report = eval::evaluate_policies(pipeline, cfg.eval);
  const auto summary = eval::summary_json(report);
  eval::write_summary_table(out, report);

  auto r = start_record("evaluate", cfg);
  r.seeds = Json{{"sim", cfg.pipeline.sim.seed},
                 {"init", cfg.pipeline.hp.seed},
                 {"split", cfg.pipeline.split_seed},
                 {"eval", cfg.eval.seed}};
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const fs::path d(out_dir);
    write_text(d / "summary.json", summary.dump(2) + "\n");
    std::ostringstream rec, table, ks, as;
    eval::write_records(rec, report.records);
    write_text(d / "records.jsonl", rec.str());
    eval::write_summary_table(table, report);
    write_text(d / "summary.txt", table.str());
    const auto n = pipeline.tables.model->classifiers.size();
    std::vector<std::size_t> kgrid;
    for (std::size_t k = 1; k <= n; k += 2) kgrid.push_back(k);
    eval::write_sweep_csv(ks, eval::k_sweep(pipeline.tables.model, pipeline.tables.test, kgrid,
                                            cfg.eval.seed));
    write_text(d / "k_sweep.csv", ks.str());
    eval::write_sweep_csv(as, eval::alpha_sweep(*pipeline.tables.model, pipeline.tables.calibration,
                                                pipeline.tables.test, {0.05, 0.1, 0.15, 0.2, 0.3},
                                                cfg.pipeline.calibration, cfg.eval.seed));
    write_text(d / "alpha_sweep.csv", as.str());
    r.artifacts = Json{{"summary", (d / "summary.json").string()},
                       {"records", (d / "records.jsonl").string()},
                       {"k_sweep", (d / "k_sweep.csv").string()},
                       {"alpha_sweep", (d / "alpha_sweep.csv").string()}};
  }
  int code = kExitOk;
  r.outcome = Json{{"summary", summary}};
  if (!from_run.empty()) {
    const bool same = stored.dump() == summary.dump();
    r.outcome["reproduces"] = from_run;
    r.outcome["match"] = same;
    out << (same ? "reproduced " : "MISMATCH against ") << from_run << '\n';
    if (!same) code = kExitRuntime;
  }
  record(c, std::move(r), err);
  return code;
}

int cmd_theorems(const Common& c, CLI::App& sub, std::size_t trials, const std::string& out_path,
                 const std::string& csv_path, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(c);
  if (sub.count("--trials")) {
    cfg.theorems.trials = trials;
    cfg.theorems.adversarial_trials = trials;
  }
  const auto rep = eval::validate_theorems(cfg.theorems);
  const auto curve = eval::coverage_sweep(cfg.coverage);
  std::string why1, why3;
  const bool ok1 = rep.theorem1_ok(&why1);
  const bool ok3 = rep.theorem3_ok(&why3);
  out << "theorem 1 (majority miss <= alpha/(1-theta)): " << (ok1 ? "holds" : "VIOLATED " + why1) << '\n';
  out << "theorem 2 (set size bound): " << rep.theorem2_violations << " violations in "
      << rep.theorem2_trials << " families\n";
  out << "theorem 3 (permutation miss <= 2 alpha, subset of half vote): "
      << (ok3 ? "holds" : "VIOLATED " + why3) << '\n';
  for (const auto& p : curve) {
    out << "coverage alpha=" << p.alpha << ": " << p.coverage << " (guaranteed " << p.guaranteed
        << ")\n";
  }
  Json j = eval::to_json(rep);
  j["coverage"] = eval::to_json(curve);
  if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
  if (!csv_path.empty()) {
    std::ostringstream s;
    eval::write_coverage_csv(s, curve);
    write_text(csv_path, s.str());
  }
  auto r = start_record("validate-theorems", cfg);
  r.seeds = Json{{"theorems", cfg.theorems.seed}, {"coverage", cfg.coverage.seed}};
  if (!out_path.empty()) r.artifacts["report"] = out_path;
  if (!csv_path.empty()) r.artifacts["coverage_csv"] = csv_path;
  r.outcome = j;
  record(c, std::move(r), err);
  return kExitOk;
}

struct LinkArgs {
  std::size_t instance = 0;
  std::string stage = "tables";
  std::string policy = "human";
  std::string detector = "mbpp";
  std::string table_model;
  std::string column_model;
  std::uint64_t seed = 0;
  bool interactive = false;
};

int cmd_link(const Common& c, CLI::App& sub, const LinkArgs& a, std::istream& in,
             std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(c);
  const auto ctx = make_context(cfg, a.table_model, a.column_model);
  Json body{{"instance", {{"index", a.instance}, {"stage", a.stage}}},
            {"policy", a.policy},
            {"detector", {{"kind", a.detector}}}};
  if (sub.count("--seed")) body["seed"] = a.seed;
  const auto req = service::parse_session_request(body);
  auto parts = service::build_session_parts(ctx, req);
  sim::OracleResponder oracle(parts.gt);
  StreamResponder human(in, out);
  linker::Responder* responder = nullptr;
  if (req.policy == linker::Policy::human) {
    responder = a.interactive ? static_cast<linker::Responder*>(&human) : &oracle;
  }
  if (a.interactive) out << "Question: " << parts.input.question << '\n';
  const auto outcome = linker::run_session(parts.input, *parts.model, *parts.detector,
                                           {req.policy, parts.seed}, parts.surrogate.get(), responder);
  if (a.interactive) {
    out << "Session " << linker::status_name(outcome.status) << ": ";
    for (std::size_t i = 0; i < outcome.linking.size(); ++i) out << (i ? ", " : "") << outcome.linking[i];
    if (!outcome.abstain_reason.empty()) out << " (" << outcome.abstain_reason << ")";
    out << '\n';
  }
  out << service::to_json(outcome).dump() << '\n';
  auto r = start_record("link", cfg);
  r.config["request"] = service::to_json(req);
  r.seeds = Json{{"session", parts.seed}, {"sim", ctx.sim.seed}};
  if (!a.table_model.empty()) r.artifacts["table_model"] = a.table_model;
  if (!a.column_model.empty()) r.artifacts["column_model"] = a.column_model;
  r.outcome = Json{{"instance", parts.instance.id},
                   {"status", linker::status_name(outcome.status)},
                   {"linking", outcome.linking},
                   {"gt", parts.gt},
                   {"interactive", a.interactive}};
  record(c, std::move(r), err);
  return kExitOk;
}

int cmd_serve(const Common& c, const std::string& table_model, const std::string& column_model,
              const std::string& host, int port, std::ostream& out) {
  const auto cfg = load_config(c);
  auto log = open_log(c);
  service::SessionManager manager(make_context(cfg, table_model, column_model), &log);
  service::HttpService http(manager);
  const int bound = http.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  out << "listening on http://" << host << ':' << bound << " (run log " << log.path().string()
      << ")" << std::endl;
  http.listen();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"linkguard: branching-point detection and abstention for schema linking"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON config file")->option_text("FILE");
  app.add_option("--workspace", common.workspace,
                 "workspace directory (default $LINKGUARD_WORKSPACE or ./linkguard-workspace)");

  auto* sim_cmd = app.add_subcommand("simulate-data", "simulate generations and write trace records");
  std::size_t sim_instances = 200, sim_first = 0;
  std::string sim_stage = "tables", sim_out;
  std::uint64_t sim_seed = 1;
  sim_cmd->add_option("--instances", sim_instances, "number of instances")->capture_default_str();
  sim_cmd->add_option("--first-index", sim_first, "index of the first instance")->capture_default_str();
  sim_cmd->add_option("--stage", sim_stage, "tables or columns")->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "simulator seed (overrides config)");
  sim_cmd->add_option("--out", sim_out, "output trace file")->required();

  auto* ds_cmd = app.add_subcommand("build-branch-dataset", "pool traces into train/calibration datasets");
  std::string ds_traces, ds_train, ds_cal;
  double ds_fraction = 0.4;
  std::uint64_t ds_seed = 7;
  ds_cmd->add_option("--traces", ds_traces, "input trace file")->required();
  ds_cmd->add_option("--out-train", ds_train, "training dataset output")->required();
  ds_cmd->add_option("--out-calibration", ds_cal, "calibration dataset output")->required();
  ds_cmd->add_option("--calib-fraction", ds_fraction, "fraction held out for calibration");
  ds_cmd->add_option("--split-seed", ds_seed, "split seed");

  auto* train_cmd = app.add_subcommand("train-bpp", "train one branching classifier per layer");
  std::string tr_data, tr_out;
  std::size_t tr_epochs = 300, tr_hidden = 64;
  double tr_lr = 0.05;
  std::uint64_t tr_seed = 0;
  train_cmd->add_option("--train", tr_data, "training dataset")->required();
  train_cmd->add_option("--out", tr_out, "model output")->required();
  train_cmd->add_option("--epochs", tr_epochs, "gradient steps");
  train_cmd->add_option("--hidden", tr_hidden, "hidden width");
  train_cmd->add_option("--lr", tr_lr, "learning rate");
  train_cmd->add_option("--seed", tr_seed, "initialization seed");

  auto* cal_cmd = app.add_subcommand("calibrate", "calibrate conformal thresholds and select layers");
  std::string cal_model, cal_data, cal_out, cal_mode = "exchangeable";
  double cal_alpha = 0.1;
  std::size_t cal_k = 5;
  cal_cmd->add_option("--model", cal_model, "trained model")->required();
  cal_cmd->add_option("--calibration", cal_data, "calibration dataset")->required();
  cal_cmd->add_option("--out", cal_out, "calibrated model output")->required();
  cal_cmd->add_option("--alpha", cal_alpha, "error level")->capture_default_str();
  cal_cmd->add_option("--k", cal_k, "number of layers to aggregate")->capture_default_str();
  cal_cmd->add_option("--mode", cal_mode, "exchangeable or weighted")->capture_default_str();

  auto* ev_cmd = app.add_subcommand("evaluate", "simulate, train, calibrate and evaluate every policy");
  std::size_t ev_instances = 500;
  std::string ev_out, ev_from;
  ev_cmd->add_option("--instances", ev_instances, "evaluation instances");
  ev_cmd->add_option("--out-dir", ev_out, "directory for summary, records and sweep CSVs");
  ev_cmd->add_option("--from-run", ev_from, "re-run a recorded evaluation and compare summaries");

  auto* th_cmd = app.add_subcommand("validate-theorems", "Monte Carlo checks of the aggregation bounds");
  std::size_t th_trials = 100000;
  std::string th_out, th_csv;
  th_cmd->add_option("--trials", th_trials, "trials per regime and adversarial families");
  th_cmd->add_option("--out", th_out, "JSON report output");
  th_cmd->add_option("--coverage-csv", th_csv, "coverage curve CSV output");

  auto* link_cmd = app.add_subcommand("link", "run one linking session on a simulated instance");
  LinkArgs la;
  link_cmd->add_option("--instance", la.instance, "simulator instance index")->capture_default_str();
  link_cmd->add_option("--stage", la.stage, "tables or columns")->capture_default_str();
  link_cmd->add_option("--policy", la.policy, "none, abstain, surrogate or human")->capture_default_str();
  link_cmd->add_option("--detector", la.detector, "mbpp, oracle, mbpp+oracle or never")->capture_default_str();
  link_cmd->add_option("--model", la.table_model, "calibrated table-stage model");
  link_cmd->add_option("--column-model", la.column_model, "calibrated column-stage model");
  link_cmd->add_option("--seed", la.seed, "session seed");
  link_cmd->add_flag("--interactive", la.interactive, "answer questions on stdin");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP session service");
  std::string sv_model, sv_cmodel, sv_host = "127.0.0.1";
  int sv_port = 8080;
  serve_cmd->add_option("--model", sv_model, "calibrated table-stage model");
  serve_cmd->add_option("--column-model", sv_cmodel, "calibrated column-stage model");
  serve_cmd->add_option("--host", sv_host)->capture_default_str();
  serve_cmd->add_option("--port", sv_port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitValidation;
  }

  try {
    if (*sim_cmd) {
      return cmd_simulate(common, sim_instances, sim_first, sim_stage, sim_seed,
                          sim_cmd->count("--seed") > 0, sim_out, out, err);
    }
    if (*ds_cmd) {
      return cmd_build_dataset(common, ds_traces, ds_train, ds_cal, ds_fraction,
                               ds_cmd->count("--calib-fraction") > 0, ds_seed,
                               ds_cmd->count("--split-seed") > 0, out, err);
    }
    if (*train_cmd) {
      return cmd_train(common, tr_data, tr_out, *train_cmd, tr_epochs, tr_hidden, tr_lr, tr_seed,
                       out, err);
    }
    if (*cal_cmd) {
      return cmd_calibrate(common, cal_model, cal_data, cal_out, *cal_cmd, cal_alpha, cal_k,
                           cal_mode, out, err);
    }
    if (*ev_cmd) return cmd_evaluate(common, *ev_cmd, ev_instances, ev_out, ev_from, out, err);
    if (*th_cmd) return cmd_theorems(common, *th_cmd, th_trials, th_out, th_csv, out, err);
    if (*link_cmd) return cmd_link(common, *link_cmd, la, in, out, err);
    if (*serve_cmd) return cmd_serve(common, sv_model, sv_cmodel, sv_host, sv_port, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace linkguard::cli
