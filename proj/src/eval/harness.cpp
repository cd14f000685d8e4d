// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/eval/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "linkguard/bpp/selection.hpp"
#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::eval {

using linker::Policy;
using linker::Stage;

core::BranchDataset stage_dataset(const core::SchemaCatalog& catalog, const sim::SimConfig& config,
                                  Stage stage, std::size_t count, std::size_t first_index) {
  const auto instances = sim::generate_instances(config, catalog, count, first_index);
  const auto traces = sim::produce_traces(catalog, config, instances, stage);
  return core::build_branch_dataset(traces);
}

namespace {

StageModel train_stage(const core::SchemaCatalog& catalog, const PipelineConfig& config,
                       Stage stage) {
  StageModel sm;
  const auto pooled = stage_dataset(catalog, config.sim, stage, config.train_instances, 0);
  if (pooled.single_class()) {
    throw PreconditionError(linker::stage_name(stage) +
                            " stage: simulated dataset has a single class; raise p_err or the "
                            "instance count");
  }
  auto split = core::split_dataset(pooled, config.calib_fraction,
                                   derive_seed(config.split_seed, {static_cast<std::uint64_t>(stage)}));
  sm.train = std::move(split.train);
  sm.calibration = std::move(split.calibration);
  sm.test = stage_dataset(catalog, config.sim, stage, config.test_instances, kTestIndexBase);
  auto classifiers = bpp::train_all_layers(sm.train, config.hp);
  sm.model = std::make_shared<const conformal::BppModel>(
      conformal::calibrate_model(std::move(classifiers), sm.calibration, config.calibration));
  return sm;
}

}  // namespace

Pipeline build_pipeline(const PipelineConfig& config) {
  config.sim.validate();
  Pipeline p;
  p.config = config;
  p.catalog = sim::generate_catalog(config.sim);
  p.tables = train_stage(p.catalog, config, Stage::tables);
  if (config.train_columns) p.columns = train_stage(p.catalog, config, Stage::columns);
  return p;
}

core::LayerStates row_states(const core::BranchDataset& data, std::size_t row) {
  core::LayerStates s(data.layers(), data.dim());
  for (std::size_t j = 0; j < data.layers(); ++j) {
    auto src = data.layer(j).row(row);
    std::copy(src.begin(), src.end(), s.layer(j).begin());
  }
  return s;
}

CoverageEar detect_tokens(std::shared_ptr<const conformal::BppModel> model,
                          const core::BranchDataset& data, std::vector<std::size_t> layers,
                          linker::Aggregator aggregator, std::uint64_t seed, double theta) {
  linker::MbppDetector det(std::move(model), std::move(layers), aggregator, theta);
  std::vector<std::uint8_t> flags(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    flags[i] = det.decide(det.sets(row_states(data, i)), i, seed) ? 1 : 0;
  }
  return coverage_ear(flags, data.labels());
}

std::vector<SweepPoint> k_sweep(std::shared_ptr<const conformal::BppModel> model,
                                const core::BranchDataset& test, const std::vector<std::size_t>& ks,
                                std::uint64_t seed) {
  if (!model->selection) throw PreconditionError("k_sweep: model has no layer ranking");
  const auto& ranking = model->selection->ranking;
  std::vector<SweepPoint> out;
  for (std::size_t k : ks) {
    if (k == 0 || k > ranking.size()) {
      throw PreconditionError("k_sweep: k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(ranking.size()) + "]");
    }
    std::vector<std::size_t> layers;
    for (std::size_t i = 0; i < k; ++i) layers.push_back(ranking[i].layer);
    for (auto agg : {linker::Aggregator::random_permutation, linker::Aggregator::half_vote}) {
      out.push_back({linker::aggregator_name(agg), k, model->calibrators.empty() ? 0.0 : model->calibrators[0].alpha,
                     detect_tokens(model, test, layers, agg, seed)});
    }
  }
  return out;
}

std::vector<SweepPoint> alpha_sweep(const conformal::BppModel& model,
                                    const core::BranchDataset& calibration,
                                    const core::BranchDataset& test,
                                    const std::vector<double>& alphas,
                                    const conformal::CalibrationOptions& base, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  for (double a : alphas) {
    auto opts = base;
    opts.alpha = a;
    auto m = std::make_shared<const conformal::BppModel>(
        conformal::calibrate_model(model.classifiers, calibration, opts));
    for (auto agg : {linker::Aggregator::random_permutation, linker::Aggregator::half_vote}) {
      out.push_back({linker::aggregator_name(agg), opts.k, a, detect_tokens(m, test, {}, agg, seed)});
    }
  }
  return out;
}

std::string detector_kind_name(DetectorKind d) {
  switch (d) {
    case DetectorKind::mbpp: return "mbpp";
    case DetectorKind::oracle: return "oracle";
    case DetectorKind::mbpp_oracle: return "mbpp+oracle";
  }
  return "mbpp";
}

DetectorKind parse_detector_kind(const std::string& name) {
  if (name == "mbpp") return DetectorKind::mbpp;
  if (name == "oracle") return DetectorKind::oracle;
  if (name == "mbpp+oracle") return DetectorKind::mbpp_oracle;
  throw PreconditionError("unknown detector '" + name + "' (expected mbpp, oracle or mbpp+oracle)");
}

const PolicyReport* EvalReport::find(Policy policy, DetectorKind detector) const {
  for (const auto& p : policies) {
    if (p.run.policy == policy && p.run.detector == detector) return &p;
  }
  return nullptr;
}

namespace {

std::shared_ptr<linker::Detector> make_detector(DetectorKind kind,
                                                std::shared_ptr<const conformal::BppModel> model) {
  auto mbpp = [&] { return std::make_shared<linker::MbppDetector>(model); };
  switch (kind) {
    case DetectorKind::mbpp: return mbpp();
    case DetectorKind::oracle: return std::make_shared<linker::OracleDetector>();
    case DetectorKind::mbpp_oracle:
      return std::make_shared<linker::UnionDetector>(mbpp(), std::make_shared<linker::OracleDetector>());
  }
  return mbpp();
}

bool same_set(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

struct StageRun {
  linker::SessionOutcome tables;
  std::optional<linker::JointOutcome> joint;
};

// Everything one instance needs: per-stage generators, surrogates and
// responders live here so the column factory can hand out pointers.
struct InstanceRunner {
  const Pipeline& p;
  const sim::SimInstance& inst;
  std::uint64_t seed;

  std::optional<sim::SimGenerator> col_model;
  std::optional<sim::SimSurrogate> col_surrogate;
  std::optional<sim::OracleResponder> col_responder;

  linker::JointOutcome run(Policy policy, linker::Detector& table_det, linker::Detector* col_det) {
    const auto& cfg = p.config.sim;
    auto in_t = sim::stage_input(p.catalog, inst, Stage::tables);
    const auto gt_t = sim::stage_gt(inst, in_t);
    auto model_t = sim::make_generator(p.catalog, cfg, inst, Stage::tables);
    sim::SimSurrogate sur_t(gt_t, cfg.surrogate_accuracy_tables);
    sim::OracleResponder resp_t(gt_t);
    auto factory = [&](const std::vector<std::string>& tables) {
      linker::ColumnStage cs;
      cs.input = sim::stage_input(p.catalog, inst, Stage::columns, tables);
      const auto gt_c = sim::stage_gt(inst, cs.input);
      col_model.emplace(cs.input.entities, p.catalog.vocabulary(), gt_c, cfg,
                        sim::stage_seed(inst, Stage::columns));
      col_surrogate.emplace(gt_c, cfg.surrogate_accuracy_columns);
      col_responder.emplace(gt_c);
      cs.model = &*col_model;
      cs.detector = col_det;
      cs.surrogate = &*col_surrogate;
      cs.responder = &*col_responder;
      return cs;
    };
    if (!col_det) {
      linker::JointOutcome j;
      j.tables = linker::run_session(in_t, model_t, table_det, {policy, seed}, &sur_t, &resp_t);
      j.status = j.tables.status;
      j.predicted_tables = j.tables.linking;
      j.abstain_reason = j.tables.abstain_reason;
      return j;
    }
    return linker::link_tables_then_columns(in_t, model_t, table_det, policy, seed, factory,
                                            &sur_t, &resp_t);
  }
};

InstanceRecord base_record(const sim::SimInstance& inst, const PolicyRun& run, const char* stage) {
  InstanceRecord r;
  r.instance = inst.id;
  r.policy = linker::policy_name(run.policy);
  r.detector = detector_kind_name(run.detector);
  r.stage = stage;
  return r;
}

void fill_metrics(InstanceRecord& r, bool em) {
  const auto m = set_metrics(r.gt, r.predicted);
  r.em = em ? 1.0 : 0.0;
  r.precision = m.precision;
  r.recall = m.recall;
}

}  // namespace

StageMetrics summarize(const std::vector<InstanceRecord>& records) {
  StageMetrics m;
  std::vector<std::uint8_t> abstained, correct;
  std::vector<double> em_all, em_ans, prec, rec;
  double questions = 0.0;
  for (const auto& r : records) {
    if (r.status == "error") {
      ++m.errors;
      continue;
    }
    abstained.push_back(r.abstained ? 1 : 0);
    correct.push_back(r.would_be_correct ? 1 : 0);
    em_all.push_back(r.abstained ? 0.0 : r.em);
    questions += static_cast<double>(r.questions);
    if (!r.abstained) {
      em_ans.push_back(r.em);
      prec.push_back(r.precision);
      rec.push_back(r.recall);
    }
  }
  m.n = abstained.size();
  m.answered = em_ans.size();
  if (m.n == 0) return m;
  const auto tf = tar_far(abstained, correct);
  const std::size_t n_abs = m.n - m.answered;
  m.em = mean_estimate(em_all);
  m.em_answered = mean_estimate(em_ans);
  m.precision = mean_estimate(prec);
  m.recall = mean_estimate(rec);
  m.abstention = proportion(n_abs, m.n);
  m.tar = proportion(static_cast<std::size_t>(std::llround(tf.tar * static_cast<double>(m.n))), m.n);
  m.far = proportion(static_cast<std::size_t>(std::llround(tf.far * static_cast<double>(m.n))), m.n);
  m.mean_questions = questions / static_cast<double>(m.n);
  return m;
}

EvalReport evaluate_policies(const Pipeline& pipeline, const EvalConfig& config) {
  EvalReport rep;
  rep.pipeline = pipeline.config;
  rep.eval = config;
  if (config.joint && !pipeline.columns.model) {
    throw PreconditionError("evaluate_policies: joint evaluation needs a column-stage model");
  }
  const auto& tm = *pipeline.tables.model;
  if (!tm.calibrated()) throw PreconditionError("evaluate_policies: table model is not calibrated");
  for (const auto& r : tm.selection->ranking) {
    if (rep.layer_auc.size() <= r.layer) rep.layer_auc.resize(r.layer + 1, 0.0);
    rep.layer_auc[r.layer] = r.auc;
  }
  rep.selected_layers = tm.selection->chosen();
  rep.detector_rp = detect_tokens(pipeline.tables.model, pipeline.tables.test, {},
                                  linker::Aggregator::random_permutation, config.seed);
  rep.detector_half = detect_tokens(pipeline.tables.model, pipeline.tables.test, {},
                                    linker::Aggregator::half_vote, config.seed);

  const auto instances = sim::generate_instances(pipeline.config.sim, pipeline.catalog,
                                                 config.instances, config.first_index);
  // Would-be-correct flags: the same generation with detection switched off.
  std::vector<bool> correct_t(instances.size()), correct_j(instances.size());
  std::vector<std::uint64_t> seeds(instances.size());
  {
    linker::NeverDetector never;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      seeds[i] = derive_seed(config.seed, {static_cast<std::uint64_t>(config.first_index + i)});
      InstanceRunner runner{pipeline, instances[i], seeds[i], {}, {}, {}};
      const auto j = runner.run(Policy::none, never, config.joint ? &never : nullptr);
      correct_t[i] = same_set(j.predicted_tables, instances[i].gt_tables);
      correct_j[i] = correct_t[i] && same_set(j.predicted_columns, instances[i].gt_columns);
    }
  }

  for (const auto& run : config.runs) {
    auto det_t = make_detector(run.detector, pipeline.tables.model);
    std::shared_ptr<linker::Detector> det_c;
    if (config.joint) det_c = make_detector(run.detector, pipeline.columns.model);
    std::vector<InstanceRecord> rt, rj;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& inst = instances[i];
      auto t = base_record(inst, run, "tables");
      auto jr = base_record(inst, run, "joint");
      t.gt = inst.gt_tables;
      jr.gt = inst.gt_columns;
      t.would_be_correct = correct_t[i];
      jr.would_be_correct = correct_j[i];
      try {
        InstanceRunner runner{pipeline, inst, seeds[i], {}, {}, {}};
        const auto j = runner.run(run.policy, *det_t, det_c.get());
        const auto& so = j.tables;
        t.status = linker::status_name(so.status);
        t.abstained = so.status == linker::Status::abstained;
        t.predicted = so.linking;
        t.fires = so.fires.size();
        t.questions = so.transcript.size();
        t.corrections = so.corrections;
        t.note = so.abstain_reason;
        fill_metrics(t, same_set(t.predicted, t.gt));

        jr.status = linker::status_name(j.status);
        jr.abstained = j.status == linker::Status::abstained;
        jr.predicted = j.predicted_columns;
        if (jr.abstained && j.columns) jr.predicted = j.columns->linking;
        jr.fires = t.fires + (j.columns ? j.columns->fires.size() : 0);
        jr.questions = t.questions + (j.columns ? j.columns->transcript.size() : 0);
        jr.corrections = t.corrections + (j.columns ? j.columns->corrections : 0);
        jr.note = j.abstain_reason;
        fill_metrics(jr, !jr.abstained && same_set(j.predicted_tables, inst.gt_tables) &&
                             same_set(jr.predicted, jr.gt));
      } catch (const std::exception& e) {
        t.status = jr.status = "error";
        t.note = jr.note = e.what();
      }
      rt.push_back(t);
      rj.push_back(jr);
    }
    PolicyReport pr;
    pr.run = run;
    pr.tables = summarize(rt);
    if (config.joint) pr.joint = summarize(rj);
    rep.policies.push_back(pr);
    rep.records.insert(rep.records.end(), rt.begin(), rt.end());
    if (config.joint) rep.records.insert(rep.records.end(), rj.begin(), rj.end());
  }
  return rep;
}

}  // namespace linkguard::eval
