// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/eval/report.hpp"

#include <cstdio>
#include <ostream>

namespace linkguard::eval {

Json to_json(const Estimate& e) {
  return Json{{"value", e.value}, {"half_width", e.half_width}, {"n", e.n}};
}

Json to_json(const CoverageEar& m) {
  Json j{{"coverage", nullptr},       {"ear", m.ear},
         {"tokens", m.tokens},        {"branches", m.branches},
         {"detected", m.detected},    {"extra", m.extra}};
  if (m.coverage) j["coverage"] = *m.coverage;
  return j;
}

Json to_json(const StageMetrics& m) {
  return Json{{"n", m.n},
              {"answered", m.answered},
              {"errors", m.errors},
              {"em", to_json(m.em)},
              {"em_answered", to_json(m.em_answered)},
              {"precision", to_json(m.precision)},
              {"recall", to_json(m.recall)},
              {"abstention", to_json(m.abstention)},
              {"tar", to_json(m.tar)},
              {"far", to_json(m.far)},
              {"mean_questions", m.mean_questions}};
}

Json to_json(const InstanceRecord& r) {
  return Json{{"instance", r.instance},
              {"policy", r.policy},
              {"detector", r.detector},
              {"stage", r.stage},
              {"status", r.status},
              {"abstained", r.abstained},
              {"would_be_correct", r.would_be_correct},
              {"em", r.em},
              {"precision", r.precision},
              {"recall", r.recall},
              {"predicted", r.predicted},
              {"gt", r.gt},
              {"fires", r.fires},
              {"questions", r.questions},
              {"corrections", r.corrections},
              {"note", r.note}};
}

Json summary_json(const EvalReport& report) {
  Json policies = Json::array();
  for (const auto& p : report.policies) {
    Json j{{"policy", linker::policy_name(p.run.policy)},
           {"detector", detector_kind_name(p.run.detector)},
           {"tables", to_json(p.tables)}};
    if (p.joint) j["joint"] = to_json(*p.joint);
    policies.push_back(std::move(j));
  }
  return Json{{"config",
               {{"sim", to_json(report.pipeline.sim)},
                {"hyperparams", to_json(report.pipeline.hp)},
                {"calibration", to_json(report.pipeline.calibration)},
                {"pipeline", to_json(report.pipeline)},
                {"eval", to_json(report.eval)}}},
              {"detector",
               {{"layer_auc", report.layer_auc},
                {"selected_layers", report.selected_layers},
                {"random_permutation", to_json(report.detector_rp)},
                {"half_vote", to_json(report.detector_half)}}},
              {"policies", policies}};
}

Json to_json(const TheoremReport& r) {
  Json regimes = Json::array();
  for (const auto& g : r.regimes) {
    Json th = Json::array();
    for (const auto& t : g.thetas) {
      th.push_back({{"theta", t.theta}, {"miss_rate", t.miss_rate}, {"bound", t.bound}});
    }
    regimes.push_back({{"regime", dependence_name(g.regime)},
                       {"trials", g.trials},
                       {"layer_miss_rate", g.layer_miss_rate},
                       {"majority", th},
                       {"pi_miss_rate", g.pi_miss_rate},
                       {"half_miss_rate", g.half_miss_rate},
                       {"subset_violations", g.subset_violations},
                       {"ear_violations", g.ear_violations}});
  }
  std::string why1, why3;
  const bool ok1 = r.theorem1_ok(&why1);
  const bool ok3 = r.theorem3_ok(&why3);
  return Json{{"config", to_json(r.config)},
              {"regimes", regimes},
              {"theorem1_ok", ok1},
              {"theorem2_trials", r.theorem2_trials},
              {"theorem2_violations", r.theorem2_violations},
              {"theorem3_ok", ok3},
              {"hoeffding_bound", r.hoeffding_bound}};
}

Json to_json(const std::vector<CoveragePoint>& curve) {
  Json out = Json::array();
  for (const auto& p : curve) {
    out.push_back({{"alpha", p.alpha},
                   {"coverage", p.coverage},
                   {"guaranteed", p.guaranteed},
                   {"half_width", p.half_width},
                   {"mean_set_size", p.mean_set_size}});
  }
  return out;
}

void write_records(std::ostream& out, const std::vector<InstanceRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

namespace {

void row(std::ostream& out, const std::string& policy, const std::string& detector,
         const char* stage, const StageMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-12s %-7s %6zu %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n",
                policy.c_str(), detector.c_str(), stage, m.n, m.em.value, m.em_answered.value,
                m.precision.value, m.recall.value, m.abstention.value, m.tar.value, m.far.value);
  out << buf;
}

}  // namespace

void write_summary_table(std::ostream& out, const EvalReport& report) {
  out << "policy     detector     stage        n      EM  EM_ans    prec     rec     abs     TAR     FAR\n";
  for (const auto& p : report.policies) {
    const auto pol = linker::policy_name(p.run.policy);
    const auto det = detector_kind_name(p.run.detector);
    row(out, pol, det, "tables", p.tables);
    if (p.joint) row(out, pol, det, "joint", *p.joint);
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "aggregator,k,alpha,coverage,ear,tokens,branches\n";
  for (const auto& p : points) {
    out << p.aggregator << ',' << p.k << ',' << p.alpha << ','
        << (p.metrics.coverage ? std::to_string(*p.metrics.coverage) : std::string()) << ','
        << p.metrics.ear << ',' << p.metrics.tokens << ',' << p.metrics.branches << '\n';
  }
}

void write_coverage_csv(std::ostream& out, const std::vector<CoveragePoint>& curve) {
  out << "alpha,coverage,guaranteed,half_width,mean_set_size\n";
  for (const auto& p : curve) {
    out << p.alpha << ',' << p.coverage << ',' << p.guaranteed << ',' << p.half_width << ','
        << p.mean_set_size << '\n';
  }
}

}  // namespace linkguard::eval
