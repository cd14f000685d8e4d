// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "linkguard/common/error.hpp"
#include "linkguard/eval/config.hpp"
#include "linkguard/eval/harness.hpp"
#include "linkguard/eval/metrics.hpp"
#include "linkguard/eval/report.hpp"
#include "linkguard/eval/theorems.hpp"

using namespace linkguard;
using namespace linkguard::eval;
using linker::Policy;

namespace {

PipelineConfig small_pipeline() {
  PipelineConfig c;
  c.train_instances = 400;
  c.test_instances = 300;
  c.hp.hidden_width = 16;
  c.hp.epochs = 100;
  return c;
}

const Pipeline& pipeline() {
  static const Pipeline p = build_pipeline(small_pipeline());
  return p;
}

}  // namespace

TEST_CASE("set metrics") {
  std::vector<std::string> gt{"a", "b"}, pred{"a", "c"};
  auto m = set_metrics(gt, pred);
  CHECK(m.em == 0.0);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  std::vector<std::string> same{"b", "a"};
  CHECK(set_metrics(gt, same).em == 1.0);
  auto empty = set_metrics(gt, std::vector<std::string>{});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK_THROWS_AS(set_metrics(std::vector<std::string>{}, pred), PreconditionError);
}

TEST_CASE("coverage and extra alarm rate") {
  std::vector<std::uint8_t> pred{1, 0, 1, 0}, truth{1, 0, 0, 0};
  auto m = coverage_ear(pred, truth);
  REQUIRE(m.coverage);
  CHECK(*m.coverage == 1.0);
  CHECK(m.ear == 0.25);
  std::vector<std::uint8_t> none{0, 0, 0, 0};
  CHECK(!coverage_ear(pred, none).coverage);
  CHECK(coverage_ear(none, truth).coverage == 0.0);
  CHECK_THROWS_AS(coverage_ear(pred, std::vector<std::uint8_t>{1}), PreconditionError);
}

TEST_CASE("TAR and FAR partition abstention") {
  std::vector<std::uint8_t> ab{1, 1, 0, 0}, ok{0, 1, 1, 0};
  auto r = tar_far(ab, ok);
  CHECK(r.tar == 0.25);
  CHECK(r.far == 0.25);

  Rng rng(3);
  std::bernoulli_distribution coin(0.4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::uint8_t> a(37), c(37);
    std::size_t n_ab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = coin(rng);
      c[i] = coin(rng);
      n_ab += a[i];
    }
    auto t = tar_far(a, c);
    CHECK(t.tar + t.far == doctest::Approx(static_cast<double>(n_ab) / 37.0));
  }
}

TEST_CASE("proportion estimate") {
  auto e = proportion(3, 4);
  CHECK(e.value == 0.75);
  CHECK(e.half_width == doctest::Approx(3.0 * std::sqrt(0.75 * 0.25 / 4.0)));
  CHECK(proportion(0, 0).value == 0.0);
}

TEST_CASE("theorem checks on a reduced Monte Carlo run") {
  MonteCarloConfig c;
  c.trials = 20000;
  c.adversarial_trials = 20000;
  auto r = validate_theorems(c);
  std::string why;
  CHECK_MESSAGE(r.theorem1_ok(&why), why);
  CHECK_MESSAGE(r.theorem3_ok(&why), why);
  CHECK(r.theorem2_trials == 20000);
  CHECK(r.theorem2_violations == 0);
  CHECK(r.hoeffding_bound == doctest::Approx(std::exp(-1.6)));
  REQUIRE(r.regimes.size() == 3);
  REQUIRE(r.regimes[0].regime == Dependence::independent);
  for (const auto& t : r.regimes[0].thetas) {
    if (t.theta == 0.5) CHECK(t.miss_rate <= std::exp(-1.6) + 0.02);
  }
  for (const auto& g : r.regimes) {
    CHECK(g.layer_miss_rate == doctest::Approx(0.1).epsilon(0.1));
    CHECK(g.subset_violations == 0);
    CHECK(g.ear_violations == 0);
    // The smaller set misses at least as often.
    CHECK(g.pi_miss_rate >= g.half_miss_rate);
    for (const auto& t : g.thetas) CHECK(t.bound == doctest::Approx(0.1 / (1.0 - t.theta)));
  }
  // Reproducible from the seed.
  auto again = validate_theorems(c);
  CHECK(again.regimes[0].pi_miss_rate == r.regimes[0].pi_miss_rate);
}

TEST_CASE("split conformal coverage on exchangeable data") {
  CoverageSweepConfig c;
  auto curve = coverage_sweep(c);
  REQUIRE(curve.size() == 3);
  for (const auto& p : curve) {
    INFO("alpha " << p.alpha);
    CHECK(p.coverage >= 1.0 - p.alpha - 0.015);
    CHECK(p.guaranteed == doctest::Approx(1.0 - p.alpha));
  }
  // Larger alpha, smaller sets.
  CHECK(curve[0].mean_set_size >= curve[1].mean_set_size);
  CHECK(curve[1].mean_set_size >= curve[2].mean_set_size);
}

TEST_CASE("config round trip and rejection") {
  RunConfig r;
  r.pipeline.sim.tables = 12;
  r.pipeline.sim.separability.assign(8, 1.5);
  r.pipeline.hp.epochs = 7;
  r.pipeline.calibration.alpha = 0.2;
  r.pipeline.train_columns = false;
  r.eval.instances = 9;
  r.eval.runs = {{Policy::surrogate, DetectorKind::oracle}};
  r.theorems.thetas = {0.4};
  r.coverage.n_cal = 10;
  auto text = to_json(r).dump();
  auto back = parse_run_config(text);
  CHECK(back.pipeline == r.pipeline);
  CHECK(back.eval == r.eval);
  CHECK(to_json(back).dump() == text);

  CHECK_THROWS_WITH_AS(parse_run_config(R"({"sim":{"bogus":1}})"),
                       doctest::Contains("sim.bogus"), PreconditionError);
  CHECK_THROWS_AS(parse_run_config(R"({"nope":{}})"), PreconditionError);
  CHECK_THROWS_AS(parse_run_config(R"({"sim":{"tables":"ten"}})"), PreconditionError);
  CHECK_THROWS_AS(parse_run_config(R"({"eval":{"runs":[{"policy":"x","detector":"mbpp"}]}})"),
                  PreconditionError);
  CHECK_THROWS_AS(parse_run_config("{"), PreconditionError);
  // Partial sections keep defaults.
  auto partial = parse_run_config(R"({"sim":{"tables":4}})");
  CHECK(partial.pipeline.sim.tables == 4);
  CHECK(partial.pipeline.sim.p_err == sim::SimConfig{}.p_err);
}

TEST_CASE("pipeline detector metrics") {
  const auto& p = pipeline();
  REQUIRE(p.tables.model);
  REQUIRE(p.columns.model);
  CHECK(p.tables.test.size() > 0);
  const auto& sel = p.tables.model->selection->ranking;
  // Zero-shift layers never rank first.
  CHECK(sel.front().layer >= 2);

  auto rp = detect_tokens(p.tables.model, p.tables.test, {}, linker::Aggregator::random_permutation,
                          5);
  auto half = detect_tokens(p.tables.model, p.tables.test, {}, linker::Aggregator::half_vote, 5);
  // C^pi is contained in C_half token by token.
  CHECK(rp.ear <= half.ear);
  CHECK(rp.detected <= half.detected);

  auto sweep = k_sweep(p.tables.model, p.tables.test, {1, 3, 5}, 5);
  CHECK(sweep.size() == 6);
  CHECK_THROWS_AS(k_sweep(p.tables.model, p.tables.test, {99}, 5), PreconditionError);
  // k = 1: both aggregators reduce to the single layer.
  CHECK(sweep[0].metrics.extra == sweep[1].metrics.extra);
}

TEST_CASE("perfect detector: abstention is exactly the error set") {
  EvalConfig e;
  e.instances = 300;
  e.runs = {{Policy::abstain, DetectorKind::oracle}, {Policy::human, DetectorKind::oracle}};
  auto rep = evaluate_policies(pipeline(), e);
  const auto* ab = rep.find(Policy::abstain, DetectorKind::oracle);
  REQUIRE(ab);
  CHECK(ab->tables.errors == 0);
  CHECK(ab->tables.em_answered.value == 1.0);
  CHECK(ab->tables.far.value == 0.0);
  CHECK(ab->tables.tar.value ==
        doctest::Approx(1.0 - static_cast<double>(
                                  std::count_if(rep.records.begin(), rep.records.end(),
                                                [](const InstanceRecord& r) {
                                                  return r.policy == "abstain" &&
                                                         r.stage == "tables" &&
                                                         r.would_be_correct;
                                                })) /
                                  300.0));
  for (const auto& r : rep.records) {
    if (r.policy == "abstain" && r.stage == "tables") CHECK(r.abstained == !r.would_be_correct);
  }
  const auto* hu = rep.find(Policy::human, DetectorKind::oracle);
  REQUIRE(hu);
  CHECK(hu->tables.em.value == 1.0);
  REQUIRE(hu->joint);
  CHECK(hu->joint->em.value == 1.0);
  CHECK(hu->joint->abstention.value == 0.0);
  for (const auto& pr : rep.policies) {
    for (const auto* m : {&pr.tables, pr.joint ? &*pr.joint : nullptr}) {
      if (!m) continue;
      CHECK(m->tar.value + m->far.value == doctest::Approx(m->abstention.value));
    }
  }
}

TEST_CASE("joint abstention is the union of stage abstentions") {
  const auto& p = pipeline();
  EvalConfig e;
  e.instances = 400;
  e.runs = {{Policy::abstain, DetectorKind::oracle}};
  auto rep = evaluate_policies(p, e);
  const auto& sim = p.config.sim;
  auto insts = sim::generate_instances(sim, p.catalog, e.instances, e.first_index);
  std::size_t a = 0, b = 0, both = 0;
  for (const auto& inst : insts) {
    const bool ta = !inst.planted.empty();
    auto cols = sim::produce_trace(p.catalog, sim, inst, linker::Stage::columns);
    const bool cb = std::count(cols.labels.begin(), cols.labels.end(), 1) > 0;
    a += ta;
    b += cb;
    both += ta && cb;
  }
  const auto* pr = rep.find(Policy::abstain, DetectorKind::oracle);
  REQUIRE(pr->joint);
  const double n = static_cast<double>(e.instances);
  CHECK(pr->tables.abstention.value == doctest::Approx(a / n));
  CHECK(pr->joint->abstention.value == doctest::Approx((a + b - both) / n));
  REQUIRE(both > 0);
  CHECK(pr->joint->abstention.value < (a + b) / n);
}

TEST_CASE("evaluation is reproducible") {
  EvalConfig e;
  e.instances = 60;
  auto r1 = evaluate_policies(pipeline(), e);
  auto r2 = evaluate_policies(pipeline(), e);
  CHECK(summary_json(r1).dump() == summary_json(r2).dump());
  std::ostringstream a, b;
  write_records(a, r1.records);
  write_records(b, r2.records);
  CHECK(a.str() == b.str());
  // One line per instance, run and stage.
  const auto lines = a.str();
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 60 * 4 * 2);
  std::ostringstream table;
  write_summary_table(table, r1);
  CHECK(table.str().find("surrogate") != std::string::npos);
}
