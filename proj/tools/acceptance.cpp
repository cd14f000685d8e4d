// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

#include "linkguard/bpp/classifier.hpp"
#include "linkguard/bpp/selection.hpp"
#include "linkguard/eval/harness.hpp"
#include "linkguard/eval/report.hpp"
#include "linkguard/eval/theorems.hpp"
#include "linkguard/service/http.hpp"
#include "linkguard/service/session_service.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

using namespace linkguard;
using linker::Policy;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += !pass;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void coverage_criterion() {
  const auto t0 = Clock::now();
  eval::CoverageSweepConfig c;
  const auto curve = eval::coverage_sweep(c);
  const double secs = seconds_since(t0);
  bool ok = secs < 60.0;
  std::ostringstream d;
  for (const auto& p : curve) {
    ok = ok && p.coverage >= 1.0 - p.alpha - 0.015;
    d << "alpha=" << p.alpha << " coverage=" << fmt("%.4f", p.coverage) << "; ";
  }
  d << "runtime " << fmt("%.1f", secs) << "s";
  report("eq1-coverage", ok, d.str());
}

void theorem_criteria() {
  eval::MonteCarloConfig c;
  std::cerr << "monte carlo: " << c.trials << " trials per regime\n";
  const auto r = eval::validate_theorems(c);

  std::string why;
  std::ostringstream d1;
  double worst = -1.0;
  for (const auto& g : r.regimes) {
    for (const auto& t : g.thetas) worst = std::max(worst, t.miss_rate - t.bound);
  }
  const bool ok1 = r.theorem1_ok(&why);
  double hoeffding_miss = 0.0;
  for (const auto& g : r.regimes) {
    for (const auto& t : g.thetas) {
      if (g.regime == eval::Dependence::independent && t.theta == 0.5) hoeffding_miss = t.miss_rate;
    }
  }
  d1 << "worst miss - alpha/(1-theta) = " << fmt("%+.4f", worst) << " (slack 0.02); independent"
     << " theta=0.5 miss " << fmt("%.4f", hoeffding_miss) << " vs e^-1.6+0.02 = "
     << fmt("%.4f", r.hoeffding_bound + 0.02);
  if (!ok1) d1 << "; " << why;
  report("theorem1", ok1, d1.str());

  report("theorem2", r.theorem2_violations == 0 && r.theorem2_trials >= 100000,
         std::to_string(r.theorem2_violations) + " violations over " +
             std::to_string(r.theorem2_trials) + " families");

  why.clear();
  const bool ok3 = r.theorem3_ok(&why);
  std::ostringstream d3;
  for (const auto& g : r.regimes) {
    d3 << eval::dependence_name(g.regime) << " pi-miss=" << fmt("%.4f", g.pi_miss_rate)
       << " subset-viol=" << g.subset_violations << " ear-viol=" << g.ear_violations << "; ";
  }
  d3 << "hoeffding " << fmt("%.4f", r.hoeffding_bound);
  if (!ok3) d3 << "; " << why;
  report("theorem3", ok3, d3.str());
}

void detector_criterion(const eval::EvalReport& rep) {
  double min_auc = 1.0;
  for (auto j : rep.selected_layers) min_auc = std::min(min_auc, rep.layer_auc.at(j));
  const double cov = rep.detector_rp.coverage.value_or(0.0);
  std::ostringstream d;
  d << "min selected-layer AUC " << fmt("%.4f", min_auc) << " over " << rep.selected_layers.size()
    << " layers; planted-branch coverage " << fmt("%.4f", cov) << " (EAR "
    << fmt("%.4f", rep.detector_rp.ear) << ", " << rep.detector_rp.branches << " branches)";
  report("detector-quality", min_auc >= 0.95 && cov >= 0.88, d.str());
}

void oracle_criterion(const eval::EvalReport& rep) {
  const auto* hu = rep.find(Policy::human, eval::DetectorKind::mbpp_oracle);
  const auto* ab = rep.find(Policy::abstain, eval::DetectorKind::mbpp);
  std::ostringstream d;
  bool ok = hu && ab && hu->joint;
  if (ok) {
    ok = hu->tables.errors == 0 && hu->tables.em.value == 1.0 &&
         hu->tables.abstention.value == 0.0 && hu->joint->errors == 0 &&
         hu->joint->em.value == 1.0 && hu->joint->abstention.value == 0.0 &&
         ab->tables.em_answered.value >= 0.8 && ab->joint && ab->joint->em_answered.value >= 0.8;
    d << "n=" << hu->tables.n << " human EM tables/joint " << fmt("%.4f", hu->tables.em.value)
      << "/" << fmt("%.4f", hu->joint->em.value) << " abstention "
      << fmt("%.4f", hu->joint->abstention.value) << "; abstain EM_answered tables/joint "
      << fmt("%.4f", ab->tables.em_answered.value) << "/"
      << fmt("%.4f", ab->joint ? ab->joint->em_answered.value : 0.0);
  }
  report("oracle-human", ok, d.str());
}

void figure6_criterion() {
  eval::PipelineConfig c;
  c.sim.layers = 10;
  c.sim.separability = {4.0, 4.0, 4.0, 4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  c.train_columns = false;
  std::cerr << "figure 6 pipeline\n";
  const auto p = eval::build_pipeline(c);
  const auto sweep = eval::k_sweep(p.tables.model, p.tables.test, {1, 3, 5, 7, 9}, 1);
  double lo[2] = {1.0, 1.0}, hi[2] = {0.0, 0.0};
  std::ostringstream d;
  for (const auto& s : sweep) {
    const int h = s.aggregator == "half_vote";
    lo[h] = std::min(lo[h], s.metrics.ear);
    hi[h] = std::max(hi[h], s.metrics.ear);
    if (!h) d << "k=" << s.k << ":" << fmt("%.4f", s.metrics.ear) << " ";
  }
  const double rp = hi[0] - lo[0], half = hi[1] - lo[1];
  d << "| RP range " << fmt("%.4f", rp) << ", half-vote range " << fmt("%.4f", half);
  report("figure6-ear", rp <= 0.02 && half > rp, d.str());
}

void surrogate_criterion(const eval::Pipeline& p) {
  std::size_t good = 0;
  std::ostringstream d;
  double far_a = 0, far_s = 0, em_a = 0, em_s = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    eval::EvalConfig e;
    e.instances = 1000;
    e.seed = seed;
    e.runs = {{Policy::abstain, eval::DetectorKind::mbpp},
              {Policy::surrogate, eval::DetectorKind::mbpp}};
    const auto rep = eval::evaluate_policies(p, e);
    const auto* a = rep.find(Policy::abstain, eval::DetectorKind::mbpp);
    const auto* s = rep.find(Policy::surrogate, eval::DetectorKind::mbpp);
    bool ok = true;
    for (auto [x, y] : {std::pair{&a->tables, &s->tables}, std::pair{&*a->joint, &*s->joint}}) {
      ok = ok && y->far.value < x->far.value && y->em_answered.value <= x->em_answered.value;
    }
    good += ok;
    far_a += a->joint->far.value;
    far_s += s->joint->far.value;
    em_a += a->joint->em_answered.value;
    em_s += s->joint->em_answered.value;
    std::cerr << "surrogate seed " << seed << (ok ? " ok" : " reversed") << '\n';
  }
  d << good << "/10 seeds; mean joint FAR " << fmt("%.4f", far_a / 10) << " -> "
    << fmt("%.4f", far_s / 10) << ", EM_answered " << fmt("%.4f", em_a / 10) << " -> "
    << fmt("%.4f", em_s / 10);
  report("surrogate-far", good == 10, d.str());
}

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

void replay_criterion(const eval::Pipeline& p) {
  const service::ServiceContext ctx{p.catalog, p.config.sim, p.tables.model, p.columns.model, 1};
  service::SessionManager m(ctx);
  service::HttpService http(m);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.listen(); });
  httplib::Client client("127.0.0.1", port);

  std::size_t sessions = 0, identical = 0, questions = 0;
  for (std::size_t idx = 0; idx < 200; ++idx) {
    for (auto stage : {linker::Stage::tables, linker::Stage::columns}) {
      for (const char* kind : {"mbpp", "mbpp+oracle"}) {
        const bool over_http = idx % 10 == 0;
        service::SessionRequest req;
        req.instance = idx;
        req.stage = stage;
        req.detector.kind = kind;
        auto parts = service::build_session_parts(ctx, req);
        RandomResponder human(derive_seed(99, {idx, static_cast<std::uint64_t>(stage)}));
        const auto expected = linker::run_policy_human(parts.input, *parts.model, *parts.detector,
                                                       human, parts.seed);
        questions += expected.transcript.size();

        const service::Json body{
            {"instance", {{"index", idx}, {"stage", linker::stage_name(stage)}}},
            {"policy", "human"},
            {"detector", {{"kind", kind}}}};
        auto call = [&](const std::string& path, const service::Json* payload) {
          if (!over_http) return service::Json();
          auto res = payload ? client.Post(path, payload->dump(), "application/json")
                             : client.Get(path);
          return res ? service::Json::parse(res->body) : service::Json();
        };
        service::Json st = over_http ? call("/sessions", &body) : m.create(body).body;
        const auto id = st.value("session_id", std::string());
        bool ok = !id.empty();
        for (const auto& ex : expected.transcript) {
          if (!ok || st["status"] != "awaiting_answer" ||
              st["pending_question"]["question_id"] != ex.question.id) {
            ok = false;
            break;
          }
          const service::Json a{{"question_id", ex.question.id}, {"answer", ex.answer}};
          st = over_http ? call("/sessions/" + id + "/answer", &a) : m.answer(id, a).body;
        }
        if (ok) {
          const auto res = over_http ? call("/sessions/" + id + "/result", nullptr) : m.result(id).body;
          ok = res.contains("outcome") && res["outcome"].dump() == service::to_json(expected).dump();
        }
        ++sessions;
        identical += ok;
      }
    }
  }
  http.stop();
  server.join();
  report("replay-equivalence", identical == sessions,
         std::to_string(identical) + "/" + std::to_string(sessions) +
             " sessions byte-identical (" + std::to_string(questions) + " answers replayed)");
}

double gradient_check() {
  Rng rng(2026);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim(1, 6), width(1, 8), rows(1, 10);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto d = static_cast<std::size_t>(dim(rng));
    const auto h = static_cast<std::size_t>(width(rng));
    const auto n = rows(rng);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<std::uint8_t> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<std::uint8_t>(rng() & 1);
    const std::array<double, 2> w{0.3 + std::abs(g(rng)), 0.3 + std::abs(g(rng))};
    Eigen::VectorXd flat(
        static_cast<Eigen::Index>(bpp::MlpParams::zeros(d, h).parameter_count()));
    for (auto& v : flat) v = g(rng);
    const auto params = bpp::MlpParams::unflatten(flat, d, h);
    const auto analytic = bpp::loss_and_gradient(params, x, y, w).gradient.flatten();
    const double step = 1e-6;
    for (Eigen::Index k = 0; k < flat.size(); ++k) {
      auto plus = flat, minus = flat;
      plus[k] += step;
      minus[k] -= step;
      const double numeric = (bpp::weighted_loss(bpp::MlpParams::unflatten(plus, d, h), x, y, w) -
                              bpp::weighted_loss(bpp::MlpParams::unflatten(minus, d, h), x, y, w)) /
                             (2.0 * step);
      const double scale = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic[k] - numeric) / scale);
    }
  }
  return worst;
}

std::size_t auc_mismatches() {
  Rng rng(7);
  std::size_t bad = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    // Coarse scores so ties occur.
    for (auto& v : s) v = std::uniform_int_distribution<int>(0, 5)(rng) / 5.0;
    for (auto& v : y) v = static_cast<std::uint8_t>(rng() & 1);
    y[0] = 1;
    y[1] = 0;
    double pairs = 0, wins = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    bad += std::abs(bpp::auc(s, y) - wins / pairs) > 1e-12;
  }
  return bad;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  coverage_criterion();
  theorem_criteria();

  std::cerr << "default pipeline\n";
  const auto pipeline = eval::build_pipeline(eval::PipelineConfig{});
  {
    eval::EvalConfig e;
    e.instances = 2000;
    e.runs = {{Policy::abstain, eval::DetectorKind::mbpp},
              {Policy::human, eval::DetectorKind::mbpp_oracle}};
    std::cerr << "end-to-end run over " << e.instances << " instances\n";
    const auto rep = eval::evaluate_policies(pipeline, e);
    detector_criterion(rep);
    oracle_criterion(rep);
  }
  figure6_criterion();
  surrogate_criterion(pipeline);
  replay_criterion(pipeline);

  const double grad = gradient_check();
  const auto auc_bad = auc_mismatches();
  report("bpp-oracles", grad < 1e-4 && auc_bad == 0,
         "max relative gradient error " + fmt("%.2e", grad) + "; AUC brute-force mismatches " +
             std::to_string(auc_bad) + "/1000");

  std::cerr << "total " << fmt("%.0f", seconds_since(start)) << "s, " << failures
            << " failing\n";
  return failures == 0 ? 0 : 1;
}
