// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/eval/theorems.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "linkguard/aggregate/aggregate.hpp"
#include "linkguard/bpp/classifier.hpp"
#include "linkguard/common/seed.hpp"
#include "linkguard/conformal/calibrator.hpp"

namespace linkguard::eval {

std::string dependence_name(Dependence d) {
  switch (d) {
    case Dependence::independent: return "independent";
    case Dependence::identical: return "identical";
    case Dependence::mixture: return "mixture";
  }
  return "independent";
}

namespace {

// A per-layer set around true label y: y is missed with probability alpha,
// the other label is admitted with probability `spurious`.
PredictionSet draw_set(int y, double alpha, double spurious, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PredictionSet s;
  if (u(rng) >= alpha) s.insert(y);
  if (u(rng) < spurious) s.insert(1 - y);
  return s;
}

RegimeResult run_regime(Dependence regime, const MonteCarloConfig& c) {
  Rng rng(derive_seed(c.seed, {static_cast<std::uint64_t>(regime)}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RegimeResult r;
  r.regime = regime;
  r.trials = c.trials;
  std::vector<std::size_t> theta_miss(c.thetas.size(), 0);
  std::size_t layer_miss = 0, pi_miss = 0, half_miss = 0;
  std::vector<PredictionSet> sets(c.k);
  for (std::size_t t = 0; t < c.trials; ++t) {
    const int y = u(rng) < 0.5 ? 1 : 0;
    const PredictionSet shared = draw_set(y, c.alpha, c.spurious, rng);
    for (auto& s : sets) {
      switch (regime) {
        case Dependence::independent: s = draw_set(y, c.alpha, c.spurious, rng); break;
        case Dependence::identical: s = shared; break;
        case Dependence::mixture:
          s = u(rng) < c.mixture_share ? shared : draw_set(y, c.alpha, c.spurious, rng);
          break;
      }
      layer_miss += s.contains(y) ? 0 : 1;
    }
    for (std::size_t i = 0; i < c.thetas.size(); ++i) {
      theta_miss[i] += aggregate::majority_vote(sets, c.thetas[i]).contains(y) ? 0 : 1;
    }
    const auto order = aggregate::random_order(c.k, rng());
    const auto pi = aggregate::permutation_aggregate(sets, order);
    const auto half = aggregate::half_vote(sets);
    pi_miss += pi.contains(y) ? 0 : 1;
    half_miss += half.contains(y) ? 0 : 1;
    r.subset_violations += pi.subset_of(half) ? 0 : 1;
    // Token-level extra abstention: a flag on a non-branch token.
    if (y == 0 && pi.contains(1) && !half.contains(1)) ++r.ear_violations;
  }
  const double n = static_cast<double>(c.trials);
  r.layer_miss_rate = static_cast<double>(layer_miss) / (n * static_cast<double>(c.k));
  for (std::size_t i = 0; i < c.thetas.size(); ++i) {
    r.thetas.push_back({c.thetas[i], static_cast<double>(theta_miss[i]) / n,
                        c.alpha / (1.0 - c.thetas[i])});
  }
  r.pi_miss_rate = static_cast<double>(pi_miss) / n;
  r.half_miss_rate = static_cast<double>(half_miss) / n;
  return r;
}

}  // namespace

bool TheoremReport::theorem1_ok(std::string* why) const {
  std::ostringstream msg;
  bool ok = true;
  for (const auto& r : regimes) {
    for (const auto& t : r.thetas) {
      if (t.miss_rate > t.bound + 0.02) {
        ok = false;
        msg << dependence_name(r.regime) << " theta=" << t.theta << " miss=" << t.miss_rate
            << " > " << t.bound + 0.02 << "; ";
      }
      // Independent layers at theta = 1/2 also obey the Hoeffding tail.
      if (r.regime == Dependence::independent && t.theta == 0.5 &&
          t.miss_rate > hoeffding_bound + 0.02) {
        ok = false;
        msg << "independent theta=0.5 miss=" << t.miss_rate << " > hoeffding "
            << hoeffding_bound + 0.02 << "; ";
      }
    }
  }
  if (why) *why = msg.str();
  return ok;
}

bool TheoremReport::theorem3_ok(std::string* why) const {
  std::ostringstream msg;
  bool ok = true;
  for (const auto& r : regimes) {
    const double bound =
        (r.regime == Dependence::identical ? config.alpha : 2.0 * config.alpha) + 0.02;
    if (r.pi_miss_rate > bound) {
      ok = false;
      msg << dependence_name(r.regime) << " pi miss=" << r.pi_miss_rate << " > " << bound << "; ";
    }
    if (r.subset_violations || r.ear_violations) {
      ok = false;
      msg << dependence_name(r.regime) << " dominance violations=" << r.subset_violations << "/"
          << r.ear_violations << "; ";
    }
  }
  if (why) *why = msg.str();
  return ok;
}

TheoremReport validate_theorems(const MonteCarloConfig& config) {
  TheoremReport rep;
  rep.config = config;
  for (auto d : {Dependence::independent, Dependence::identical, Dependence::mixture}) {
    rep.regimes.push_back(run_regime(d, config));
  }
  rep.hoeffding_bound = std::exp(-2.0 * static_cast<double>(config.k) * (0.5 - config.alpha) *
                                 (0.5 - config.alpha));

  // Theorem 2 over set families skewed towards large sets and small theta.
  Rng rng(derive_seed(config.seed, {0x7E2ULL}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rep.theorem2_trials = config.adversarial_trials;
  for (std::size_t t = 0; t < config.adversarial_trials; ++t) {
    const std::size_t k = 1 + rng() % 12;
    const double p_full = u(rng);
    std::vector<PredictionSet> sets(k);
    for (auto& s : sets) {
      s = u(rng) < p_full ? PredictionSet::full()
                          : PredictionSet::from_mask(static_cast<std::uint8_t>(rng() % 4));
    }
    // Include thetas that sit exactly on vote fractions.
    double theta = u(rng) < 0.5 ? std::max(1e-3, u(rng) * 0.999)
                                : static_cast<double>(1 + rng() % k) / static_cast<double>(k + 1);
    if (!aggregate::theorem2_holds(sets, theta)) ++rep.theorem2_violations;
  }
  return rep;
}

std::vector<CoveragePoint> coverage_sweep(const CoverageSweepConfig& c) {
  const double shift = c.separation / std::sqrt(static_cast<double>(c.dim));
  auto sample = [&](std::size_t n, std::uint64_t stream, std::vector<float>& x,
                    std::vector<std::uint8_t>& y) {
    Rng rng(derive_seed(c.seed, {stream}));
    std::bernoulli_distribution pos(c.positive_rate);
    std::normal_distribution<double> g(0.0, 1.0);
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const bool b = pos(rng);
      y.push_back(b ? 1 : 0);
      for (std::size_t d = 0; d < c.dim; ++d) x.push_back(static_cast<float>((b ? shift : 0.0) + g(rng)));
    }
  };
  std::vector<float> xt, xc, xs;
  std::vector<std::uint8_t> yt, yc, ys;
  sample(c.n_train, 1, xt, yt);
  sample(c.n_cal, 2, xc, yc);
  sample(c.n_test, 3, xs, ys);
  bpp::Hyperparams hp;
  hp.hidden_width = 16;
  hp.epochs = 200;
  hp.seed = c.seed;
  const auto clf = bpp::train_layer_classifier({xt, yt, c.dim}, 0, hp);
  const core::LayerView cal{xc, yc, c.dim};
  const core::LayerView test{xs, ys, c.dim};
  std::vector<CoveragePoint> out;
  for (double a : c.alphas) {
    const auto calib = conformal::calibrate_exchangeable(clf, cal, a);
    std::size_t hit = 0, size = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto s = conformal::predict_set(calib, clf, test.row(i));
      hit += s.contains(test.labels[i]) ? 1 : 0;
      size += static_cast<std::size_t>(s.size());
    }
    const double n = static_cast<double>(test.size());
    CoveragePoint p;
    p.alpha = a;
    p.coverage = static_cast<double>(hit) / n;
    p.guaranteed = 1.0 - a;
    p.half_width = 3.0 * std::sqrt(p.coverage * (1.0 - p.coverage) / n);
    p.mean_set_size = static_cast<double>(size) / n;
    out.push_back(p);
  }
  return out;
}

}  // namespace linkguard::eval
