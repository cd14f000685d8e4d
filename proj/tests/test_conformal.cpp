// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "linkguard/common/error.hpp"
#include "linkguard/conformal/calibrator.hpp"

using namespace linkguard;
using namespace linkguard::conformal;

namespace {

// Classifier on 1-D input whose p_branch is sigmoid(2x): built by hand so
// w2 * relu(w1 x) reproduces the logit difference for any sign of x.
bpp::LayerClassifier logistic_1d() {
  bpp::LayerClassifier c;
  c.params = bpp::MlpParams::zeros(1, 2);
  c.params.w1(0, 0) = 1.0;
  c.params.w1(1, 0) = -1.0;
  c.params.w2(1, 0) = 1.0;
  c.params.w2(1, 1) = -1.0;
  c.params.w2(0, 0) = -1.0;
  c.params.w2(0, 1) = 1.0;
  return c;
}

struct Sample {
  std::vector<float> x;
  std::vector<std::uint8_t> y;
  core::LayerView view() const { return {x, y, 1}; }
};

// y ~ Bernoulli(0.3); x | y ~ N(y ? 1 : -1, 1).
Sample draw(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(0.3);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = b(rng);
    s.y.push_back(y ? 1 : 0);
    s.x.push_back((y ? 1.0f : -1.0f) + g(rng));
  }
  return s;
}

}  // namespace

TEST_CASE("quantile index examples") {
  std::vector<double> nine{0.9, 0.1, 0.5, 0.3, 0.2, 0.8, 0.7, 0.4, 0.6};
  CHECK(quantile_threshold(nine, 0.1) == 0.9);
  std::vector<double> nineteen;
  for (int i = 1; i <= 19; ++i) nineteen.push_back(i / 100.0);
  CHECK(quantile_threshold(nineteen, 0.1) == 0.18);
  CHECK(std::isinf(quantile_threshold(nine, 0.01)));
  CHECK_THROWS_AS(quantile_threshold(std::vector<double>{}, 0.1), PreconditionError);
  CHECK_THROWS_AS(quantile_threshold(nine, 1.0), PreconditionError);
}

TEST_CASE("pi value examples") {
  std::vector<double> s{0.1, 0.3, 0.5};
  CHECK(pi_value(s, 0.2) == 0.75);
  CHECK(pi_value(s, 0.9) == 0.25);
  CHECK(pi_value(s, 0.0) == 1.0);
}

TEST_CASE("set from threshold examples") {
  bpp::ClassProbs p{0.05, 0.95};
  CHECK(set_from_threshold(p, 0.1) == PredictionSet::of(1));
  CHECK(set_from_threshold(p, kInf) == PredictionSet::full());
  bpp::ClassProbs half{0.5, 0.5};
  CHECK(set_from_threshold(half, 0.6) == PredictionSet::full());
}

TEST_CASE("weighted threshold examples") {
  std::vector<double> w{0.3, 0.3, 0.3};
  std::vector<double> s{0.1, 0.2, 0.9};
  CHECK(weighted_threshold(w, s, 0.1) == 0.9);
  std::vector<double> w2{1.0 / 3.0, 1.0 / 3.0};
  std::vector<double> s2{0.1, 0.2};
  CHECK(std::isinf(weighted_threshold(w2, s2, 0.1)));
  // Tied scores enter the mass together.
  std::vector<double> w3{0.45, 0.45, 0.05};
  std::vector<double> s3{0.4, 0.2, 0.2};
  CHECK(weighted_threshold(w3, s3, 0.5) == 0.2);
  CHECK(weighted_threshold(w3, s3, 0.4) == 0.4);
}

TEST_CASE("equal weights reduce to the unweighted K-subset quantile") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng() % 30;
    std::vector<double> s(k);
    for (auto& v : s) v = u(rng);
    std::vector<double> w(k, 1.0 / static_cast<double>(k + 1));
    for (double a : {0.05, 0.1, 0.2, 0.5}) {
      CHECK(weighted_threshold(w, s, a) == quantile_threshold(s, a));
    }
  }
}

TEST_CASE("quantile rule and pi-value rule agree") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u;
  std::uniform_int_distribution<int> lvl(0, 10);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<double> s(n);
    for (auto& v : s) v = trial % 2 ? u(rng) : lvl(rng) / 10.0;
    const double alpha = 0.02 + 0.5 * u(rng);
    const double eps = quantile_threshold(s, alpha);
    for (int j = 0; j < 5; ++j) {
      const double r = j < 2 ? s[rng() % n] : u(rng);
      CHECK((r <= eps) == (pi_value(s, r) > alpha));
    }
  }
}

TEST_CASE("calibrate on the classifier") {
  auto c = logistic_1d();
  auto cal = draw(9, 3);
  auto calib = calibrate_exchangeable(c, cal.view(), 0.1);
  CHECK(calib.size() == 9);
  CHECK(calib.threshold == *std::max_element(calib.scores.begin(), calib.scores.end()));
  for (double s : calib.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  Sample empty;
  CHECK_THROWS_AS(calibrate_exchangeable(c, empty.view(), 0.1), PreconditionError);
}

TEST_CASE("empirical marginal coverage, exchangeable and weighted") {
  auto c = logistic_1d();
  auto cal = draw(2000, 21);
  auto test = draw(4000, 22);
  for (double alpha : {0.05, 0.1, 0.2}) {
    auto ex = calibrate_exchangeable(c, cal.view(), alpha);
    auto wt = calibrate_weighted(c, cal.view(), alpha);
    CHECK(wt.k_neighbors == 200);
    CHECK(wt.tau > 0.0);
    std::size_t hit_ex = 0, hit_wt = 0;
    for (std::size_t i = 0; i < test.y.size(); ++i) {
      auto x = test.view().row(i);
      hit_ex += predict_set(ex, c, x).contains(test.y[i]) ? 1 : 0;
      hit_wt += predict_set(wt, c, x).contains(test.y[i]) ? 1 : 0;
    }
    const double n = static_cast<double>(test.y.size());
    const double floor = 1.0 - alpha - 3.0 * std::sqrt(alpha * (1.0 - alpha) / n);
    CHECK(hit_ex / n >= floor);
    CHECK(hit_wt / n >= floor);
  }
}

TEST_CASE("prediction sets grow as alpha shrinks") {
  auto c = logistic_1d();
  auto cal = draw(500, 31);
  auto test = draw(500, 32);
  const std::vector<double> grid{0.02, 0.05, 0.1, 0.2, 0.3};
  std::vector<ConformalCalibrator> cals;
  for (double a : grid) cals.push_back(calibrate_exchangeable(c, cal.view(), a));
  for (std::size_t j = 1; j < grid.size(); ++j) CHECK(cals[j - 1].threshold >= cals[j].threshold);
  for (std::size_t i = 0; i < test.y.size(); ++i) {
    for (std::size_t j = 1; j < grid.size(); ++j) {
      auto wide = predict_set(cals[j - 1], c, test.view().row(i));
      auto narrow = predict_set(cals[j], c, test.view().row(i));
      CHECK(narrow.subset_of(wide));
    }
  }
}

TEST_CASE("weighted calibration preconditions") {
  auto c = logistic_1d();
  auto cal = draw(10, 1);
  CHECK_THROWS_AS(calibrate_weighted(c, cal.view(), 0.1, 11), PreconditionError);
  CHECK_THROWS_AS(calibrate_weighted(c, cal.view(), 0.1, 5, -1.0), PreconditionError);
  auto two = calibrate_weighted(c, cal.view(), 0.1, 2, 1e9);
  std::vector<float> x{0.0f};
  CHECK(std::isinf(local_threshold(two, x)));
  CHECK(predict_set(two, c, x) == PredictionSet::full());
}

TEST_CASE("model file round trip") {
  auto c = logistic_1d();
  auto cal = draw(50, 2);
  BppModel m;
  m.classifiers = {c, c};
  m.classifiers[1].layer_index = 1;
  m.calibrators = {calibrate_exchangeable(c, cal.view(), 0.1),
                   calibrate_weighted(c, cal.view(), 0.2, 7)};
  std::vector<double> aucs{0.4, 0.8};
  m.selection = bpp::select_top_k_layers(aucs, 1);
  std::stringstream ss;
  write_model(ss, m);
  auto back = read_model(ss);
  CHECK(back == m);

  std::stringstream wrong("linkguard-bpp 2\n");
  CHECK_THROWS_AS(read_model(wrong), FormatError);
  std::stringstream garbage("hello");
  CHECK_THROWS_AS(read_model(garbage), FormatError);
}
