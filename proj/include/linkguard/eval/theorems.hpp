// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace linkguard::eval {

enum class Dependence { independent, identical, mixture };
std::string dependence_name(Dependence d);

struct MonteCarloConfig {
  std::size_t trials = 100000;
  std::size_t k = 5;
  double alpha = 0.1;
  std::vector<double> thetas{0.3, 0.5, 0.7};
  // Chance that a layer also admits the wrong label.
  double spurious = 0.3;
  // Mixture regime: chance that a layer copies the shared set.
  double mixture_share = 0.5;
  std::size_t adversarial_trials = 100000;
  std::uint64_t seed = 1;
};

struct ThetaResult {
  double theta = 0.0;
  double miss_rate = 0.0;  // C^theta misses the true label
  double bound = 0.0;      // alpha / (1 - theta)
};

struct RegimeResult {
  Dependence regime = Dependence::independent;
  std::size_t trials = 0;
  double layer_miss_rate = 0.0;  // empirical per-layer miss
  std::vector<ThetaResult> thetas;
  double pi_miss_rate = 0.0;  // C^pi misses the true label
  double half_miss_rate = 0.0;
  std::size_t subset_violations = 0;  // C^pi not inside C_half
  std::size_t ear_violations = 0;     // C^pi flags a non-branch that C_half does not
};

struct TheoremReport {
  MonteCarloConfig config;
  std::vector<RegimeResult> regimes;
  std::size_t theorem2_trials = 0;
  std::size_t theorem2_violations = 0;
  double hoeffding_bound = 0.0;  // exp(-2 k (1/2 - alpha)^2)

  // Checks with a 0.02 Monte Carlo slack; failures are listed in `why`.
  bool theorem1_ok(std::string* why = nullptr) const;
  bool theorem3_ok(std::string* why = nullptr) const;
};

TheoremReport validate_theorems(const MonteCarloConfig& config);

struct CoveragePoint {
  double alpha = 0.0;
  double coverage = 0.0;
  double guaranteed = 0.0;  // 1 - alpha
  double half_width = 0.0;
  double mean_set_size = 0.0;
};

struct CoverageSweepConfig {
  std::vector<double> alphas{0.05, 0.1, 0.2};
  std::size_t n_train = 1000;
  std::size_t n_cal = 2000;
  std::size_t n_test = 5000;
  std::size_t dim = 8;
  double separation = 2.0;
  double positive_rate = 0.3;
  std::uint64_t seed = 1;
};

// Marginal coverage of split conformal sets on exchangeable Gaussian data.
std::vector<CoveragePoint> coverage_sweep(const CoverageSweepConfig& config);

}  // namespace linkguard::eval
