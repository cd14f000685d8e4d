// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "linkguard/conformal/prediction_set.hpp"

namespace linkguard::aggregate {

// Labels whose vote share strictly exceeds theta.
PredictionSet majority_vote(std::span<const PredictionSet> sets, double theta);

// Labels present in at least half of the sets (count >= k/2).
PredictionSet half_vote(std::span<const PredictionSet> sets);

// floor(sum |C_i| / (k theta)).
std::size_t theorem2_bound(std::span<const PredictionSet> sets, double theta);
bool theorem2_holds(std::span<const PredictionSet> sets, double theta);

// Intersection over prefixes i = 1..k of the sets {c : count_i(c) >= i/2},
// visiting sets in `order` (a permutation of 0..k-1).
PredictionSet permutation_aggregate(std::span<const PredictionSet> sets,
                                    std::span<const std::size_t> order);

// Uniformly random order drawn with std::shuffle on mt19937_64(seed).
std::vector<std::size_t> random_order(std::size_t k, std::uint64_t seed);

struct AggregationResult {
  std::vector<PredictionSet> sets;
  double theta = 0.5;
  std::uint64_t seed = 0;
  std::string rng = "mt19937_64";
  std::vector<std::size_t> permutation;
  PredictionSet c_theta;
  PredictionSet c_half;
  PredictionSet c_pi;
  bool is_branching = false;
};

AggregationResult random_permutation_aggregate(std::span<const PredictionSet> sets,
                                               std::uint64_t seed, double theta = 0.5);

// True iff label 1 survives the random permutation aggregate.
bool decide_branching(std::span<const PredictionSet> sets, std::uint64_t seed);

}  // namespace linkguard::aggregate
