// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/aggregate/aggregate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::aggregate {

namespace {

std::array<std::size_t, 2> counts(std::span<const PredictionSet> sets) {
  std::array<std::size_t, 2> c{0, 0};
  for (auto s : sets) {
    for (int y = 0; y < 2; ++y) c[y] += s.contains(y) ? 1 : 0;
  }
  return c;
}

}  // namespace

PredictionSet majority_vote(std::span<const PredictionSet> sets, double theta) {
  if (sets.empty()) throw PreconditionError("majority_vote: no prediction sets");
  if (!(theta >= 0.0 && theta < 1.0)) throw PreconditionError("majority_vote: theta outside [0,1)");
  const auto c = counts(sets);
  const double k = static_cast<double>(sets.size());
  PredictionSet out;
  for (int y = 0; y < 2; ++y) {
    if (static_cast<double>(c[y]) / k > theta) out.insert(y);
  }
  return out;
}

PredictionSet half_vote(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw PreconditionError("half_vote: no prediction sets");
  const auto c = counts(sets);
  PredictionSet out;
  for (int y = 0; y < 2; ++y) {
    if (2 * c[y] >= sets.size()) out.insert(y);
  }
  return out;
}

std::size_t theorem2_bound(std::span<const PredictionSet> sets, double theta) {
  if (sets.empty()) throw PreconditionError("theorem2_bound: no prediction sets");
  if (!(theta > 0.0)) throw PreconditionError("theorem2_bound: theta must be positive");
  std::size_t total = 0;
  for (auto s : sets) total += static_cast<std::size_t>(s.size());
  const double bound = static_cast<double>(total) / (static_cast<double>(sets.size()) * theta);
  return static_cast<std::size_t>(std::floor(bound + 1e-9));
}

bool theorem2_holds(std::span<const PredictionSet> sets, double theta) {
  return static_cast<std::size_t>(majority_vote(sets, theta).size()) <=
         theorem2_bound(sets, theta);
}

PredictionSet permutation_aggregate(std::span<const PredictionSet> sets,
                                    std::span<const std::size_t> order) {
  if (sets.empty()) throw PreconditionError("permutation_aggregate: no prediction sets");
  if (order.size() != sets.size()) {
    throw PreconditionError("permutation_aggregate: order length differs from set count");
  }
  PredictionSet result = PredictionSet::full();
  std::array<std::size_t, 2> c{0, 0};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    if (idx >= sets.size()) throw PreconditionError("permutation_aggregate: index out of range");
    for (int y = 0; y < 2; ++y) c[y] += sets[idx].contains(y) ? 1 : 0;
    PredictionSet prefix;
    for (int y = 0; y < 2; ++y) {
      if (2 * c[y] >= i + 1) prefix.insert(y);
    }
    result = result.intersect(prefix);
  }
  return result;
}

std::vector<std::size_t> random_order(std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

AggregationResult random_permutation_aggregate(std::span<const PredictionSet> sets,
                                               std::uint64_t seed, double theta) {
  AggregationResult r;
  r.sets.assign(sets.begin(), sets.end());
  r.theta = theta;
  r.seed = seed;
  r.rng = kRngName;
  r.permutation = random_order(sets.size(), seed);
  r.c_pi = permutation_aggregate(sets, r.permutation);
  r.c_theta = majority_vote(sets, theta);
  r.c_half = half_vote(sets);
  r.is_branching = r.c_pi.contains(1);
  return r;
}

bool decide_branching(std::span<const PredictionSet> sets, std::uint64_t seed) {
  const auto order = random_order(sets.size(), seed);
  return permutation_aggregate(sets, order).contains(1);
}

}  // namespace linkguard::aggregate
