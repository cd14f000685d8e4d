// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "linkguard/aggregate/aggregate.hpp"
#include "linkguard/common/error.hpp"

using namespace linkguard;
using namespace linkguard::aggregate;

namespace {

const PredictionSet E = PredictionSet::empty();
const PredictionSet Z = PredictionSet::of(0);
const PredictionSet O = PredictionSet::of(1);
const PredictionSet F = PredictionSet::full();

// Hand-written reference: enumerate prefixes with explicit counting.
PredictionSet reference_alg1(const std::vector<PredictionSet>& sets,
                             const std::vector<std::size_t>& order) {
  bool keep0 = true, keep1 = true;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    int n0 = 0, n1 = 0;
    for (std::size_t t = 0; t < i; ++t) {
      n0 += sets[order[t]].contains(0);
      n1 += sets[order[t]].contains(1);
    }
    keep0 = keep0 && 2 * n0 >= static_cast<int>(i);
    keep1 = keep1 && 2 * n1 >= static_cast<int>(i);
  }
  PredictionSet out;
  if (keep0) out.insert(0);
  if (keep1) out.insert(1);
  return out;
}

}  // namespace

TEST_CASE("prediction set basics") {
  CHECK(F.size() == 2);
  CHECK(E.is_empty());
  CHECK(Z.subset_of(F));
  CHECK(!F.subset_of(O));
  CHECK(Z.unite(O) == F);
  CHECK(F.to_string() == "{0,1}");
}

TEST_CASE("majority vote examples") {
  std::vector<PredictionSet> c{O, O, F};
  CHECK(majority_vote(c, 0.5) == O);
  std::vector<PredictionSet> u{Z, E, O};
  CHECK(majority_vote(u, 0.0) == F);
  std::vector<PredictionSet> e{E, E};
  CHECK(majority_vote(e, 0.3) == E);
  CHECK_THROWS_AS(majority_vote(std::vector<PredictionSet>{}, 0.5), PreconditionError);
  // Exactly half is not a strict majority but is kept by the >= k/2 rule.
  std::vector<PredictionSet> tie{O, Z};
  CHECK(majority_vote(tie, 0.5) == E);
  CHECK(half_vote(tie) == F);
}

TEST_CASE("theorem 2 bound examples") {
  std::vector<PredictionSet> s{O, F, Z, O, O};
  CHECK(theorem2_bound(s, 0.5) == 2);
  CHECK(theorem2_holds(s, 0.5));
  std::vector<PredictionSet> all(5, F);
  CHECK(theorem2_bound(all, 0.5) == 4);
  std::vector<PredictionSet> one{O};
  CHECK(theorem2_bound(one, 0.5) == 2);
  CHECK_THROWS_AS(theorem2_bound(one, 0.0), PreconditionError);
}

TEST_CASE("algorithm 1 hand example") {
  std::vector<PredictionSet> c{Z, F, O};
  std::vector<std::size_t> order{0, 1, 2};
  CHECK(permutation_aggregate(c, order) == Z);
  std::vector<PredictionSet> same(4, O);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(random_permutation_aggregate(same, seed).c_pi == O);
  }
  for (auto s : {E, Z, O, F}) {
    std::vector<PredictionSet> single{s};
    CHECK(random_permutation_aggregate(single, 3).c_pi == s);
  }
}

TEST_CASE("decide branching") {
  std::vector<PredictionSet> ones(5, O);
  std::vector<PredictionSet> zeros(5, Z);
  CHECK(decide_branching(ones, 1));
  CHECK(!decide_branching(zeros, 1));
  std::vector<PredictionSet> c{Z, F, O};
  std::vector<std::size_t> order{0, 1, 2};
  CHECK(!permutation_aggregate(c, order).contains(1));
}

TEST_CASE("permutation aggregate matches reference and is dominated by half vote") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t k = 1 + rng() % 9;
    std::vector<PredictionSet> sets(k);
    for (auto& s : sets) s = PredictionSet::from_mask(static_cast<std::uint8_t>(rng() % 4));
    const std::uint64_t seed = rng();
    auto r = random_permutation_aggregate(sets, seed);
    CHECK(r.permutation.size() == k);
    CHECK(r.c_pi == reference_alg1(sets, r.permutation));
    CHECK(r.c_pi.subset_of(r.c_half));
    CHECK(r.is_branching == r.c_pi.contains(1));
    CHECK(r.c_pi == random_permutation_aggregate(sets, seed).c_pi);
    for (double theta : {0.1, 0.3, 0.5, 0.7}) CHECK(theorem2_holds(sets, theta));
  }
}
