// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/eval/metrics.hpp"

#include <cmath>
#include <set>

#include "linkguard/common/error.hpp"

namespace linkguard::eval {

SetMetrics set_metrics(std::span<const std::string> gt, std::span<const std::string> predicted) {
  if (gt.empty()) throw PreconditionError("set_metrics: ground truth is empty");
  const std::set<std::string> g(gt.begin(), gt.end());
  const std::set<std::string> p(predicted.begin(), predicted.end());
  std::size_t inter = 0;
  for (const auto& x : p) inter += g.contains(x) ? 1 : 0;
  SetMetrics m;
  m.em = g == p ? 1.0 : 0.0;
  m.precision = p.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(p.size());
  m.recall = static_cast<double>(inter) / static_cast<double>(g.size());
  return m;
}

CoverageEar coverage_ear(std::span<const std::uint8_t> predicted,
                         std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw PreconditionError("coverage_ear: length mismatch");
  CoverageEar r;
  r.tokens = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++r.branches;
      r.detected += predicted[i] ? 1 : 0;
    } else if (predicted[i]) {
      ++r.extra;
    }
  }
  if (r.branches > 0) {
    r.coverage = static_cast<double>(r.detected) / static_cast<double>(r.branches);
  }
  r.ear = r.tokens ? static_cast<double>(r.extra) / static_cast<double>(r.tokens) : 0.0;
  return r;
}

TarFar tar_far(std::span<const std::uint8_t> abstained, std::span<const std::uint8_t> correct) {
  if (abstained.size() != correct.size()) throw PreconditionError("tar_far: length mismatch");
  if (abstained.empty()) return {};
  std::size_t t = 0, f = 0;
  for (std::size_t i = 0; i < abstained.size(); ++i) {
    if (!abstained[i]) continue;
    (correct[i] ? f : t) += 1;
  }
  const double n = static_cast<double>(abstained.size());
  return {static_cast<double>(t) / n, static_cast<double>(f) / n};
}

Estimate proportion(std::size_t hits, std::size_t n) {
  Estimate e;
  e.n = n;
  if (n == 0) return e;
  e.value = static_cast<double>(hits) / static_cast<double>(n);
  e.half_width = 3.0 * std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
  return e;
}

Estimate mean_estimate(std::span<const double> values) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  double s = 0.0;
  for (double v : values) s += v;
  e.value = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.value) * (v - e.value);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    e.half_width = 3.0 * sd / std::sqrt(static_cast<double>(values.size()));
  }
  return e;
}

}  // namespace linkguard::eval
