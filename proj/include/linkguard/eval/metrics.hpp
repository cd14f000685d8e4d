// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace linkguard::eval {

struct SetMetrics {
  double em = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// precision is 0 for an empty prediction. Requires non-empty gt.
SetMetrics set_metrics(std::span<const std::string> gt, std::span<const std::string> predicted);

struct CoverageEar {
  std::optional<double> coverage;  // absent without true branches
  double ear = 0.0;
  std::size_t tokens = 0;
  std::size_t branches = 0;
  std::size_t detected = 0;
  std::size_t extra = 0;
};

CoverageEar coverage_ear(std::span<const std::uint8_t> predicted,
                         std::span<const std::uint8_t> truth);

struct TarFar {
  double tar = 0.0;
  double far = 0.0;
};

// tar = #(abstained and not correct)/n, far = #(abstained and correct)/n.
TarFar tar_far(std::span<const std::uint8_t> abstained, std::span<const std::uint8_t> correct);

// Point estimate with a 3-sigma normal-approximation half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
};

Estimate proportion(std::size_t hits, std::size_t n);
Estimate mean_estimate(std::span<const double> values);

}  // namespace linkguard::eval
