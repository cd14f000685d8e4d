// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "linkguard/bpp/classifier.hpp"
#include "linkguard/core/trace.hpp"

namespace linkguard::bpp {

// Mann-Whitney statistic: P(score+ > score-) with ties counted as 1/2.
// Throws PreconditionError when either class is missing.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// p_branch for every row of `data`.
std::vector<double> branch_scores(const LayerClassifier& classifier, const core::LayerView& data);

struct RankedLayer {
  std::size_t layer = 0;
  double auc = 0.0;
  bool operator==(const RankedLayer&) const = default;
};

struct LayerSelection {
  std::vector<RankedLayer> ranking;  // all layers, AUC descending, ties by lower index
  std::size_t k = 0;

  std::vector<std::size_t> chosen() const;
  bool operator==(const LayerSelection&) const = default;
};

// Ranks layers by calibration AUC. aucs[j] belongs to layer j.
LayerSelection select_top_k_layers(std::span<const double> aucs, std::size_t k);

// classifiers[j] is scored on calibration.layer(classifiers[j].layer_index).
LayerSelection select_top_k_layers(std::span<const LayerClassifier> classifiers,
                                   const core::BranchDataset& calibration, std::size_t k);

void write_selection_block(std::ostream& out, const LayerSelection& selection);
LayerSelection read_selection_block(std::istream& in);

}  // namespace linkguard::bpp
