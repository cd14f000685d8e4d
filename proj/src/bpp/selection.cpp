// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/bpp/selection.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "linkguard/common/error.hpp"
#include "linkguard/common/flat_io.hpp"

namespace linkguard::bpp {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw PreconditionError("auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Tie-averaged ranks (1-based).
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        pos_rank_sum += rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw PreconditionError("auc: both classes must be present");
  const double p = static_cast<double>(pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

std::vector<double> branch_scores(const LayerClassifier& classifier, const core::LayerView& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = predict_score(classifier, data.row(i)).p_branch;
  }
  return out;
}

std::vector<std::size_t> LayerSelection::chosen() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k && i < ranking.size(); ++i) out.push_back(ranking[i].layer);
  return out;
}

LayerSelection select_top_k_layers(std::span<const double> aucs, std::size_t k) {
  if (k < 1 || k > aucs.size()) {
    throw PreconditionError("select_top_k_layers: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(aucs.size()) + "]");
  }
  LayerSelection sel;
  sel.k = k;
  for (std::size_t j = 0; j < aucs.size(); ++j) sel.ranking.push_back({j, aucs[j]});
  std::stable_sort(sel.ranking.begin(), sel.ranking.end(),
                   [](const RankedLayer& a, const RankedLayer& b) { return a.auc > b.auc; });
  return sel;
}

LayerSelection select_top_k_layers(std::span<const LayerClassifier> classifiers,
                                   const core::BranchDataset& calibration, std::size_t k) {
  std::vector<double> aucs;
  aucs.reserve(classifiers.size());
  for (const auto& c : classifiers) {
    auto view = calibration.layer(c.layer_index);
    aucs.push_back(auc(branch_scores(c, view), view.labels));
  }
  auto sel = select_top_k_layers(aucs, k);
  for (auto& r : sel.ranking) r.layer = classifiers[r.layer].layer_index;
  return sel;
}

// selection <k> <count> then <layer> <auc> pairs.
void write_selection_block(std::ostream& out, const LayerSelection& selection) {
  out << "selection " << selection.k << ' ' << selection.ranking.size();
  for (const auto& r : selection.ranking) out << ' ' << r.layer << ' ' << format_real(r.auc);
  out << '\n';
}

LayerSelection read_selection_block(std::istream& stream) {
  FlatReader in(stream);
  in.expect("selection");
  LayerSelection sel;
  sel.k = in.count();
  const auto n = in.count();
  for (std::uint64_t i = 0; i < n; ++i) {
    RankedLayer r;
    r.layer = in.count();
    r.auc = in.real();
    sel.ranking.push_back(r);
  }
  if (sel.k < 1 || sel.k > sel.ranking.size()) throw FormatError("model file: selection k out of range");
  return sel;
}

}  // namespace linkguard::bpp
