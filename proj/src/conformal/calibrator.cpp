// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/conformal/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "linkguard/common/error.hpp"
#include "linkguard/common/flat_io.hpp"

namespace linkguard::conformal {

namespace {

// Absorbs rounding in sums such as 0.3 + 0.3 + 0.3 against 0.9.
constexpr double kMassSlack = 1e-12;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0,1)");
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

std::string mode_name(Mode mode) { return mode == Mode::weighted ? "weighted" : "exchangeable"; }

Mode parse_mode(const std::string& name) {
  if (name == "exchangeable") return Mode::exchangeable;
  if (name == "weighted") return Mode::weighted;
  throw PreconditionError("unknown calibration mode '" + name +
                          "' (expected exchangeable or weighted)");
}

double quantile_threshold(std::span<const double> scores, double alpha) {
  check_alpha(alpha);
  if (scores.empty()) throw PreconditionError("quantile_threshold: empty calibration scores");
  const double n = static_cast<double>(scores.size());
  const auto q = static_cast<std::size_t>(std::ceil((n + 1.0) * (1.0 - alpha) - 1e-9));
  if (q > scores.size()) return kInf;
  if (q == 0) return -kInf;
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1),
                   sorted.end());
  return sorted[q - 1];
}

double pi_value(std::span<const double> scores, double r) {
  if (scores.empty()) throw PreconditionError("pi_value: empty calibration scores");
  const auto ge = std::count_if(scores.begin(), scores.end(), [r](double s) { return s >= r; });
  return static_cast<double>(ge + 1) / static_cast<double>(scores.size() + 1);
}

std::vector<double> nonconformity_scores(const bpp::LayerClassifier& classifier,
                                         const core::LayerView& calibration) {
  std::vector<double> out(calibration.size());
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    out[i] = bpp::predict_score(classifier, calibration.row(i))
                 .nonconformity(calibration.labels[i] ? 1 : 0);
  }
  return out;
}

ConformalCalibrator calibrate_exchangeable(const bpp::LayerClassifier& classifier,
                                           const core::LayerView& calibration, double alpha) {
  check_alpha(alpha);
  if (calibration.size() == 0) throw PreconditionError("calibrate: empty calibration set");
  ConformalCalibrator c;
  c.mode = Mode::exchangeable;
  c.alpha = alpha;
  c.scores = nonconformity_scores(classifier, calibration);
  c.threshold = quantile_threshold(c.scores, alpha);
  return c;
}

double default_tau(const core::LayerView& calibration) {
  const std::size_t n = calibration.size();
  const std::size_t m = std::min<std::size_t>(n, 256);
  if (m < 2) return 1.0;
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = i * n / m;
  std::vector<double> d2;
  d2.reserve(m * (m - 1) / 2);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      d2.push_back(squared_distance(calibration.row(rows[a]), calibration.row(rows[b])));
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  // Degenerate calibration (all vectors equal) still needs a positive width.
  return *mid > 0.0 ? *mid : 1.0;
}

ConformalCalibrator calibrate_weighted(const bpp::LayerClassifier& classifier,
                                       const core::LayerView& calibration, double alpha,
                                       std::size_t k, double tau) {
  check_alpha(alpha);
  if (calibration.size() == 0) throw PreconditionError("calibrate: empty calibration set");
  if (k == 0) k = std::min<std::size_t>(200, calibration.size());
  if (k > calibration.size()) {
    throw PreconditionError("calibrate_weighted: K=" + std::to_string(k) +
                            " exceeds calibration size " + std::to_string(calibration.size()));
  }
  if (tau == 0.0) tau = default_tau(calibration);
  if (!(tau > 0.0)) throw PreconditionError("calibrate_weighted: tau must be positive");
  ConformalCalibrator c;
  c.mode = Mode::weighted;
  c.alpha = alpha;
  c.scores = nonconformity_scores(classifier, calibration);
  c.threshold = quantile_threshold(c.scores, alpha);
  c.k_neighbors = k;
  c.tau = tau;
  c.dim = calibration.dim;
  c.vectors.assign(calibration.values.begin(), calibration.values.end());
  return c;
}

double weighted_threshold(std::span<const double> weights, std::span<const double> scores,
                          double alpha) {
  check_alpha(alpha);
  if (weights.size() != scores.size()) throw PreconditionError("weighted_threshold: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const double target = 1.0 - alpha - kMassSlack;
  double mass = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    // Closed comparison: a tie group enters the cumulative mass together.
    while (j < order.size() && scores[order[j]] == scores[order[i]]) mass += weights[order[j++]];
    if (mass >= target) return scores[order[i]];
    i = j;
  }
  return kInf;
}

PredictionSet set_from_threshold(const bpp::ClassProbs& probs, double epsilon) {
  PredictionSet s;
  for (int y = 0; y < 2; ++y) {
    if (probs.nonconformity(y) <= epsilon) s.insert(y);
  }
  return s;
}

PredictionSet predict_set_exchangeable(const ConformalCalibrator& calibrator,
                                       const bpp::LayerClassifier& classifier,
                                       std::span<const float> hidden) {
  return set_from_threshold(bpp::predict_score(classifier, hidden), calibrator.threshold);
}

double local_threshold(const ConformalCalibrator& c, std::span<const float> hidden) {
  if (c.mode != Mode::weighted) throw PreconditionError("local_threshold: calibrator is not weighted");
  if (hidden.size() != c.dim) throw PreconditionError("local_threshold: dimension mismatch");
  if (c.k_neighbors == 0 || c.k_neighbors > c.size()) {
    throw PreconditionError("local_threshold: K outside [1, calibration size]");
  }
  if (!(c.tau > 0.0)) throw PreconditionError("local_threshold: tau must be positive");

  std::vector<std::pair<double, std::size_t>> dist(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) dist[i] = {squared_distance(hidden, c.vector(i)), i};
  auto kth = dist.begin() + static_cast<std::ptrdiff_t>(c.k_neighbors);
  std::partial_sort(dist.begin(), kth, dist.end());

  std::vector<double> w(c.k_neighbors);
  std::vector<double> s(c.k_neighbors);
  double total = 0.0;
  for (std::size_t i = 0; i < c.k_neighbors; ++i) {
    w[i] = std::exp(-dist[i].first / c.tau);
    s[i] = c.scores[dist[i].second];
    total += w[i];
  }
  for (auto& v : w) v /= 1.0 + total;
  return weighted_threshold(w, s, c.alpha);
}

PredictionSet predict_set_weighted(const ConformalCalibrator& calibrator,
                                   const bpp::LayerClassifier& classifier,
                                   std::span<const float> hidden) {
  const auto probs = bpp::predict_score(classifier, hidden);
  return set_from_threshold(probs, local_threshold(calibrator, hidden));
}

PredictionSet predict_set(const ConformalCalibrator& calibrator,
                          const bpp::LayerClassifier& classifier, std::span<const float> hidden) {
  return calibrator.mode == Mode::weighted
             ? predict_set_weighted(calibrator, classifier, hidden)
             : predict_set_exchangeable(calibrator, classifier, hidden);
}

// calibrator <mode> <alpha> <threshold> <K> <tau> <N> <dim>
// scores ...
// vectors ...        (weighted only, N * dim values)
void write_calibrator_block(std::ostream& out, const ConformalCalibrator& c) {
  out << "calibrator " << mode_name(c.mode) << ' ' << format_real(c.alpha) << ' '
      << format_real(c.threshold) << ' ' << c.k_neighbors << ' ' << format_real(c.tau) << ' '
      << c.size() << ' ' << c.dim << '\n';
  out << "scores";
  write_reals(out, c.scores);
  out << '\n';
  if (c.mode == Mode::weighted) {
    out << "vectors";
    for (float v : c.vectors) out << ' ' << format_real(static_cast<double>(v));
    out << '\n';
  }
}

ConformalCalibrator read_calibrator_block(std::istream& stream) {
  FlatReader in(stream);
  in.expect("calibrator");
  ConformalCalibrator c;
  c.mode = parse_mode(in.word());
  c.alpha = in.real();
  c.threshold = in.real();
  c.k_neighbors = in.count();
  c.tau = in.real();
  const auto n = in.count();
  c.dim = in.count();
  in.expect("scores");
  c.scores = in.reals(n);
  if (c.mode == Mode::weighted) {
    in.expect("vectors");
    c.vectors.resize(n * c.dim);
    for (auto& v : c.vectors) v = static_cast<float>(in.real());
    if (c.k_neighbors == 0 || c.k_neighbors > n) throw FormatError("model file: K out of range");
  }
  return c;
}

BppModel calibrate_model(std::vector<bpp::LayerClassifier> classifiers,
                         const core::BranchDataset& calibration,
                         const CalibrationOptions& options) {
  if (classifiers.empty()) throw PreconditionError("calibrate_model: no classifiers");
  BppModel m;
  m.classifiers = std::move(classifiers);
  for (const auto& c : m.classifiers) {
    const auto view = calibration.layer(c.layer_index);
    m.calibrators.push_back(
        options.mode == Mode::weighted
            ? calibrate_weighted(c, view, options.alpha, options.neighbors, options.tau)
            : calibrate_exchangeable(c, view, options.alpha));
  }
  m.selection = bpp::select_top_k_layers(m.classifiers, calibration, options.k);
  return m;
}

void write_model(std::ostream& out, const BppModel& model) {
  out << "linkguard-bpp 1\n";
  out << "layers " << model.classifiers.size() << ' ' << model.calibrators.size() << ' '
      << (model.selection ? 1 : 0) << '\n';
  for (const auto& c : model.classifiers) bpp::write_classifier_block(out, c);
  for (const auto& c : model.calibrators) write_calibrator_block(out, c);
  if (model.selection) bpp::write_selection_block(out, *model.selection);
}

BppModel read_model(std::istream& stream) {
  FlatReader in(stream);
  in.expect("linkguard-bpp");
  const auto version = in.count();
  if (version != 1) {
    throw FormatError("model file: unsupported version " + std::to_string(version));
  }
  in.expect("layers");
  const auto n_cls = in.count();
  const auto n_cal = in.count();
  const auto has_sel = in.count();
  if (n_cal != 0 && n_cal != n_cls) {
    throw FormatError("model file: calibrator count does not match classifier count");
  }
  BppModel m;
  for (std::uint64_t i = 0; i < n_cls; ++i) {
    m.classifiers.push_back(bpp::read_classifier_block(stream));
    if (i > 0 && m.classifiers[i].input_dim() != m.classifiers[0].input_dim()) {
      throw FormatError("model file: classifiers disagree on input dim");
    }
  }
  for (std::uint64_t i = 0; i < n_cal; ++i) {
    m.calibrators.push_back(read_calibrator_block(stream));
    const auto& c = m.calibrators.back();
    if (c.mode == Mode::weighted && c.dim != m.classifiers[i].input_dim()) {
      throw FormatError("model file: calibrator dim does not match classifier");
    }
  }
  if (has_sel) {
    m.selection = bpp::read_selection_block(stream);
    for (const auto& r : m.selection->ranking) {
      if (r.layer >= n_cls) throw FormatError("model file: selection names an unknown layer");
    }
  }
  return m;
}

void write_model(const std::string& path, const BppModel& model) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_model(out, model);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

BppModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  return read_model(in);
}

}  // namespace linkguard::conformal
