// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linkguard/bpp/classifier.hpp"
#include "linkguard/bpp/selection.hpp"
#include "linkguard/conformal/prediction_set.hpp"
#include "linkguard/core/trace.hpp"

namespace linkguard::conformal {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Mode { exchangeable, weighted };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct ConformalCalibrator {
  Mode mode = Mode::exchangeable;
  double alpha = 0.1;
  std::vector<double> scores;  // sigma_i = 1 - p(true label)
  double threshold = kInf;     // exchangeable epsilon

  // Weighted mode only.
  std::size_t k_neighbors = 0;
  double tau = 0.0;
  std::size_t dim = 0;
  std::vector<float> vectors;  // N x dim calibration hidden states

  std::size_t size() const { return scores.size(); }
  std::span<const float> vector(std::size_t i) const {
    return std::span<const float>(vectors).subspan(i * dim, dim);
  }
  bool operator==(const ConformalCalibrator&) const = default;
};

// q-th smallest score with q = ceil((N+1)(1-alpha)); +inf when q > N.
double quantile_threshold(std::span<const double> scores, double alpha);

// (#{i : sigma_i >= r} + 1) / (N + 1).
double pi_value(std::span<const double> scores, double r);

// Nonconformity of every calibration row under `classifier`.
std::vector<double> nonconformity_scores(const bpp::LayerClassifier& classifier,
                                         const core::LayerView& calibration);

ConformalCalibrator calibrate_exchangeable(const bpp::LayerClassifier& classifier,
                                           const core::LayerView& calibration, double alpha);

// k = 0 selects min(200, N); tau = 0 selects the median pairwise squared
// distance over a strided subsample of at most 256 calibration points.
ConformalCalibrator calibrate_weighted(const bpp::LayerClassifier& classifier,
                                       const core::LayerView& calibration, double alpha,
                                       std::size_t k = 0, double tau = 0.0);

double default_tau(const core::LayerView& calibration);

// Smallest sigma_j such that the total weight of {i : sigma_i <= sigma_j}
// reaches 1 - alpha; +inf if it never does.
double weighted_threshold(std::span<const double> weights, std::span<const double> scores,
                          double alpha);

// {y : sigma_y <= epsilon}, i.e. {y : p(y|x) >= 1 - epsilon}.
PredictionSet set_from_threshold(const bpp::ClassProbs& probs, double epsilon);

PredictionSet predict_set_exchangeable(const ConformalCalibrator& calibrator,
                                       const bpp::LayerClassifier& classifier,
                                       std::span<const float> hidden);

// Threshold for one test vector from its K nearest calibration points.
double local_threshold(const ConformalCalibrator& calibrator, std::span<const float> hidden);

PredictionSet predict_set_weighted(const ConformalCalibrator& calibrator,
                                   const bpp::LayerClassifier& classifier,
                                   std::span<const float> hidden);

// Dispatches on calibrator.mode.
PredictionSet predict_set(const ConformalCalibrator& calibrator,
                          const bpp::LayerClassifier& classifier, std::span<const float> hidden);

void write_calibrator_block(std::ostream& out, const ConformalCalibrator& calibrator);
ConformalCalibrator read_calibrator_block(std::istream& in);

// Everything a detector needs: one classifier per network layer, optional
// calibrators (same order) and the layer ranking.
struct BppModel {
  std::vector<bpp::LayerClassifier> classifiers;
  std::vector<ConformalCalibrator> calibrators;
  std::optional<bpp::LayerSelection> selection;

  bool calibrated() const { return !calibrators.empty() && selection.has_value(); }
  bool operator==(const BppModel&) const = default;
};

struct CalibrationOptions {
  double alpha = 0.1;
  std::size_t k = 5;
  Mode mode = Mode::exchangeable;
  std::size_t neighbors = 0;  // weighted mode; 0 = default
  double tau = 0.0;           // weighted mode; 0 = default

  bool operator==(const CalibrationOptions&) const = default;
};

// Calibrates every classifier on its layer of `calibration` and ranks the
// layers by calibration AUC.
BppModel calibrate_model(std::vector<bpp::LayerClassifier> classifiers,
                         const core::BranchDataset& calibration,
                         const CalibrationOptions& options);

// "linkguard-bpp 1" followed by classifier, calibrator and selection blocks.
void write_model(std::ostream& out, const BppModel& model);
BppModel read_model(std::istream& in);
void write_model(const std::string& path, const BppModel& model);
BppModel read_model(const std::string& path);

}  // namespace linkguard::conformal
