// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "linkguard/core/trace.hpp"

namespace linkguard::bpp {

// Label 1 is "branching", label 0 "non-branching".
struct ClassProbs {
  double p_nonbranch = 0.5;
  double p_branch = 0.5;

  double of(int label) const { return label == 1 ? p_branch : p_nonbranch; }
  // 1 - p(label), evaluated as the probability of the other class so tail
  // values keep full precision.
  double nonconformity(int label) const { return label == 1 ? p_nonbranch : p_branch; }
};

// Two-layer perceptron d -> H (ReLU) -> 2 logits.
struct MlpParams {
  Eigen::MatrixXd w1;  // H x d
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd w2;  // 2 x H
  Eigen::VectorXd b2;  // 2

  static MlpParams zeros(std::size_t input_dim, std::size_t width);
  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t width() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t parameter_count() const;

  // Order: w1 row-major, b1, w2 row-major, b2.
  Eigen::VectorXd flatten() const;
  static MlpParams unflatten(const Eigen::VectorXd& flat, std::size_t input_dim, std::size_t width);

  bool operator==(const MlpParams& o) const {
    return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

ClassProbs forward(const MlpParams& params, std::span<const float> x);

enum class ClassWeighting { inverse_frequency, explicit_weights };

struct Hyperparams {
  std::size_t hidden_width = 64;
  std::size_t epochs = 300;
  double learning_rate = 0.05;
  ClassWeighting weighting = ClassWeighting::inverse_frequency;
  std::array<double, 2> class_weights{1.0, 1.0};  // used with explicit_weights
  std::uint64_t seed = 0;

  bool operator==(const Hyperparams&) const = default;
};

struct TrainingInfo {
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::array<double, 2> class_weights{1.0, 1.0};
  std::size_t train_size = 0;
  std::vector<double> loss_curve;
  double final_loss = 0.0;

  bool operator==(const TrainingInfo&) const = default;
};

struct LayerClassifier {
  std::size_t layer_index = 0;
  MlpParams params;
  TrainingInfo info;

  std::size_t input_dim() const { return params.input_dim(); }
  bool operator==(const LayerClassifier&) const = default;
};

// Throws PreconditionError on a dimension mismatch.
ClassProbs predict_score(const LayerClassifier& classifier, std::span<const float> hidden);

// Inverse-frequency weights N / (2 N_c), normalized so both classes carry
// equal total weight.
std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels);

struct LossGradient {
  double loss = 0.0;
  MlpParams gradient;
};

// Class-weighted mean cross-entropy sum_i w_{y_i} (-log p_{y_i}) / sum_i w_{y_i}
// and its analytic gradient. `inputs` is N x d.
LossGradient loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                               std::span<const std::uint8_t> labels,
                               const std::array<double, 2>& class_weights);
double weighted_loss(const MlpParams& params, const Eigen::MatrixXd& inputs,
                     std::span<const std::uint8_t> labels,
                     const std::array<double, 2>& class_weights);

Eigen::MatrixXd to_matrix(const core::LayerView& view);

// Full-batch gradient descent with a fixed step. Requires both classes.
LayerClassifier train_layer_classifier(const core::LayerView& train, std::size_t layer_index,
                                       const Hyperparams& hp);

// One classifier per layer of `train`; layer j uses seed stream (hp.seed, j).
std::vector<LayerClassifier> train_all_layers(const core::BranchDataset& train,
                                              const Hyperparams& hp);

double training_accuracy(const LayerClassifier& classifier, const core::LayerView& data);

// Flat text block; see write_classifier_block for the layout.
void write_classifier_block(std::ostream& out, const LayerClassifier& classifier);
LayerClassifier read_classifier_block(std::istream& in);

}  // namespace linkguard::bpp
