// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/bpp/classifier.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "linkguard/common/error.hpp"
#include "linkguard/common/flat_io.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::bpp {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t input_dim, std::size_t width) {
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h = static_cast<Eigen::Index>(width);
  return {Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(2, h),
          Eigen::VectorXd::Zero(2)};
}

std::size_t MlpParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w1.cols(); ++c) flat[k++] = w1(r, c);
  for (Eigen::Index i = 0; i < b1.size(); ++i) flat[k++] = b1[i];
  for (Eigen::Index r = 0; r < w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w2.cols(); ++c) flat[k++] = w2(r, c);
  for (Eigen::Index i = 0; i < b2.size(); ++i) flat[k++] = b2[i];
  return flat;
}

MlpParams MlpParams::unflatten(const Eigen::VectorXd& flat, std::size_t input_dim,
                               std::size_t width) {
  MlpParams p = zeros(input_dim, width);
  if (static_cast<std::size_t>(flat.size()) != p.parameter_count()) {
    throw PreconditionError("MlpParams::unflatten: wrong parameter count");
  }
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = flat[k++];
  for (Eigen::Index i = 0; i < p.b1.size(); ++i) p.b1[i] = flat[k++];
  for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(r, c) = flat[k++];
  for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2[i] = flat[k++];
  return p;
}

ClassProbs forward(const MlpParams& params, std::span<const float> x) {
  if (x.size() != params.input_dim()) {
    throw PreconditionError("classifier expects input dim " + std::to_string(params.input_dim()) +
                            ", got " + std::to_string(x.size()));
  }
  Eigen::VectorXd in(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) in[static_cast<Eigen::Index>(i)] = x[i];
  const Eigen::VectorXd hidden = (params.w1 * in + params.b1).cwiseMax(0.0);
  const Eigen::VectorXd logits = params.w2 * hidden + params.b2;
  // Two-class softmax written as complementary sigmoids; each side keeps its
  // own precision near 0.
  const double z = logits[1] - logits[0];
  return {sigmoid(-z), sigmoid(z)};
}

ClassProbs predict_score(const LayerClassifier& classifier, std::span<const float> hidden) {
  return forward(classifier.params, hidden);
}

std::array<double, 2> inverse_frequency_weights(std::span<const std::uint8_t> labels) {
  std::array<double, 2> counts{0.0, 0.0};
  for (auto l : labels) counts[l ? 1 : 0] += 1.0;
  if (counts[0] == 0.0 || counts[1] == 0.0) {
    throw PreconditionError("inverse_frequency_weights: both classes must be present");
  }
  const double n = counts[0] + counts[1];
  return {n / (2.0 * counts[0]), n / (2.0 * counts[1])};
}

Eigen::MatrixXd to_matrix(const core::LayerView& view) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(view.size()), static_cast<Eigen::Index>(view.dim));
  for (std::size_t i = 0; i < view.size(); ++i) {
    auto row = view.row(i);
    for (std::size_t c = 0; c < view.dim; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

LossGradient loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                               std::span<const std::uint8_t> labels,
                               const std::array<double, 2>& class_weights) {
  const Eigen::Index n = inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw PreconditionError("loss_and_gradient: inputs and labels differ in length");
  }
  if (static_cast<std::size_t>(inputs.cols()) != params.input_dim()) {
    throw PreconditionError("loss_and_gradient: input dim mismatch");
  }

  // Rows are samples: pre = X W1^T + b1, act = relu(pre), logits = act W2^T + b2.
  const Eigen::MatrixXd pre = (inputs * params.w1.transpose()).rowwise() + params.b1.transpose();
  const Eigen::MatrixXd act = pre.cwiseMax(0.0);
  const Eigen::MatrixXd logits = (act * params.w2.transpose()).rowwise() + params.b2.transpose();

  double wsum = 0.0;
  for (auto l : labels) wsum += class_weights[l ? 1 : 0];
  if (!(wsum > 0.0)) throw PreconditionError("loss_and_gradient: total sample weight is zero");

  LossGradient out;
  out.gradient = MlpParams::zeros(params.input_dim(), params.width());
  Eigen::MatrixXd dlogits(n, 2);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)] ? 1 : 0;
    const double w = class_weights[y] / wsum;
    // z = l_y - l_other; -log softmax_y = softplus(-z).
    const double z = logits(i, y) - logits(i, 1 - y);
    loss += w * softplus(-z);
    const double p_other = sigmoid(-z);
    dlogits(i, y) = -w * p_other;
    dlogits(i, 1 - y) = w * p_other;
  }
  out.loss = loss;

  out.gradient.w2 = dlogits.transpose() * act;
  out.gradient.b2 = dlogits.colwise().sum().transpose();
  const Eigen::MatrixXd dact =
      ((dlogits * params.w2).array() * (pre.array() > 0.0).cast<double>()).matrix();
  out.gradient.w1 = dact.transpose() * inputs;
  out.gradient.b1 = dact.colwise().sum().transpose();
  return out;
}

double weighted_loss(const MlpParams& params, const Eigen::MatrixXd& inputs,
                     std::span<const std::uint8_t> labels,
                     const std::array<double, 2>& class_weights) {
  return loss_and_gradient(params, inputs, labels, class_weights).loss;
}

LayerClassifier train_layer_classifier(const core::LayerView& train, std::size_t layer_index,
                                       const Hyperparams& hp) {
  if (train.size() == 0) throw PreconditionError("train_layer_classifier: empty training set");
  std::size_t positives = 0;
  for (auto l : train.labels) positives += l ? 1 : 0;
  if (positives == 0 || positives == train.size()) {
    throw PreconditionError("train_layer_classifier: training data for layer " +
                            std::to_string(layer_index) + " contains a single class");
  }
  if (hp.hidden_width == 0) throw PreconditionError("train_layer_classifier: hidden width is 0");
  if (!(hp.learning_rate > 0.0)) {
    throw PreconditionError("train_layer_classifier: learning rate must be positive");
  }

  const std::array<double, 2> weights = hp.weighting == ClassWeighting::inverse_frequency
                                            ? inverse_frequency_weights(train.labels)
                                            : hp.class_weights;
  if (weights[0] < 0.0 || weights[1] < 0.0) {
    throw PreconditionError("train_layer_classifier: negative class weight");
  }

  const std::size_t d = train.dim;
  const std::size_t h = hp.hidden_width;
  MlpParams params = MlpParams::zeros(d, h);
  Rng rng(derive_seed(hp.seed, {layer_index}));
  std::normal_distribution<double> init1(0.0, std::sqrt(2.0 / static_cast<double>(d)));
  std::normal_distribution<double> init2(0.0, std::sqrt(1.0 / static_cast<double>(h)));
  for (Eigen::Index r = 0; r < params.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < params.w1.cols(); ++c) params.w1(r, c) = init1(rng);
  for (Eigen::Index r = 0; r < params.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < params.w2.cols(); ++c) params.w2(r, c) = init2(rng);

  const Eigen::MatrixXd x = to_matrix(train);
  LayerClassifier out;
  out.layer_index = layer_index;
  out.info.epochs = hp.epochs;
  out.info.learning_rate = hp.learning_rate;
  out.info.seed = hp.seed;
  out.info.class_weights = weights;
  out.info.train_size = train.size();
  out.info.loss_curve.reserve(hp.epochs);
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    auto lg = loss_and_gradient(params, x, train.labels, weights);
    out.info.loss_curve.push_back(lg.loss);
    params.w1 -= hp.learning_rate * lg.gradient.w1;
    params.b1 -= hp.learning_rate * lg.gradient.b1;
    params.w2 -= hp.learning_rate * lg.gradient.w2;
    params.b2 -= hp.learning_rate * lg.gradient.b2;
  }
  out.info.final_loss = weighted_loss(params, x, train.labels, weights);
  out.params = std::move(params);
  return out;
}

std::vector<LayerClassifier> train_all_layers(const core::BranchDataset& train,
                                              const Hyperparams& hp) {
  std::vector<LayerClassifier> out;
  out.reserve(train.layers());
  for (std::size_t j = 0; j < train.layers(); ++j) {
    out.push_back(train_layer_classifier(train.layer(j), j, hp));
  }
  return out;
}

double training_accuracy(const LayerClassifier& classifier, const core::LayerView& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = predict_score(classifier, data.row(i));
    const int pred = p.p_branch > p.p_nonbranch ? 1 : 0;
    hits += pred == (data.labels[i] ? 1 : 0) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

void write_matrix(std::ostream& out, const char* key, const Eigen::MatrixXd& m) {
  out << key;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ' ' << format_real(m(r, c));
  out << '\n';
}

void read_matrix(FlatReader& in, const char* key, Eigen::MatrixXd& m) {
  in.expect(key);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.real();
}

}  // namespace

// classifier <layer> <d> <H>
// meta <epochs> <lr> <seed> <w0> <w1> <train_size> <final_loss>
// w1 ... / b1 ... / w2 ... / b2 ...        (row-major)
// loss_curve <count> ...
void write_classifier_block(std::ostream& out, const LayerClassifier& c) {
  const auto& p = c.params;
  const auto& m = c.info;
  out << "classifier " << c.layer_index << ' ' << p.input_dim() << ' ' << p.width() << '\n';
  out << "meta " << m.epochs << ' ' << format_real(m.learning_rate) << ' ' << m.seed << ' '
      << format_real(m.class_weights[0]) << ' ' << format_real(m.class_weights[1]) << ' '
      << m.train_size << ' ' << format_real(m.final_loss) << '\n';
  write_matrix(out, "w1", p.w1);
  write_matrix(out, "b1", p.b1);
  write_matrix(out, "w2", p.w2);
  write_matrix(out, "b2", p.b2);
  out << "loss_curve " << m.loss_curve.size();
  write_reals(out, m.loss_curve);
  out << '\n';
}

LayerClassifier read_classifier_block(std::istream& stream) {
  FlatReader in(stream);
  in.expect("classifier");
  LayerClassifier c;
  c.layer_index = in.count();
  const auto d = in.count();
  const auto h = in.count();
  if (d == 0 || h == 0) throw FormatError("model file: classifier has zero input dim or width");
  c.params = MlpParams::zeros(d, h);
  in.expect("meta");
  c.info.epochs = in.count();
  c.info.learning_rate = in.real();
  c.info.seed = in.count();
  c.info.class_weights[0] = in.real();
  c.info.class_weights[1] = in.real();
  c.info.train_size = in.count();
  c.info.final_loss = in.real();
  read_matrix(in, "w1", c.params.w1);
  Eigen::MatrixXd b1(static_cast<Eigen::Index>(h), 1);
  read_matrix(in, "b1", b1);
  c.params.b1 = b1.col(0);
  Eigen::MatrixXd w2(2, static_cast<Eigen::Index>(h));
  read_matrix(in, "w2", w2);
  c.params.w2 = w2;
  Eigen::MatrixXd b2(2, 1);
  read_matrix(in, "b2", b2);
  c.params.b2 = b2.col(0);
  in.expect("loss_curve");
  c.info.loss_curve = in.reals(in.count());
  return c;
}

}  // namespace linkguard::bpp
