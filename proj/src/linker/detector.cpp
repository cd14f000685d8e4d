// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/linker/detector.hpp"

#include "linkguard/aggregate/aggregate.hpp"
#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::linker {

std::string aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::random_permutation: return "random_permutation";
    case Aggregator::half_vote: return "half_vote";
    case Aggregator::majority: return "majority";
  }
  return "random_permutation";
}

Aggregator parse_aggregator(const std::string& name) {
  if (name == "random_permutation") return Aggregator::random_permutation;
  if (name == "half_vote") return Aggregator::half_vote;
  if (name == "majority") return Aggregator::majority;
  throw PreconditionError("unknown aggregator '" + name +
                          "' (expected random_permutation, half_vote or majority)");
}

std::uint64_t token_seed(std::uint64_t session_seed, std::size_t position) {
  return derive_seed(session_seed, {position});
}

MbppDetector::MbppDetector(std::shared_ptr<const conformal::BppModel> model,
                           std::vector<std::size_t> layers, Aggregator aggregator, double theta)
    : model_(std::move(model)), layers_(std::move(layers)), aggregator_(aggregator), theta_(theta) {
  if (!model_ || !model_->calibrated()) {
    throw PreconditionError("mbpp detector requires a calibrated model");
  }
  if (layers_.empty()) layers_ = model_->selection->chosen();
  for (auto l : layers_) {
    if (l >= model_->classifiers.size()) {
      throw PreconditionError("mbpp detector: layer " + std::to_string(l) + " not in model");
    }
  }
}

std::vector<PredictionSet> MbppDetector::sets(const core::LayerStates& hidden) const {
  std::vector<PredictionSet> out;
  out.reserve(layers_.size());
  for (auto l : layers_) {
    if (l >= hidden.layers()) {
      throw PreconditionError("mbpp detector: hidden state has no layer " + std::to_string(l));
    }
    out.push_back(conformal::predict_set(model_->calibrators[l], model_->classifiers[l],
                                         hidden.layer(l)));
  }
  return out;
}

bool MbppDetector::decide(const std::vector<PredictionSet>& s, std::size_t position,
                          std::uint64_t seed) const {
  switch (aggregator_) {
    case Aggregator::half_vote: return aggregate::half_vote(s).contains(1);
    case Aggregator::majority: return aggregate::majority_vote(s, theta_).contains(1);
    case Aggregator::random_permutation: break;
  }
  return aggregate::decide_branching(s, token_seed(seed, position));
}

bool MbppDetector::fires(const core::Step& step, std::size_t position, std::uint64_t seed) {
  return decide(sets(step.hidden), position, seed);
}

}  // namespace linkguard::linker
