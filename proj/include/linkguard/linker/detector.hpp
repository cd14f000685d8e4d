// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "linkguard/conformal/calibrator.hpp"
#include "linkguard/conformal/prediction_set.hpp"
#include "linkguard/core/trace.hpp"

namespace linkguard::linker {

// Decides, per proposed token, whether it is a branching point.
class Detector {
 public:
  virtual ~Detector() = default;
  // `seed` is the session seed; implementations derive per-token streams
  // from (seed, position).
  virtual bool fires(const core::Step& step, std::size_t position, std::uint64_t seed) = 0;
  virtual std::string name() const = 0;
};

enum class Aggregator { random_permutation, half_vote, majority };

std::string aggregator_name(Aggregator a);
Aggregator parse_aggregator(const std::string& name);

// Multi-layer detector: conformal sets from the selected layers, aggregated.
class MbppDetector : public Detector {
 public:
  // `layers` empty means the model's selection.
  MbppDetector(std::shared_ptr<const conformal::BppModel> model, std::vector<std::size_t> layers = {},
               Aggregator aggregator = Aggregator::random_permutation, double theta = 0.5);

  std::vector<PredictionSet> sets(const core::LayerStates& hidden) const;
  bool decide(const std::vector<PredictionSet>& sets, std::size_t position,
              std::uint64_t seed) const;
  bool fires(const core::Step& step, std::size_t position, std::uint64_t seed) override;
  std::string name() const override { return "mbpp"; }

  const std::vector<std::size_t>& layers() const { return layers_; }

 private:
  std::shared_ptr<const conformal::BppModel> model_;
  std::vector<std::size_t> layers_;
  Aggregator aggregator_;
  double theta_;
};

// Fires exactly on simulator-planted branches.
class OracleDetector : public Detector {
 public:
  bool fires(const core::Step& step, std::size_t, std::uint64_t) override {
    return step.planted_branch.value_or(false);
  }
  std::string name() const override { return "oracle"; }
};

class NeverDetector : public Detector {
 public:
  bool fires(const core::Step&, std::size_t, std::uint64_t) override { return false; }
  std::string name() const override { return "never"; }
};

// Fires at fixed token positions (each position once).
class ScriptedDetector : public Detector {
 public:
  explicit ScriptedDetector(std::set<std::size_t> positions) : positions_(std::move(positions)) {}
  bool fires(const core::Step&, std::size_t position, std::uint64_t) override {
    return positions_.erase(position) > 0;
  }
  std::string name() const override { return "scripted"; }

 private:
  std::set<std::size_t> positions_;
};

class UnionDetector : public Detector {
 public:
  UnionDetector(std::shared_ptr<Detector> a, std::shared_ptr<Detector> b)
      : a_(std::move(a)), b_(std::move(b)) {}
  bool fires(const core::Step& step, std::size_t position, std::uint64_t seed) override {
    // Evaluate both so stateful detectors see every token.
    const bool x = a_->fires(step, position, seed);
    const bool y = b_->fires(step, position, seed);
    return x || y;
  }
  std::string name() const override { return a_->name() + "+" + b_->name(); }

 private:
  std::shared_ptr<Detector> a_;
  std::shared_ptr<Detector> b_;
};

// Seed for the aggregation permutation of token `position`.
std::uint64_t token_seed(std::uint64_t session_seed, std::size_t position);

}  // namespace linkguard::linker
