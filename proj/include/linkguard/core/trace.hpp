// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linkguard/core/catalog.hpp"

namespace linkguard::core {

// Hidden states of one generation step: one d-dimensional vector per layer.
class LayerStates {
 public:
  LayerStates() = default;
  LayerStates(std::size_t layers, std::size_t dim)
      : layers_(layers), dim_(dim), values_(layers * dim, 0.0f) {}

  std::size_t layers() const { return layers_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> layer(std::size_t j) const { return {values_.data() + j * dim_, dim_}; }
  std::span<float> layer(std::size_t j) { return {values_.data() + j * dim_, dim_}; }
  const std::vector<float>& values() const { return values_; }

  bool operator==(const LayerStates&) const = default;

 private:
  std::size_t layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// [tokens][layers][dim] tensor of 32-bit hidden values.
class HiddenTensor {
 public:
  HiddenTensor() = default;
  HiddenTensor(std::size_t layers, std::size_t dim) : layers_(layers), dim_(dim) {}

  std::size_t tokens() const { return tokens_; }
  std::size_t layers() const { return layers_; }
  std::size_t dim() const { return dim_; }

  void append(const LayerStates& states);
  void truncate(std::size_t tokens);
  void set(std::size_t token, const LayerStates& states);
  std::span<const float> at(std::size_t token, std::size_t layer) const {
    return {values_.data() + (token * layers_ + layer) * dim_, dim_};
  }
  LayerStates step(std::size_t token) const;
  const std::vector<float>& values() const { return values_; }

  bool operator==(const HiddenTensor&) const = default;

 private:
  std::size_t tokens_ = 0;
  std::size_t layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

struct GenerationTrace {
  std::string id;
  std::string question;
  std::vector<std::string> gt_tables;
  std::vector<TokenId> gt_tokens;
  std::vector<TokenId> gen_tokens;
  std::vector<std::uint8_t> labels;
  HiddenTensor hidden;

  // Throws FormatError naming the record id and the offending field.
  void validate() const;

  bool operator==(const GenerationTrace&) const = default;
};

// One proposal from a steppable generator. `planted_branch` is ground truth
// that only simulators can provide.
struct Step {
  TokenId token = 0;
  double token_prob = 1.0;
  LayerStates hidden;
  std::optional<bool> planted_branch;
};

// A constrained generator that can be resumed from any forced prefix.
// propose() is idempotent until the next commit().
class Generator {
 public:
  virtual ~Generator() = default;
  virtual void reset() = 0;
  virtual Step propose() = 0;
  virtual void commit(TokenId token) = 0;
  virtual const std::vector<TokenId>& committed() const = 0;
};

// Resets `model` and commits `prefix` token by token.
void rewind(Generator& model, std::span<const TokenId> prefix);

struct BranchReplay {
  std::vector<std::size_t> branches;
  std::vector<TokenId> gen_tokens;
  std::vector<std::uint8_t> labels;
  HiddenTensor hidden;
  std::size_t rounds = 0;
};

class ReplayLimitError : public std::runtime_error {
 public:
  ReplayLimitError(const std::string& what, BranchReplay partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const BranchReplay& partial() const { return partial_; }

 private:
  BranchReplay partial_;
};

// Teacher-forcing replay. Each round restarts the model from the forced
// prefix and lets it run until it deviates from `gt_tokens` (a branch; the
// ground-truth token is forced in its place) or the sequence is complete.
// The hidden state recorded at position i is the one returned with the
// proposal for i. max_rounds = 0 selects the default 2 * |gt_tokens|.
BranchReplay find_branching_points(Generator& model, std::span<const TokenId> gt_tokens,
                                   std::size_t max_rounds = 0);

GenerationTrace make_trace(std::string id, std::string question,
                           std::vector<std::string> gt_tables,
                           std::vector<TokenId> gt_tokens, BranchReplay replay);

// Read-only view of one layer of a BranchDataset: N rows of `dim` floats.
struct LayerView {
  std::span<const float> values;
  std::span<const std::uint8_t> labels;
  std::size_t dim = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

// Per-layer (hidden vector, label) pairs pooled over traces. All layers share
// the label column.
class BranchDataset {
 public:
  BranchDataset() = default;
  BranchDataset(std::size_t layers, std::size_t dim);

  void add(const LayerStates& states, std::uint8_t label);
  std::size_t size() const { return labels_.size(); }
  std::size_t layers() const { return layers_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  LayerView layer(std::size_t j) const;
  std::size_t positives() const;
  bool single_class() const;

  BranchDataset subset(std::span<const std::size_t> rows) const;

  std::vector<std::string> warnings;

 private:
  std::size_t layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::vector<float>> values_;
  std::vector<std::uint8_t> labels_;
};

BranchDataset build_branch_dataset(std::span<const GenerationTrace> traces);

struct DatasetSplit {
  BranchDataset train;
  BranchDataset calibration;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> calibration_rows;
};

// Label-stratified split; round(fraction * N) rows go to calibration with
// per-class quotas assigned by largest remainder.
DatasetSplit split_dataset(const BranchDataset& dataset, double calib_fraction,
                           std::uint64_t seed);

}  // namespace linkguard::core
