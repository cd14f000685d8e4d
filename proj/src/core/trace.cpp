// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/core/trace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::core {

void HiddenTensor::append(const LayerStates& states) {
  if (states.layers() != layers_ || states.dim() != dim_) {
    throw FormatError("hidden state shape [" + std::to_string(states.layers()) + "][" +
                      std::to_string(states.dim()) + "] does not match tensor [" +
                      std::to_string(layers_) + "][" + std::to_string(dim_) + "]");
  }
  values_.insert(values_.end(), states.values().begin(), states.values().end());
  ++tokens_;
}

void HiddenTensor::truncate(std::size_t tokens) {
  if (tokens >= tokens_) return;
  tokens_ = tokens;
  values_.resize(tokens * layers_ * dim_);
}

void HiddenTensor::set(std::size_t token, const LayerStates& states) {
  if (token >= tokens_ || states.layers() != layers_ || states.dim() != dim_) {
    throw PreconditionError("HiddenTensor::set out of range or shape mismatch");
  }
  std::copy(states.values().begin(), states.values().end(),
            values_.begin() + static_cast<std::ptrdiff_t>(token * layers_ * dim_));
}

LayerStates HiddenTensor::step(std::size_t token) const {
  LayerStates s(layers_, dim_);
  for (std::size_t j = 0; j < layers_; ++j) {
    auto src = at(token, j);
    std::copy(src.begin(), src.end(), s.layer(j).begin());
  }
  return s;
}

void GenerationTrace::validate() const {
  auto fail = [this](const std::string& field, const std::string& msg) {
    throw FormatError("record '" + id + "': field '" + field + "' " + msg);
  };
  const std::size_t m = gen_tokens.size();
  if (labels.size() != m) {
    fail("labels", "has length " + std::to_string(labels.size()) + " but gen_tokens has " +
                       std::to_string(m));
  }
  for (auto l : labels) {
    if (l > 1) fail("labels", "contains a value other than 0/1");
  }
  if (hidden.tokens() != m) {
    fail("hidden", "has " + std::to_string(hidden.tokens()) + " tokens but gen_tokens has " +
                       std::to_string(m));
  }
  if (m > 0 && (hidden.layers() == 0 || hidden.dim() == 0)) {
    fail("hidden", "has zero layers or zero dims");
  }
}

void rewind(Generator& model, std::span<const TokenId> prefix) {
  model.reset();
  for (TokenId t : prefix) model.commit(t);
}

BranchReplay find_branching_points(Generator& model, std::span<const TokenId> gt_tokens,
                                   std::size_t max_rounds) {
  if (gt_tokens.empty()) throw PreconditionError("find_branching_points: empty gt_tokens");
  if (max_rounds == 0) max_rounds = 2 * gt_tokens.size();

  BranchReplay replay;
  std::vector<TokenId> prefix;
  bool shaped = false;
  while (prefix.size() < gt_tokens.size()) {
    if (replay.rounds == max_rounds) {
      throw ReplayLimitError("teacher-forcing replay exceeded " + std::to_string(max_rounds) +
                                 " rounds",
                             std::move(replay));
    }
    ++replay.rounds;
    rewind(model, prefix);
    while (prefix.size() < gt_tokens.size()) {
      const std::size_t pos = prefix.size();
      Step step = model.propose();
      if (!shaped) {
        replay.hidden = HiddenTensor(step.hidden.layers(), step.hidden.dim());
        shaped = true;
      }
      replay.gen_tokens.push_back(step.token);
      replay.hidden.append(step.hidden);
      if (step.token != gt_tokens[pos]) {
        replay.labels.push_back(1);
        replay.branches.push_back(pos);
        prefix.push_back(gt_tokens[pos]);
        break;
      }
      replay.labels.push_back(0);
      model.commit(step.token);
      prefix.push_back(step.token);
    }
  }
  return replay;
}

GenerationTrace make_trace(std::string id, std::string question,
                           std::vector<std::string> gt_tables,
                           std::vector<TokenId> gt_tokens, BranchReplay replay) {
  GenerationTrace t;
  t.id = std::move(id);
  t.question = std::move(question);
  t.gt_tables = std::move(gt_tables);
  t.gt_tokens = std::move(gt_tokens);
  t.gen_tokens = std::move(replay.gen_tokens);
  t.labels = std::move(replay.labels);
  t.hidden = std::move(replay.hidden);
  t.validate();
  return t;
}

BranchDataset::BranchDataset(std::size_t layers, std::size_t dim)
    : layers_(layers), dim_(dim), values_(layers) {}

void BranchDataset::add(const LayerStates& states, std::uint8_t label) {
  if (states.layers() != layers_ || states.dim() != dim_) {
    throw FormatError("branch dataset: hidden shape mismatch");
  }
  for (std::size_t j = 0; j < layers_; ++j) {
    auto v = states.layer(j);
    values_[j].insert(values_[j].end(), v.begin(), v.end());
  }
  labels_.push_back(label);
}

LayerView BranchDataset::layer(std::size_t j) const {
  if (j >= layers_) throw PreconditionError("branch dataset: layer index out of range");
  return LayerView{values_[j], labels_, dim_};
}

std::size_t BranchDataset::positives() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
}

bool BranchDataset::single_class() const {
  const auto p = positives();
  return p == 0 || p == labels_.size();
}

BranchDataset BranchDataset::subset(std::span<const std::size_t> rows) const {
  BranchDataset out(layers_, dim_);
  out.labels_.reserve(rows.size());
  for (std::size_t j = 0; j < layers_; ++j) out.values_[j].reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= labels_.size()) throw PreconditionError("branch dataset: row out of range");
    for (std::size_t j = 0; j < layers_; ++j) {
      auto first = values_[j].begin() + static_cast<std::ptrdiff_t>(r * dim_);
      out.values_[j].insert(out.values_[j].end(), first, first + static_cast<std::ptrdiff_t>(dim_));
    }
    out.labels_.push_back(labels_[r]);
  }
  return out;
}

BranchDataset build_branch_dataset(std::span<const GenerationTrace> traces) {
  std::size_t layers = 0;
  std::size_t dim = 0;
  bool shaped = false;
  for (const auto& t : traces) {
    t.validate();
    if (t.gen_tokens.empty()) continue;
    if (!shaped) {
      layers = t.hidden.layers();
      dim = t.hidden.dim();
      shaped = true;
    } else if (t.hidden.layers() != layers || t.hidden.dim() != dim) {
      throw FormatError("record '" + t.id + "': field 'hidden' has shape [" +
                        std::to_string(t.hidden.layers()) + "][" + std::to_string(t.hidden.dim()) +
                        "], expected [" + std::to_string(layers) + "][" + std::to_string(dim) + "]");
    }
  }
  BranchDataset ds(layers, dim);
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.gen_tokens.size(); ++i) ds.add(t.hidden.step(i), t.labels[i]);
  }
  if (ds.single_class()) {
    ds.warnings.push_back("dataset contains a single class (" + std::to_string(ds.positives()) +
                          " positives of " + std::to_string(ds.size()) +
                          "); unusable for classifier training");
  }
  return ds;
}

DatasetSplit split_dataset(const BranchDataset& dataset, double calib_fraction,
                           std::uint64_t seed) {
  if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
    throw PreconditionError("split_dataset: calib_fraction must lie in (0,1)");
  }
  if (dataset.size() == 0) throw PreconditionError("split_dataset: empty dataset");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels()[i]].push_back(i);

  const auto total = static_cast<std::size_t>(
      std::llround(calib_fraction * static_cast<double>(dataset.size())));
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = calib_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < total) {
    // Largest remainder first; ties go to the positive class (the rare one).
    int c = remainder[1] >= remainder[0] ? 1 : 0;
    if (quota[c] >= by_class[c].size()) c = 1 - c;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  Rng rng(seed);
  DatasetSplit split;
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    split.calibration_rows.insert(split.calibration_rows.end(), idx.begin(),
                                  idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    split.train_rows.insert(split.train_rows.end(),
                            idx.begin() + static_cast<std::ptrdiff_t>(quota[c]), idx.end());
  }
  std::sort(split.calibration_rows.begin(), split.calibration_rows.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  split.train = dataset.subset(split.train_rows);
  split.calibration = dataset.subset(split.calibration_rows);
  return split;
}

}  // namespace linkguard::core
