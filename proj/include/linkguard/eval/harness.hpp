// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linkguard/bpp/classifier.hpp"
#include "linkguard/conformal/calibrator.hpp"
#include "linkguard/core/trace.hpp"
#include "linkguard/eval/metrics.hpp"
#include "linkguard/linker/detector.hpp"
#include "linkguard/linker/session.hpp"
#include "linkguard/sim/sim.hpp"

namespace linkguard::eval {

struct PipelineConfig {
  sim::SimConfig sim;
  std::size_t train_instances = 1000;
  double calib_fraction = 0.4;
  std::uint64_t split_seed = 7;
  bpp::Hyperparams hp;
  conformal::CalibrationOptions calibration;
  // Held-out instances for token-level detector metrics.
  std::size_t test_instances = 1000;
  // The column stage can be skipped when only table linking is studied.
  bool train_columns = true;

  bool operator==(const PipelineConfig&) const = default;
};

// Instance index ranges. Training, detector test and policy evaluation
// instances never overlap.
inline constexpr std::size_t kTestIndexBase = 1000000;
inline constexpr std::size_t kEvalIndexBase = 2000000;

struct StageModel {
  core::BranchDataset train;
  core::BranchDataset calibration;
  core::BranchDataset test;
  std::shared_ptr<const conformal::BppModel> model;
};

struct Pipeline {
  PipelineConfig config;
  core::SchemaCatalog catalog;
  StageModel tables;
  StageModel columns;
};

core::BranchDataset stage_dataset(const core::SchemaCatalog& catalog, const sim::SimConfig& config,
                                  linker::Stage stage, std::size_t count, std::size_t first_index);

// Simulate, split, train every layer and calibrate, for both stages.
Pipeline build_pipeline(const PipelineConfig& config);

core::LayerStates row_states(const core::BranchDataset& data, std::size_t row);

// Token-level flags of a detector over a labelled dataset. Row i uses
// position i under `seed`.
CoverageEar detect_tokens(std::shared_ptr<const conformal::BppModel> model,
                          const core::BranchDataset& data, std::vector<std::size_t> layers,
                          linker::Aggregator aggregator, std::uint64_t seed, double theta = 0.5);

struct SweepPoint {
  std::string aggregator;
  std::size_t k = 0;
  double alpha = 0.0;
  CoverageEar metrics;
};

// Detector metrics for the top-k layers of the model's ranking.
std::vector<SweepPoint> k_sweep(std::shared_ptr<const conformal::BppModel> model,
                                const core::BranchDataset& test, const std::vector<std::size_t>& ks,
                                std::uint64_t seed);

// Recalibrates at each alpha (classifiers unchanged) and evaluates k layers.
std::vector<SweepPoint> alpha_sweep(const conformal::BppModel& model,
                                    const core::BranchDataset& calibration,
                                    const core::BranchDataset& test,
                                    const std::vector<double>& alphas,
                                    const conformal::CalibrationOptions& base, std::uint64_t seed);

enum class DetectorKind { mbpp, oracle, mbpp_oracle };
std::string detector_kind_name(DetectorKind d);
DetectorKind parse_detector_kind(const std::string& name);

struct PolicyRun {
  linker::Policy policy = linker::Policy::abstain;
  DetectorKind detector = DetectorKind::mbpp;
  bool operator==(const PolicyRun&) const = default;
};

struct EvalConfig {
  std::size_t instances = 500;
  std::size_t first_index = kEvalIndexBase;
  std::vector<PolicyRun> runs{{linker::Policy::none, DetectorKind::mbpp},
                              {linker::Policy::abstain, DetectorKind::mbpp},
                              {linker::Policy::surrogate, DetectorKind::mbpp},
                              {linker::Policy::human, DetectorKind::mbpp_oracle}};
  bool joint = true;
  std::uint64_t seed = 1;
  bool operator==(const EvalConfig&) const = default;
};

// One instance under one policy run.
struct InstanceRecord {
  std::string instance;
  std::string policy;
  std::string detector;
  std::string stage;  // tables | joint
  std::string status;
  bool abstained = false;
  bool would_be_correct = false;
  double em = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::vector<std::string> predicted;
  std::vector<std::string> gt;
  std::size_t fires = 0;
  std::size_t questions = 0;
  std::size_t corrections = 0;
  std::string note;  // abstention reason or error
};

struct StageMetrics {
  std::size_t n = 0;
  std::size_t answered = 0;
  std::size_t errors = 0;
  Estimate em;           // abstentions count as misses
  Estimate em_answered;  // over non-abstained instances
  Estimate precision;    // over non-abstained instances
  Estimate recall;
  Estimate abstention;
  Estimate tar;
  Estimate far;
  double mean_questions = 0.0;
};

struct PolicyReport {
  PolicyRun run;
  StageMetrics tables;
  std::optional<StageMetrics> joint;
};

struct EvalReport {
  PipelineConfig pipeline;
  EvalConfig eval;
  std::vector<PolicyReport> policies;
  std::vector<InstanceRecord> records;
  // Detector quality on held-out table-stage tokens.
  std::vector<double> layer_auc;  // calibration AUC per layer
  std::vector<std::size_t> selected_layers;
  CoverageEar detector_rp;
  CoverageEar detector_half;

  const PolicyReport* find(linker::Policy policy, DetectorKind detector) const;
};

EvalReport evaluate_policies(const Pipeline& pipeline, const EvalConfig& config);

StageMetrics summarize(const std::vector<InstanceRecord>& records);

}  // namespace linkguard::eval
