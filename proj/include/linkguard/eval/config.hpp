// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"
#include "linkguard/eval/harness.hpp"
#include "linkguard/eval/theorems.hpp"

namespace linkguard::eval {

using Json = nlohmann::ordered_json;

// Config file: one JSON object with optional sections "sim", "hyperparams",
// "calibration", "pipeline", "eval", "theorems" and "coverage". Missing keys
// keep their defaults; unknown keys are rejected with PreconditionError.
struct RunConfig {
  PipelineConfig pipeline;
  EvalConfig eval;
  MonteCarloConfig theorems;
  CoverageSweepConfig coverage;
};

Json to_json(const sim::SimConfig& c);
Json to_json(const bpp::Hyperparams& h);
Json to_json(const conformal::CalibrationOptions& c);
Json to_json(const PipelineConfig& c);
Json to_json(const EvalConfig& c);
Json to_json(const MonteCarloConfig& c);
Json to_json(const CoverageSweepConfig& c);
Json to_json(const RunConfig& c);

void apply_json(const Json& j, sim::SimConfig& c);
void apply_json(const Json& j, bpp::Hyperparams& h);
void apply_json(const Json& j, conformal::CalibrationOptions& c);
void apply_json(const Json& j, EvalConfig& c);
void apply_json(const Json& j, MonteCarloConfig& c);
void apply_json(const Json& j, CoverageSweepConfig& c);
void apply_json(const Json& j, RunConfig& c);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace linkguard::eval
