// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "linkguard/eval/config.hpp"

namespace linkguard::eval {

Json to_json(const Estimate& e);
Json to_json(const CoverageEar& m);
Json to_json(const StageMetrics& m);
Json to_json(const InstanceRecord& r);

// Summary without per-instance records; stable across runs for equal inputs.
Json summary_json(const EvalReport& report);
Json to_json(const TheoremReport& report);
Json to_json(const std::vector<CoveragePoint>& curve);

// One JSON object per line.
void write_records(std::ostream& out, const std::vector<InstanceRecord>& records);
// Flat text table: one row per policy run and stage.
void write_summary_table(std::ostream& out, const EvalReport& report);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);
void write_coverage_csv(std::ostream& out, const std::vector<CoveragePoint>& curve);

}  // namespace linkguard::eval
