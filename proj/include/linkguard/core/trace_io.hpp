// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "linkguard/core/catalog.hpp"
#include "linkguard/core/trace.hpp"

namespace linkguard::core {

// Trace files hold one JSON record per line with exactly the fields
//   id, question, gt_tables, gt_tokens, gen_tokens, labels, hidden
// where hidden is [m][n][d]. Hidden values are written with the shortest
// decimal form that round-trips a 32-bit float.
void write_traces(std::ostream& out, const std::vector<GenerationTrace>& traces);
void write_traces(const std::filesystem::path& path, const std::vector<GenerationTrace>& traces);

std::vector<GenerationTrace> read_traces(std::istream& in);
std::vector<GenerationTrace> read_traces(const std::filesystem::path& path);

std::string trace_to_line(const GenerationTrace& trace);
GenerationTrace trace_from_line(const std::string& line, std::size_t line_no = 0);

// Catalog sidecar: {"tables":[{"name","columns"}], "vocabulary":[{"id","text",
// "is_separator","is_eos"}]}.
void write_catalog(const std::filesystem::path& path, const SchemaCatalog& catalog);
SchemaCatalog read_catalog(const std::filesystem::path& path);
std::string catalog_to_json(const SchemaCatalog& catalog);
SchemaCatalog catalog_from_json(const std::string& text);

// Sidecar path convention: "<traces>.catalog.json".
std::filesystem::path catalog_sidecar_path(const std::filesystem::path& traces);

// Branch dataset file: "linkguard-dataset 1", then "shape <rows> <layers>
// <dim>", then one line per row: the label followed by layers*dim values.
void write_dataset(std::ostream& out, const BranchDataset& dataset);
BranchDataset read_dataset(std::istream& in);
void write_dataset(const std::filesystem::path& path, const BranchDataset& dataset);
BranchDataset read_dataset(const std::filesystem::path& path);

}  // namespace linkguard::core
