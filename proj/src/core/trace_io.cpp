// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/core/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "linkguard/common/error.hpp"
#include "linkguard/common/flat_io.hpp"

namespace linkguard::core {

namespace {

// Floats stay 32-bit end to end so dump/parse round-trips bit-exactly.
using TraceJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                       std::uint64_t, float>;

const char* const kFields[] = {"id",         "question", "gt_tables", "gt_tokens",
                               "gen_tokens", "labels",   "hidden"};

[[noreturn]] void bad(const std::string& id, const std::string& field, const std::string& msg) {
  throw FormatError("record '" + id + "': field '" + field + "' " + msg);
}

const TraceJson& require(const TraceJson& rec, const std::string& id, const char* field) {
  auto it = rec.find(field);
  if (it == rec.end()) bad(id, field, "is missing");
  return *it;
}

template <class T>
std::vector<T> int_array(const TraceJson& v, const std::string& id, const char* field) {
  if (!v.is_array()) bad(id, field, "is not an array");
  std::vector<T> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number_integer()) bad(id, field, "contains a non-integer");
    out.push_back(static_cast<T>(x.get<std::int64_t>()));
  }
  return out;
}

}  // namespace

std::string trace_to_line(const GenerationTrace& t) {
  t.validate();
  TraceJson rec = TraceJson::object();
  rec["id"] = t.id;
  rec["question"] = t.question;
  rec["gt_tables"] = t.gt_tables;
  rec["gt_tokens"] = t.gt_tokens;
  rec["gen_tokens"] = t.gen_tokens;
  TraceJson labels = TraceJson::array();
  for (auto l : t.labels) labels.push_back(static_cast<int>(l));
  rec["labels"] = std::move(labels);
  TraceJson hidden = TraceJson::array();
  for (std::size_t i = 0; i < t.hidden.tokens(); ++i) {
    TraceJson tok = TraceJson::array();
    for (std::size_t j = 0; j < t.hidden.layers(); ++j) {
      auto v = t.hidden.at(i, j);
      tok.push_back(TraceJson(std::vector<float>(v.begin(), v.end())));
    }
    hidden.push_back(std::move(tok));
  }
  rec["hidden"] = std::move(hidden);
  return rec.dump();
}

GenerationTrace trace_from_line(const std::string& line, std::size_t line_no) {
  TraceJson rec;
  try {
    rec = TraceJson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  if (!rec.is_object()) throw FormatError("line " + std::to_string(line_no) + ": not an object");
  std::string id = "<line " + std::to_string(line_no) + ">";
  if (auto it = rec.find("id"); it != rec.end() && it->is_string()) id = it->get<std::string>();
  for (const auto& [key, _] : rec.items()) {
    if (std::find(std::begin(kFields), std::end(kFields), key) == std::end(kFields)) {
      bad(id, key, "is not a trace field");
    }
  }

  GenerationTrace t;
  const auto& idv = require(rec, id, "id");
  if (!idv.is_string()) bad(id, "id", "is not a string");
  t.id = id;
  const auto& q = require(rec, id, "question");
  if (!q.is_string()) bad(id, "question", "is not a string");
  t.question = q.get<std::string>();
  const auto& tables = require(rec, id, "gt_tables");
  if (!tables.is_array()) bad(id, "gt_tables", "is not an array");
  for (const auto& s : tables) {
    if (!s.is_string()) bad(id, "gt_tables", "contains a non-string");
    t.gt_tables.push_back(s.get<std::string>());
  }
  t.gt_tokens = int_array<TokenId>(require(rec, id, "gt_tokens"), id, "gt_tokens");
  t.gen_tokens = int_array<TokenId>(require(rec, id, "gen_tokens"), id, "gen_tokens");
  for (auto l : int_array<int>(require(rec, id, "labels"), id, "labels")) {
    if (l != 0 && l != 1) bad(id, "labels", "contains a value other than 0/1");
    t.labels.push_back(static_cast<std::uint8_t>(l));
  }

  const auto& hidden = require(rec, id, "hidden");
  if (!hidden.is_array()) bad(id, "hidden", "is not an array");
  std::size_t layers = 0;
  std::size_t dim = 0;
  if (!hidden.empty()) {
    if (!hidden[0].is_array() || hidden[0].empty() || !hidden[0][0].is_array()) {
      bad(id, "hidden", "is not a [m][n][d] array");
    }
    layers = hidden[0].size();
    dim = hidden[0][0].size();
  }
  t.hidden = HiddenTensor(layers, dim);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const auto& tok = hidden[i];
    if (!tok.is_array() || tok.size() != layers) {
      bad(id, "hidden", "token " + std::to_string(i) + " does not have " + std::to_string(layers) +
                            " layers");
    }
    LayerStates s(layers, dim);
    for (std::size_t j = 0; j < layers; ++j) {
      const auto& vec = tok[j];
      if (!vec.is_array() || vec.size() != dim) {
        bad(id, "hidden", "token " + std::to_string(i) + " layer " + std::to_string(j) +
                              " does not have " + std::to_string(dim) + " dims");
      }
      auto dst = s.layer(j);
      for (std::size_t k = 0; k < dim; ++k) {
        if (!vec[k].is_number()) bad(id, "hidden", "contains a non-number");
        dst[k] = vec[k].get<float>();
      }
    }
    t.hidden.append(s);
  }
  t.validate();
  return t;
}

void write_traces(std::ostream& out, const std::vector<GenerationTrace>& traces) {
  for (const auto& t : traces) out << trace_to_line(t) << '\n';
}

void write_traces(const std::filesystem::path& path, const std::vector<GenerationTrace>& traces) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_traces(out, traces);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::vector<GenerationTrace> read_traces(std::istream& in) {
  std::vector<GenerationTrace> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(trace_from_line(line, line_no));
  }
  return out;
}

std::vector<GenerationTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file '" + path.string() + "'");
  return read_traces(in);
}

std::string catalog_to_json(const SchemaCatalog& catalog) {
  nlohmann::json doc;
  doc["tables"] = nlohmann::json::array();
  for (const auto& t : catalog.tables()) {
    doc["tables"].push_back({{"name", t.name}, {"columns", t.columns}});
  }
  doc["vocabulary"] = nlohmann::json::array();
  for (const auto& tok : catalog.vocabulary().tokens()) {
    doc["vocabulary"].push_back({{"id", tok.id},
                                 {"text", tok.text},
                                 {"is_separator", tok.is_separator},
                                 {"is_eos", tok.is_eos}});
  }
  return doc.dump(2);
}

SchemaCatalog catalog_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    std::vector<TableSchema> tables;
    for (const auto& t : doc.at("tables")) {
      tables.push_back({t.at("name").get<std::string>(),
                        t.at("columns").get<std::vector<std::string>>()});
    }
    std::vector<Token> tokens;
    for (const auto& v : doc.at("vocabulary")) {
      tokens.push_back({v.at("id").get<TokenId>(), v.at("text").get<std::string>(),
                        v.value("is_separator", false), v.value("is_eos", false)});
    }
    return SchemaCatalog::create(std::move(tables), Vocabulary(std::move(tokens)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("catalog: ") + e.what());
  }
}

void write_catalog(const std::filesystem::path& path, const SchemaCatalog& catalog) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << catalog_to_json(catalog) << '\n';
}

SchemaCatalog read_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open catalog file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return catalog_from_json(ss.str());
}

std::filesystem::path catalog_sidecar_path(const std::filesystem::path& traces) {
  auto p = traces;
  p += ".catalog.json";
  return p;
}

void write_dataset(std::ostream& out, const BranchDataset& dataset) {
  out << "linkguard-dataset 1\n";
  out << "shape " << dataset.size() << ' ' << dataset.layers() << ' ' << dataset.dim() << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << static_cast<int>(dataset.labels()[i]);
    for (std::size_t j = 0; j < dataset.layers(); ++j) {
      for (float v : dataset.layer(j).row(i)) out << ' ' << format_real(v);
    }
    out << '\n';
  }
}

BranchDataset read_dataset(std::istream& in) {
  FlatReader r(in);
  r.expect("linkguard-dataset");
  const auto version = r.count();
  if (version != 1) throw FormatError("dataset: unsupported version " + std::to_string(version));
  r.expect("shape");
  const auto rows = r.count();
  const auto layers = r.count();
  const auto dim = r.count();
  BranchDataset ds(layers, dim);
  LayerStates s(layers, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto label = r.count();
    if (label > 1) throw FormatError("dataset: row " + std::to_string(i) + " has label other than 0/1");
    for (std::size_t j = 0; j < layers; ++j) {
      for (auto& v : s.layer(j)) v = static_cast<float>(r.real());
    }
    ds.add(s, static_cast<std::uint8_t>(label));
  }
  if (!r.peek_eof()) throw FormatError("dataset: trailing data after " + std::to_string(rows) + " rows");
  return ds;
}

void write_dataset(const std::filesystem::path& path, const BranchDataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_dataset(out, dataset);
}

BranchDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path.string() + "'");
  return read_dataset(in);
}

}  // namespace linkguard::core
