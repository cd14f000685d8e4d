// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "linkguard/common/error.hpp"
#include "linkguard/core/catalog.hpp"
#include "linkguard/core/trace.hpp"
#include "linkguard/core/trace_io.hpp"

using namespace linkguard;
using namespace linkguard::core;

namespace {

// Emits gt[i] at position i unless `wrong` overrides it. Overrides apply only
// while the committed prefix still matches gt.
class ScriptedModel : public Generator {
 public:
  ScriptedModel(std::vector<TokenId> gt, std::map<std::size_t, TokenId> wrong, std::size_t dim = 2)
      : gt_(std::move(gt)), wrong_(std::move(wrong)), dim_(dim) {}

  void reset() override { prefix_.clear(); }
  Step propose() override {
    const std::size_t i = prefix_.size();
    Step s;
    auto it = wrong_.find(i);
    s.token = it != wrong_.end() ? it->second : (i < gt_.size() ? gt_[i] : 99);
    s.hidden = LayerStates(2, dim_);
    s.hidden.layer(0)[0] = static_cast<float>(i);
    s.hidden.layer(1)[0] = it != wrong_.end() ? 1.0f : 0.0f;
    ++proposals;
    return s;
  }
  void commit(TokenId t) override { prefix_.push_back(t); }
  const std::vector<TokenId>& committed() const override { return prefix_; }

  std::size_t proposals = 0;

 private:
  std::vector<TokenId> gt_;
  std::map<std::size_t, TokenId> wrong_;
  std::size_t dim_;
  std::vector<TokenId> prefix_;
};

// Never converges: always proposes a token outside gt.
class StubbornModel : public Generator {
 public:
  void reset() override { prefix_.clear(); }
  Step propose() override { return {77, 1.0, LayerStates(1, 1), std::nullopt}; }
  void commit(TokenId t) override { prefix_.push_back(t); }
  const std::vector<TokenId>& committed() const override { return prefix_; }

 private:
  std::vector<TokenId> prefix_;
};

SchemaCatalog f1_catalog() {
  auto vocab = Vocabulary::from_pieces({"races", "lap", "Times", "drivers", "race", "Id", "name"});
  return SchemaCatalog::create({{"races", {"raceId", "name"}},
                                {"lapTimes", {"raceId", "lap"}},
                                {"drivers", {"name"}}},
                               vocab);
}

GenerationTrace random_trace(std::mt19937_64& rng, const std::string& id) {
  std::uniform_int_distribution<int> len(0, 6), small(1, 4), tok(0, 20), bit(0, 1);
  std::normal_distribution<float> val(0.0f, 3.0f);
  GenerationTrace t;
  t.id = id;
  t.question = "q \"" + id + "\" \\ \xc3\xa9";
  t.gt_tables = {"a", "b"};
  const int m = len(rng);
  const auto n = static_cast<std::size_t>(small(rng));
  const auto d = static_cast<std::size_t>(small(rng));
  for (int i = 0; i < m + 1; ++i) t.gt_tokens.push_back(tok(rng));
  t.hidden = HiddenTensor(n, d);
  for (int i = 0; i < m; ++i) {
    t.gen_tokens.push_back(tok(rng));
    t.labels.push_back(static_cast<std::uint8_t>(bit(rng)));
    LayerStates s(n, d);
    for (std::size_t j = 0; j < n; ++j)
      for (auto& v : s.layer(j)) v = val(rng) * std::pow(10.0f, static_cast<float>(small(rng) - 2));
    t.hidden.append(s);
  }
  if (m == 0) t.hidden = HiddenTensor();  // an empty [] carries no shape
  return t;
}

}  // namespace

TEST_CASE("vocabulary assigns ids in first-appearance order and validates") {
  auto v = Vocabulary::from_pieces({"b", "a", "b"});
  CHECK(v.size() == 5);
  CHECK(v.at(0).text == "b");
  CHECK(v.at(1).text == "a");
  CHECK(v.at(v.separator()).text == ",");
  CHECK(v.is_eos(v.eos()));
  CHECK_THROWS_AS(Vocabulary({{0, "a", false, false}, {1, ",", true, false}}), FormatError);
  CHECK_THROWS_AS(Vocabulary({{0, "a", false, true}, {0, "b", true, false}}), FormatError);
}

TEST_CASE("decompose prefers fewest tokens") {
  auto v = Vocabulary::from_pieces({"lap", "Times", "lapT", "imes", "l", "ap"});
  auto ids = v.decompose("lapTimes");
  REQUIRE(ids);
  CHECK(ids->size() == 2);
  CHECK(!v.decompose("xyz"));
}

TEST_CASE("catalog validation") {
  auto v = Vocabulary::from_pieces({"a", "b"});
  CHECK_THROWS_AS(SchemaCatalog::create({}, v), FormatError);
  CHECK_THROWS_AS(SchemaCatalog::create({{"a", {"b"}}, {"a", {"b"}}}, v), FormatError);
  CHECK_THROWS_AS(SchemaCatalog::create({{"a", {}}}, v), FormatError);
  CHECK_THROWS_AS(SchemaCatalog::create({{"c", {"a"}}}, v), FormatError);
  CHECK_THROWS_AS(SchemaCatalog::create({{"a", {"b", "b"}}}, v), FormatError);
  CHECK_NOTHROW(SchemaCatalog::create({{"ab", {"b", "ba"}}}, v));
}

TEST_CASE("catalog entities and linking tokens") {
  auto cat = f1_catalog();
  auto tables = cat.table_entities();
  CHECK(tables.size() == 3);
  CHECK(tables[1].tokens.size() == 2);
  std::vector<std::string> names{"drivers", "races"};
  auto toks = cat.linking_tokens(tables, names);
  CHECK(cat.vocabulary().text(toks) == "races,drivers<eos>");
  std::vector<std::string> sel{"lapTimes"};
  auto cols = cat.column_entities(sel);
  REQUIRE(cols.size() == 2);
  CHECK(cols[0].name == "lapTimes.raceId");
  CHECK(cat.vocabulary().text(cols[0].tokens) == "lapTimes.raceId");
}

TEST_CASE("find_branching_points: identity model has no branches") {
  std::vector<TokenId> gt{1, 2, 3, 4};
  ScriptedModel m(gt, {});
  auto r = find_branching_points(m, gt);
  CHECK(r.branches.empty());
  CHECK(r.labels == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK(r.gen_tokens == gt);
  CHECK(r.rounds == 1);
}

TEST_CASE("find_branching_points: two deviations forced back") {
  std::vector<TokenId> gt{1, 2, 3, 4};  // a b c d
  ScriptedModel m(gt, {{1, 9}, {3, 8}});
  auto r = find_branching_points(m, gt);
  CHECK(r.branches == std::vector<std::size_t>{1, 3});
  CHECK(r.labels == std::vector<std::uint8_t>{0, 1, 0, 1});
  CHECK(r.gen_tokens == std::vector<TokenId>{1, 9, 3, 8});
  CHECK(r.hidden.tokens() == 4);
  CHECK(r.hidden.at(1, 1)[0] == 1.0f);
  CHECK(r.hidden.at(2, 1)[0] == 0.0f);
}

TEST_CASE("find_branching_points: first-token deviation") {
  std::vector<TokenId> gt{5};
  ScriptedModel m(gt, {{0, 6}});
  auto r = find_branching_points(m, gt);
  CHECK(r.branches == std::vector<std::size_t>{0});
}

TEST_CASE("find_branching_points: round limit carries the partial replay") {
  std::vector<TokenId> gt{1, 2, 3};
  StubbornModel m;
  try {
    find_branching_points(m, gt, 2);
    FAIL("expected ReplayLimitError");
  } catch (const ReplayLimitError& e) {
    CHECK(e.partial().branches == std::vector<std::size_t>{0, 1});
    CHECK(e.partial().rounds == 2);
  }
  CHECK_THROWS_AS(find_branching_points(m, std::vector<TokenId>{}), PreconditionError);
}

TEST_CASE("property: forcing the branch indices reproduces gt") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(1, 12), tok(0, 30), coin(0, 3);
    std::vector<TokenId> gt(static_cast<std::size_t>(len(rng)));
    for (auto& t : gt) t = tok(rng);
    std::map<std::size_t, TokenId> wrong;
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (coin(rng) == 0) wrong[i] = gt[i] + 100;
    ScriptedModel m(gt, wrong);
    auto r = find_branching_points(m, gt);
    std::vector<std::size_t> expected;
    for (auto& [i, t] : wrong) expected.push_back(i);
    CHECK(r.branches == expected);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const bool is_branch = std::find(r.branches.begin(), r.branches.end(), i) != r.branches.end();
      CHECK(r.labels[i] == (is_branch ? 1 : 0));
    }
    // Force gt at the branches and replay the emissions.
    auto replayed = r.gen_tokens;
    for (auto b : r.branches) replayed[b] = gt[b];
    CHECK(replayed == gt);
  }
}

TEST_CASE("build_branch_dataset counts and warnings") {
  std::vector<TokenId> gt{1, 2, 3};
  ScriptedModel m(gt, {});
  auto t1 = make_trace("a", "q", {}, gt, find_branching_points(m, gt));
  auto ds = build_branch_dataset(std::vector<GenerationTrace>{t1});
  CHECK(ds.layers() == 2);
  CHECK(ds.layer(0).size() == 3);
  CHECK(ds.single_class());
  CHECK(ds.warnings.size() == 1);

  std::vector<TokenId> gt2{1, 2};
  std::vector<TokenId> gt4{1, 2, 3, 4};
  ScriptedModel m2(gt2, {{1, 7}});
  ScriptedModel m4(gt4, {});
  std::vector<GenerationTrace> two{make_trace("b", "q", {}, gt2, find_branching_points(m2, gt2)),
                                   make_trace("c", "q", {}, gt4, find_branching_points(m4, gt4))};
  auto ds2 = build_branch_dataset(two);
  CHECK(ds2.layer(0).size() == 6);
  CHECK(ds2.layer(1).size() == 6);
  CHECK(ds2.positives() == 1);
  CHECK(ds2.warnings.empty());

  ScriptedModel m3(gt, {}, 3);
  auto odd = make_trace("d", "q", {}, gt, find_branching_points(m3, gt));
  two.push_back(odd);
  CHECK_THROWS_AS(build_branch_dataset(two), FormatError);
}

TEST_CASE("split_dataset is stratified and deterministic") {
  BranchDataset ds(1, 1);
  for (int i = 0; i < 100; ++i) {
    LayerStates s(1, 1);
    s.layer(0)[0] = static_cast<float>(i);
    ds.add(s, i < 10 ? 1 : 0);
  }
  auto a = split_dataset(ds, 0.5, 7);
  auto b = split_dataset(ds, 0.5, 7);
  CHECK(a.calibration_rows == b.calibration_rows);
  CHECK(a.train.size() == 50);
  CHECK(a.calibration.size() == 50);
  CHECK(a.calibration.positives() >= 4);
  CHECK(a.calibration.positives() <= 6);
  CHECK(a.train.positives() + a.calibration.positives() == 10);
  std::vector<std::size_t> all = a.train_rows;
  all.insert(all.end(), a.calibration_rows.begin(), a.calibration_rows.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  auto c = split_dataset(ds, 0.5, 8);
  CHECK(c.calibration_rows != a.calibration_rows);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 7), PreconditionError);
  CHECK_THROWS_AS(split_dataset(ds, 0.0, 7), PreconditionError);
}

TEST_CASE("trace io round trip is bit exact") {
  std::mt19937_64 rng(5);
  std::vector<GenerationTrace> traces;
  for (int i = 0; i < 50; ++i) traces.push_back(random_trace(rng, "t" + std::to_string(i)));
  // Awkward float values.
  traces[0].hidden = HiddenTensor(1, 3);
  traces[0].gen_tokens = {1};
  traces[0].labels = {1};
  LayerStates s(1, 3);
  s.layer(0)[0] = 1.0e-38f;
  s.layer(0)[1] = 3.4028235e38f;
  s.layer(0)[2] = -0.1f;
  traces[0].hidden.append(s);
  std::stringstream ss;
  write_traces(ss, traces);
  auto back = read_traces(ss);
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) CHECK(back[i] == traces[i]);
}

TEST_CASE("trace io rejects inconsistent records") {
  std::stringstream empty;
  CHECK(read_traces(empty).empty());

  const std::string bad =
      R"({"id":"r7","question":"q","gt_tables":[],"gt_tokens":[1],"gen_tokens":[1,2],)"
      R"("labels":[0],"hidden":[[[0.5]],[[0.5]]]})";
  try {
    trace_from_line(bad, 1);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("labels") != std::string::npos);
    CHECK(std::string(e.what()).find("r7") != std::string::npos);
  }
  const std::string ragged =
      R"({"id":"r8","question":"q","gt_tables":[],"gt_tokens":[1],"gen_tokens":[1,2],)"
      R"("labels":[0,0],"hidden":[[[0.5]],[[0.5],[0.1]]]})";
  CHECK_THROWS_AS(trace_from_line(ragged, 1), FormatError);
  CHECK_THROWS_AS(trace_from_line("{not json", 3), FormatError);
  const std::string extra =
      R"({"id":"r9","question":"q","gt_tables":[],"gt_tokens":[],"gen_tokens":[],)"
      R"("labels":[],"hidden":[],"bonus":1})";
  CHECK_THROWS_AS(trace_from_line(extra, 1), FormatError);
}

TEST_CASE("catalog sidecar round trip") {
  auto cat = f1_catalog();
  auto back = catalog_from_json(catalog_to_json(cat));
  CHECK(back == cat);
  auto dir = std::filesystem::temp_directory_path() / "linkguard_test_core";
  std::filesystem::create_directories(dir);
  auto traces_path = dir / "t.jsonl";
  write_catalog(catalog_sidecar_path(traces_path), cat);
  CHECK(read_catalog(catalog_sidecar_path(traces_path)) == cat);
  std::filesystem::remove_all(dir);
}
