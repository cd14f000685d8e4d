// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "linkguard/common/seed.hpp"
#include "linkguard/core/catalog.hpp"
#include "linkguard/core/trace.hpp"
#include "linkguard/linker/session.hpp"

namespace linkguard::sim {

struct SimConfig {
  std::size_t tables = 10;
  std::size_t min_columns = 3;
  std::size_t max_columns = 6;
  // Fraction of names that share a leading piece with another name.
  double confusability = 0.5;
  std::size_t layers = 8;
  std::size_t dim = 8;
  // Per-layer mean shift of branch hidden states (Euclidean norm).
  std::vector<double> separability{0.0, 0.0, 3.0, 3.25, 3.5, 3.75, 4.0, 4.25};
  // Share of each layer's unit noise that is common to all layers of a step.
  double layer_correlation = 0.5;
  double p_err = 0.06;
  std::size_t max_branches = 3;
  double surrogate_accuracy_tables = 0.9237;
  double surrogate_accuracy_columns = 0.9406;
  std::size_t min_gt_tables = 1;
  std::size_t max_gt_tables = 3;
  std::size_t min_gt_columns = 1;
  std::size_t max_gt_columns = 3;
  std::uint64_t seed = 1;

  // Throws PreconditionError naming the offending field.
  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

core::SchemaCatalog generate_catalog(const SimConfig& config);

struct SimInstance {
  std::string id;
  std::string question;
  std::vector<std::string> gt_tables;   // catalog order
  std::vector<std::string> gt_columns;  // "table.column", catalog order
  std::vector<std::size_t> planted;     // table-stage branch positions under forcing
  std::uint64_t seed = 0;

  bool operator==(const SimInstance&) const = default;
};

std::vector<SimInstance> generate_instances(const SimConfig& config,
                                            const core::SchemaCatalog& catalog, std::size_t count,
                                            std::size_t first_index = 0);

std::uint64_t stage_seed(const SimInstance& instance, linker::Stage stage);

// Constrained generator with planted substitution errors. Its next token is a
// pure function of the committed prefix and (seed, position), so rewinding to
// any prefix reproduces the same continuation.
class SimGenerator : public core::Generator {
 public:
  SimGenerator(core::EntitySet entities, core::Vocabulary vocabulary,
               std::vector<std::string> gt, const SimConfig& config, std::uint64_t seed);

  void reset() override;
  core::Step propose() override;
  void commit(core::TokenId token) override;
  const std::vector<core::TokenId>& committed() const override { return prefix_; }

  struct Plan {
    core::TokenId intended = 0;
    bool name_token = false;
    std::vector<core::TokenId> alternatives;  // substitution errors that leave gt
  };
  Plan plan(std::span<const core::TokenId> prefix) const;
  std::size_t errors_committed() const { return errors_; }

 private:
  struct Decision {
    core::TokenId token = 0;
    bool error = false;
  };
  Decision decide(std::size_t position, const Plan& plan) const;

  core::EntitySet entities_;
  core::Vocabulary vocabulary_;
  std::set<std::size_t> gt_;  // entity indices
  std::vector<double> shift_;
  double rho_;
  std::size_t dim_;
  double p_err_;
  std::size_t max_branches_;
  std::uint64_t seed_;
  std::vector<core::TokenId> prefix_;
  std::size_t errors_ = 0;
};

// Everything needed to run one stage of one instance.
linker::StageInput stage_input(const core::SchemaCatalog& catalog, const SimInstance& instance,
                               linker::Stage stage,
                               const std::vector<std::string>& column_tables = {});
std::vector<std::string> stage_gt(const SimInstance& instance, const linker::StageInput& input);
SimGenerator make_generator(const core::SchemaCatalog& catalog, const SimConfig& config,
                            const SimInstance& instance, linker::Stage stage,
                            const std::vector<std::string>& column_tables = {});

// Teacher-forcing replay of one stage into a trace record.
core::GenerationTrace produce_trace(const core::SchemaCatalog& catalog, const SimConfig& config,
                                    const SimInstance& instance, linker::Stage stage);
std::vector<core::GenerationTrace> produce_traces(const core::SchemaCatalog& catalog,
                                                  const SimConfig& config,
                                                  const std::vector<SimInstance>& instances,
                                                  linker::Stage stage);

// Returns `truth` with probability `accuracy`, else its negation, as the
// literal verdict string.
std::string surrogate_answer(bool truth, double accuracy, Rng& rng);

// Surrogate with a fixed accuracy whose randomness comes from the query seed.
class SimSurrogate : public linker::SurrogateFilter {
 public:
  SimSurrogate(std::vector<std::string> gt, double accuracy)
      : gt_(gt.begin(), gt.end()), accuracy_(accuracy) {}
  std::string judge(const linker::SurrogateQuery& query) override;

 private:
  std::set<std::string> gt_;
  double accuracy_;
};

// Answers from the ground truth: relevance is gt membership; corrections
// name the first gt entity not yet settled in the linking.
class OracleResponder : public linker::Responder {
 public:
  explicit OracleResponder(std::vector<std::string> gt) : gt_(std::move(gt)) {}
  bool relevant(const std::string& entity, const linker::LinkingSession& session) override;
  std::string provide_correct(linker::QuestionKind kind,
                              const linker::LinkingSession& session) override;

 private:
  std::vector<std::string> gt_;
};

}  // namespace linkguard::sim
