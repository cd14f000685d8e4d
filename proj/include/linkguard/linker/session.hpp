// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "linkguard/core/catalog.hpp"
#include "linkguard/core/trace.hpp"
#include "linkguard/linker/decode.hpp"
#include "linkguard/linker/detector.hpp"

namespace linkguard::linker {

enum class Stage { tables, columns };
enum class Policy { none, abstain, surrogate, human };
enum class Status { running, awaiting_answer, done, abstained };
enum class QuestionKind { confirm_table, confirm_column, request_table, request_column };

std::string stage_name(Stage s);
std::string policy_name(Policy p);
Policy parse_policy(const std::string& name);
std::string status_name(Status s);
std::string question_kind_name(QuestionKind k);

struct Question {
  std::uint64_t id = 0;
  QuestionKind kind = QuestionKind::confirm_table;
  std::string subject;  // entity asked about; empty for requests
  std::string context;  // human-readable prompt

  bool operator==(const Question&) const = default;
};

struct Exchange {
  Question question;
  std::string answer;
  bool operator==(const Exchange&) const = default;
};

struct FireEvent {
  std::size_t position = 0;
  std::vector<std::string> candidates;
  std::string resolution;  // continued | abstained | affirmed | corrected | ...
  bool operator==(const FireEvent&) const = default;
};

// Input to a surrogate relevance filter.
struct SurrogateQuery {
  std::string question;
  Stage stage = Stage::tables;
  std::vector<std::string> candidates;
  std::size_t position = 0;
  std::uint64_t seed = 0;  // per-query stream for stochastic filters
};

// Relevance classifier standing in for a human; answers exactly "True" or
// "False". May throw when unavailable.
class SurrogateFilter {
 public:
  virtual ~SurrogateFilter() = default;
  virtual std::string judge(const SurrogateQuery& query) = 0;
};

// Prompt shape for an external surrogate model.
std::string render_surrogate_prompt(const SurrogateQuery& query);

class LinkingSession;

// Answers the questions a human-feedback session asks.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual bool relevant(const std::string& entity, const LinkingSession& session) = 0;
  virtual std::string provide_correct(QuestionKind kind, const LinkingSession& session) = 0;
};

struct SessionOptions {
  Policy policy = Policy::abstain;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 512;
};

struct SessionOutcome {
  Status status = Status::running;
  std::vector<std::string> linking;  // decoded entities, emission order
  std::vector<core::TokenId> tokens;
  std::vector<std::uint8_t> fired;   // per emitted token
  std::vector<FireEvent> fires;
  std::vector<Exchange> transcript;
  std::size_t corrections = 0;
  std::string abstain_reason;

  bool operator==(const SessionOutcome&) const = default;
};

// One constrained linking generation with branching detection and a
// resolution policy. Sequential; the caller owns model and detector, which
// must outlive the session.
class LinkingSession {
 public:
  LinkingSession(std::string question, Stage stage, core::EntitySet entities,
                 core::Vocabulary vocabulary, core::Generator& model, Detector& detector,
                 SessionOptions options, SurrogateFilter* surrogate = nullptr);

  // Runs until the session needs an answer or ends.
  void advance();

  // Throws SessionError when `question_id` is not the pending question or the
  // session is not awaiting an answer; state is unchanged in that case.
  void answer(std::uint64_t question_id, const std::string& answer);

  Status status() const { return status_; }
  bool terminal() const { return status_ == Status::done || status_ == Status::abstained; }
  const std::optional<Question>& pending() const { return pending_; }
  const std::string& question() const { return question_; }
  Stage stage() const { return stage_; }
  const core::EntitySet& entities() const { return entities_; }
  const core::Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<core::TokenId>& tokens() const { return model_.committed(); }
  std::vector<std::string> partial_linking() const;
  // Entities already emitted before the rollback point of the current fire.
  std::vector<std::string> settled_linking() const;
  SessionOutcome outcome() const;

 private:
  void finish_if_eos();
  void on_fire(std::size_t position);
  void ask_next_confirm();
  void ask_request(const std::string& note);
  // `cut` withdraws the tokens from that position on.
  void abstain(std::string reason, std::optional<std::size_t> cut = std::nullopt);
  void resolve(const std::string& resolution);

  std::string question_;
  Stage stage_;
  core::EntitySet entities_;
  core::Vocabulary vocabulary_;
  core::Generator& model_;
  Detector& detector_;
  SessionOptions options_;
  SurrogateFilter* surrogate_;

  Status status_ = Status::running;
  std::optional<Question> pending_;
  std::uint64_t next_question_id_ = 1;
  std::vector<std::uint8_t> fired_;
  std::vector<FireEvent> fires_;
  std::vector<Exchange> transcript_;
  std::size_t corrections_ = 0;
  std::string abstain_reason_;

  // Current fire being resolved with the human.
  TraceBack trace_;
  std::size_t confirm_index_ = 0;
  bool reprompted_ = false;
};

// A linking stage ready to run: what the policies need besides the model.
struct StageInput {
  std::string question;
  Stage stage = Stage::tables;
  core::EntitySet entities;
  core::Vocabulary vocabulary;
};

SessionOutcome run_session(const StageInput& input, core::Generator& model, Detector& detector,
                           SessionOptions options, SurrogateFilter* surrogate = nullptr,
                           Responder* responder = nullptr);

SessionOutcome run_policy_none(const StageInput& input, core::Generator& model,
                               std::uint64_t seed);
SessionOutcome run_policy_abstain(const StageInput& input, core::Generator& model,
                                  Detector& detector, std::uint64_t seed);
SessionOutcome run_policy_surrogate(const StageInput& input, core::Generator& model,
                                    Detector& detector, SurrogateFilter& surrogate,
                                    std::uint64_t seed);
SessionOutcome run_policy_human(const StageInput& input, core::Generator& model,
                                Detector& detector, Responder& responder, std::uint64_t seed);

// Column stage factory: given the tables predicted by the table stage, build
// the column-stage input, model and detector. Returning nullopt skips it.
struct ColumnStage {
  StageInput input;
  core::Generator* model = nullptr;
  Detector* detector = nullptr;
  Responder* responder = nullptr;
  SurrogateFilter* surrogate = nullptr;
};

struct JointOutcome {
  Status status = Status::running;
  SessionOutcome tables;
  std::optional<SessionOutcome> columns;
  std::vector<std::string> predicted_tables;
  std::vector<std::string> predicted_columns;  // qualified names
  std::string abstain_reason;
};

// Runs the table stage, then the column stage over the predicted tables.
// Abstains if either stage abstains; the column stage is skipped when the
// table stage abstains.
JointOutcome link_tables_then_columns(
    const StageInput& tables, core::Generator& table_model, Detector& table_detector,
    Policy policy, std::uint64_t seed,
    const std::function<ColumnStage(const std::vector<std::string>&)>& make_column_stage,
    SurrogateFilter* table_surrogate = nullptr, Responder* table_responder = nullptr);

}  // namespace linkguard::linker
