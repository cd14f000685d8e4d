// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/linker/session.hpp"

#include <algorithm>
#include <cctype>
#include <exception>

#include "linkguard/common/error.hpp"
#include "linkguard/common/seed.hpp"

namespace linkguard::linker {

std::string stage_name(Stage s) { return s == Stage::columns ? "columns" : "tables"; }

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::none: return "none";
    case Policy::abstain: return "abstain";
    case Policy::surrogate: return "surrogate";
    case Policy::human: return "human";
  }
  return "none";
}

Policy parse_policy(const std::string& name) {
  if (name == "none") return Policy::none;
  if (name == "abstain") return Policy::abstain;
  if (name == "surrogate") return Policy::surrogate;
  if (name == "human") return Policy::human;
  throw PreconditionError("unknown policy '" + name +
                          "' (expected none, abstain, surrogate or human)");
}

std::string status_name(Status s) {
  switch (s) {
    case Status::running: return "running";
    case Status::awaiting_answer: return "awaiting_answer";
    case Status::done: return "done";
    case Status::abstained: return "abstained";
  }
  return "running";
}

std::string question_kind_name(QuestionKind k) {
  switch (k) {
    case QuestionKind::confirm_table: return "confirm_table";
    case QuestionKind::confirm_column: return "confirm_column";
    case QuestionKind::request_table: return "request_table";
    case QuestionKind::request_column: return "request_column";
  }
  return "confirm_table";
}

std::string render_surrogate_prompt(const SurrogateQuery& q) {
  const std::string noun = q.stage == Stage::columns ? "column" : "table";
  std::string names;
  for (std::size_t i = 0; i < q.candidates.size(); ++i) {
    if (i) names += ", ";
    names += q.candidates[i];
  }
  return "Question: " + q.question + "\n" + "Candidate " + noun + ": " + names + "\n" +
         "Is the " + noun + " relevant to the question? Answer True or False.";
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<bool> parse_yes_no(const std::string& answer) {
  const auto a = lower(answer);
  if (a == "yes" || a == "y" || a == "true") return true;
  if (a == "no" || a == "n" || a == "false") return false;
  return std::nullopt;
}

}  // namespace

LinkingSession::LinkingSession(std::string question, Stage stage, core::EntitySet entities,
                               core::Vocabulary vocabulary, core::Generator& model,
                               Detector& detector, SessionOptions options,
                               SurrogateFilter* surrogate)
    : question_(std::move(question)),
      stage_(stage),
      entities_(std::move(entities)),
      vocabulary_(std::move(vocabulary)),
      model_(model),
      detector_(detector),
      options_(options),
      surrogate_(surrogate) {
  model_.reset();
}

std::vector<std::string> LinkingSession::partial_linking() const {
  return decode(model_.committed(), entities_, vocabulary_).names();
}

std::vector<std::string> LinkingSession::settled_linking() const {
  if (pending_ && (pending_->kind == QuestionKind::request_table ||
                   pending_->kind == QuestionKind::request_column)) {
    const auto& x = model_.committed();
    return decode(std::span(x).first(std::min(trace_.first_begin, x.size())), entities_,
                  vocabulary_)
        .names();
  }
  return partial_linking();
}

SessionOutcome LinkingSession::outcome() const {
  SessionOutcome o;
  o.status = status_;
  o.linking = partial_linking();
  o.tokens = model_.committed();
  o.fired = fired_;
  o.fires = fires_;
  o.transcript = transcript_;
  o.corrections = corrections_;
  o.abstain_reason = abstain_reason_;
  return o;
}

void LinkingSession::finish_if_eos() {
  const auto& x = model_.committed();
  if (!x.empty() && vocabulary_.is_eos(x.back())) status_ = Status::done;
}

void LinkingSession::abstain(std::string reason, std::optional<std::size_t> cut) {
  if (cut && *cut < model_.committed().size()) {
    // The flagged token and anything generated after it are withdrawn.
    std::vector<core::TokenId> keep(model_.committed().begin(),
                                    model_.committed().begin() + static_cast<std::ptrdiff_t>(*cut));
    core::rewind(model_, keep);
    fired_.resize(*cut);
  }
  status_ = Status::abstained;
  abstain_reason_ = std::move(reason);
  pending_.reset();
}

void LinkingSession::resolve(const std::string& resolution) {
  if (!fires_.empty()) fires_.back().resolution = resolution;
}

void LinkingSession::advance() {
  while (status_ == Status::running) {
    const std::size_t pos = model_.committed().size();
    if (pos >= options_.max_tokens) {
      abstain("generation exceeded " + std::to_string(options_.max_tokens) + " tokens");
      return;
    }
    core::Step step;
    try {
      step = model_.propose();
    } catch (const std::exception& e) {
      throw SessionError(std::string("model failed: ") + e.what());
    }
    if (!vocabulary_.contains(step.token)) {
      throw SessionError("model proposed token " + std::to_string(step.token) +
                         " outside the vocabulary");
    }
    const bool fire = options_.policy != Policy::none && detector_.fires(step, pos, options_.seed);
    model_.commit(step.token);
    fired_.push_back(fire ? 1 : 0);
    if (fire) {
      on_fire(pos);
    } else {
      finish_if_eos();
    }
  }
}

void LinkingSession::on_fire(std::size_t position) {
  if (options_.policy == Policy::abstain) {
    fires_.push_back({position, {}, "abstained"});
    abstain("branching point detected at token " + std::to_string(position), position);
    return;
  }
  trace_ = trace_back(model_, entities_, vocabulary_, options_.max_tokens);
  fired_.resize(model_.committed().size(), 0);
  fires_.push_back({position, trace_.candidates, ""});
  if (trace_.candidates.empty()) {
    resolve("continued");
    finish_if_eos();
    return;
  }

  if (options_.policy == Policy::surrogate) {
    if (!surrogate_) {
      resolve("abstained");
      abstain("surrogate unavailable", position);
      return;
    }
    SurrogateQuery q{question_, stage_, trace_.candidates, position,
                     derive_seed(options_.seed, {position, 0x5u})};
    std::string verdict;
    try {
      verdict = surrogate_->judge(q);
    } catch (const std::exception& e) {
      resolve("abstained");
      abstain(std::string("surrogate unavailable: ") + e.what(), position);
      return;
    }
    if (verdict == "True") {
      resolve("continued");
      finish_if_eos();
    } else if (verdict == "False") {
      resolve("abstained");
      abstain("surrogate judged " + trace_.candidates.front() + " irrelevant at token " +
              std::to_string(position),
              position);
    } else {
      resolve("abstained");
      abstain("surrogate returned '" + verdict + "' instead of True/False", position);
    }
    return;
  }

  // Human feedback.
  confirm_index_ = 0;
  reprompted_ = false;
  ask_next_confirm();
}

void LinkingSession::ask_next_confirm() {
  const auto& subject = trace_.candidates[confirm_index_];
  const bool col = stage_ == Stage::columns;
  Question q;
  q.id = next_question_id_++;
  q.kind = col ? QuestionKind::confirm_column : QuestionKind::confirm_table;
  q.subject = subject;
  q.context = "Is the " + std::string(col ? "column" : "table") + " '" + subject +
              "' relevant to the question \"" + question_ + "\"? (yes/no)";
  pending_ = q;
  status_ = Status::awaiting_answer;
}

void LinkingSession::ask_request(const std::string& note) {
  const bool col = stage_ == Stage::columns;
  Question q;
  q.id = next_question_id_++;
  q.kind = col ? QuestionKind::request_column : QuestionKind::request_table;
  q.context = note + (note.empty() ? "" : " ") + "Please provide the correct " +
              std::string(col ? "column" : "table") + " name for the question \"" +
              question_ + "\".";
  pending_ = q;
  status_ = Status::awaiting_answer;
}

void LinkingSession::answer(std::uint64_t question_id, const std::string& answer) {
  if (status_ != Status::awaiting_answer || !pending_) {
    throw SessionError("session is " + status_name(status_) + "; no question is pending");
  }
  if (pending_->id != question_id) {
    throw SessionError("question " + std::to_string(question_id) +
                       " is not pending (pending question is " + std::to_string(pending_->id) +
                       ")");
  }
  const Question q = *pending_;
  const bool confirm =
      q.kind == QuestionKind::confirm_table || q.kind == QuestionKind::confirm_column;

  if (confirm) {
    const auto yes = parse_yes_no(answer);
    if (!yes) throw PreconditionError("answer to a confirmation must be yes or no");
    transcript_.push_back({q, answer});
    pending_.reset();
    if (*yes) {
      resolve("affirmed");
      status_ = Status::running;
      finish_if_eos();
    } else if (++confirm_index_ < trace_.candidates.size()) {
      ask_next_confirm();
    } else {
      ask_request("");
    }
    advance();
    return;
  }

  transcript_.push_back({q, answer});
  const auto settled = settled_linking();
  const bool known = entities_.contains(answer);
  const bool repeated = std::find(settled.begin(), settled.end(), answer) != settled.end();
  pending_.reset();
  if (!known || repeated) {
    const std::string note = "'" + answer + "' is " +
                             (known ? "already part of the linking." : "not in the schema.");
    if (!reprompted_) {
      reprompted_ = true;
      // Keeps first_begin valid for settled_linking while re-asking.
      ask_request(note);
      return;
    }
    resolve("abstained");
    abstain("invalid correction " + note, fires_.back().position);
    return;
  }

  // Teacher forcing: drop the implicated entity and force the supplied one.
  const auto& x = model_.committed();
  std::vector<core::TokenId> prefix(x.begin(),
                                    x.begin() + static_cast<std::ptrdiff_t>(trace_.first_begin));
  core::rewind(model_, prefix);
  for (auto t : entities_[*entities_.index_of(answer)].tokens) model_.commit(t);
  fired_.resize(trace_.first_begin);
  fired_.resize(model_.committed().size(), 0);
  ++corrections_;
  resolve("corrected:" + answer);
  status_ = Status::running;
  advance();
}

SessionOutcome run_session(const StageInput& input, core::Generator& model, Detector& detector,
                           SessionOptions options, SurrogateFilter* surrogate,
                           Responder* responder) {
  LinkingSession s(input.question, input.stage, input.entities, input.vocabulary, model, detector,
                   options, surrogate);
  s.advance();
  while (s.status() == Status::awaiting_answer) {
    if (!responder) throw PreconditionError("human policy requires a responder");
    const Question q = *s.pending();
    std::string a;
    if (q.kind == QuestionKind::confirm_table || q.kind == QuestionKind::confirm_column) {
      a = responder->relevant(q.subject, s) ? "yes" : "no";
    } else {
      a = responder->provide_correct(q.kind, s);
    }
    s.answer(q.id, a);
  }
  return s.outcome();
}

SessionOutcome run_policy_none(const StageInput& input, core::Generator& model,
                               std::uint64_t seed) {
  NeverDetector never;
  return run_session(input, model, never, {Policy::none, seed});
}

SessionOutcome run_policy_abstain(const StageInput& input, core::Generator& model,
                                  Detector& detector, std::uint64_t seed) {
  return run_session(input, model, detector, {Policy::abstain, seed});
}

SessionOutcome run_policy_surrogate(const StageInput& input, core::Generator& model,
                                    Detector& detector, SurrogateFilter& surrogate,
                                    std::uint64_t seed) {
  return run_session(input, model, detector, {Policy::surrogate, seed}, &surrogate);
}

SessionOutcome run_policy_human(const StageInput& input, core::Generator& model,
                                Detector& detector, Responder& responder, std::uint64_t seed) {
  return run_session(input, model, detector, {Policy::human, seed}, nullptr, &responder);
}

JointOutcome link_tables_then_columns(
    const StageInput& tables, core::Generator& table_model, Detector& table_detector,
    Policy policy, std::uint64_t seed,
    const std::function<ColumnStage(const std::vector<std::string>&)>& make_column_stage,
    SurrogateFilter* table_surrogate, Responder* table_responder) {
  JointOutcome j;
  j.tables = run_session(tables, table_model, table_detector, {policy, seed}, table_surrogate,
                         table_responder);
  if (j.tables.status == Status::abstained) {
    j.status = Status::abstained;
    j.abstain_reason = "table stage: " + j.tables.abstain_reason;
    return j;
  }
  j.predicted_tables = j.tables.linking;
  ColumnStage cs = make_column_stage(j.predicted_tables);
  if (!cs.model || !cs.detector) throw PreconditionError("column stage is missing a model or detector");
  j.columns = run_session(cs.input, *cs.model, *cs.detector, {policy, derive_seed(seed, {1})},
                          cs.surrogate, cs.responder);
  if (j.columns->status == Status::abstained) {
    j.status = Status::abstained;
    j.abstain_reason = "column stage: " + j.columns->abstain_reason;
    return j;
  }
  j.predicted_columns = j.columns->linking;
  j.status = Status::done;
  return j;
}

}  // namespace linkguard::linker
