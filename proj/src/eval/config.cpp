// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/eval/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "linkguard/common/error.hpp"

namespace linkguard::eval {

namespace {

// Reads known keys of one section and rejects the rest.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw PreconditionError("config section '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw PreconditionError("config field '" + name_ + "." + key + "' has the wrong type");
    }
  }
  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw PreconditionError("unknown config field '" + name_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const sim::SimConfig& c) {
  return Json{{"tables", c.tables},
              {"min_columns", c.min_columns},
              {"max_columns", c.max_columns},
              {"confusability", c.confusability},
              {"layers", c.layers},
              {"dim", c.dim},
              {"separability", c.separability},
              {"layer_correlation", c.layer_correlation},
              {"p_err", c.p_err},
              {"max_branches", c.max_branches},
              {"surrogate_accuracy_tables", c.surrogate_accuracy_tables},
              {"surrogate_accuracy_columns", c.surrogate_accuracy_columns},
              {"min_gt_tables", c.min_gt_tables},
              {"max_gt_tables", c.max_gt_tables},
              {"min_gt_columns", c.min_gt_columns},
              {"max_gt_columns", c.max_gt_columns},
              {"seed", c.seed}};
}

void apply_json(const Json& j, sim::SimConfig& c) {
  Section s(j, "sim");
  s.get("tables", c.tables);
  s.get("min_columns", c.min_columns);
  s.get("max_columns", c.max_columns);
  s.get("confusability", c.confusability);
  s.get("layers", c.layers);
  s.get("dim", c.dim);
  s.get("separability", c.separability);
  s.get("layer_correlation", c.layer_correlation);
  s.get("p_err", c.p_err);
  s.get("max_branches", c.max_branches);
  s.get("surrogate_accuracy_tables", c.surrogate_accuracy_tables);
  s.get("surrogate_accuracy_columns", c.surrogate_accuracy_columns);
  s.get("min_gt_tables", c.min_gt_tables);
  s.get("max_gt_tables", c.max_gt_tables);
  s.get("min_gt_columns", c.min_gt_columns);
  s.get("max_gt_columns", c.max_gt_columns);
  s.get("seed", c.seed);
  s.finish();
}

Json to_json(const bpp::Hyperparams& h) {
  Json j{{"hidden_width", h.hidden_width},
         {"epochs", h.epochs},
         {"learning_rate", h.learning_rate},
         {"weighting", h.weighting == bpp::ClassWeighting::inverse_frequency ? "inverse_frequency"
                                                                             : "explicit"},
         {"class_weights", h.class_weights},
         {"seed", h.seed}};
  return j;
}

void apply_json(const Json& j, bpp::Hyperparams& h) {
  Section s(j, "hyperparams");
  s.get("hidden_width", h.hidden_width);
  s.get("epochs", h.epochs);
  s.get("learning_rate", h.learning_rate);
  std::string w = h.weighting == bpp::ClassWeighting::inverse_frequency ? "inverse_frequency"
                                                                        : "explicit";
  s.get("weighting", w);
  if (w == "inverse_frequency") {
    h.weighting = bpp::ClassWeighting::inverse_frequency;
  } else if (w == "explicit") {
    h.weighting = bpp::ClassWeighting::explicit_weights;
  } else {
    throw PreconditionError("config field 'hyperparams.weighting' must be inverse_frequency or explicit");
  }
  s.get("class_weights", h.class_weights);
  s.get("seed", h.seed);
  s.finish();
  if (h.hidden_width == 0) throw PreconditionError("config field 'hyperparams.hidden_width' must be positive");
  if (!(h.learning_rate > 0.0)) throw PreconditionError("config field 'hyperparams.learning_rate' must be positive");
}

Json to_json(const conformal::CalibrationOptions& c) {
  return Json{{"alpha", c.alpha},
              {"k", c.k},
              {"mode", conformal::mode_name(c.mode)},
              {"neighbors", c.neighbors},
              {"tau", c.tau}};
}

void apply_json(const Json& j, conformal::CalibrationOptions& c) {
  Section s(j, "calibration");
  s.get("alpha", c.alpha);
  s.get("k", c.k);
  std::string mode = conformal::mode_name(c.mode);
  s.get("mode", mode);
  try {
    c.mode = conformal::parse_mode(mode);
  } catch (const std::exception&) {
    throw PreconditionError("config field 'calibration.mode' must be exchangeable or weighted");
  }
  s.get("neighbors", c.neighbors);
  s.get("tau", c.tau);
  s.finish();
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw PreconditionError("config field 'calibration.alpha' must lie in (0,1)");
  if (c.k == 0) throw PreconditionError("config field 'calibration.k' must be positive");
}

Json to_json(const PipelineConfig& c) {
  return Json{{"train_instances", c.train_instances},
              {"calib_fraction", c.calib_fraction},
              {"split_seed", c.split_seed},
              {"test_instances", c.test_instances},
              {"train_columns", c.train_columns}};
}

Json to_json(const EvalConfig& c) {
  Json runs = Json::array();
  for (const auto& r : c.runs) {
    runs.push_back({{"policy", linker::policy_name(r.policy)},
                    {"detector", detector_kind_name(r.detector)}});
  }
  return Json{{"instances", c.instances},
              {"first_index", c.first_index},
              {"runs", runs},
              {"joint", c.joint},
              {"seed", c.seed}};
}

void apply_json(const Json& j, EvalConfig& c) {
  Section s(j, "eval");
  s.get("instances", c.instances);
  s.get("first_index", c.first_index);
  if (const Json* runs = s.child("runs")) {
    if (!runs->is_array()) throw PreconditionError("config field 'eval.runs' must be an array");
    c.runs.clear();
    for (const auto& r : *runs) {
      Section rs(r, "eval.runs[]");
      std::string policy = "abstain", detector = "mbpp";
      rs.get("policy", policy);
      rs.get("detector", detector);
      rs.finish();
      try {
        c.runs.push_back({linker::parse_policy(policy), parse_detector_kind(detector)});
      } catch (const std::exception& e) {
        throw PreconditionError(std::string("config field 'eval.runs': ") + e.what());
      }
    }
  }
  s.get("joint", c.joint);
  s.get("seed", c.seed);
  s.finish();
}

Json to_json(const MonteCarloConfig& c) {
  return Json{{"trials", c.trials},
              {"k", c.k},
              {"alpha", c.alpha},
              {"thetas", c.thetas},
              {"spurious", c.spurious},
              {"mixture_share", c.mixture_share},
              {"adversarial_trials", c.adversarial_trials},
              {"seed", c.seed}};
}

void apply_json(const Json& j, MonteCarloConfig& c) {
  Section s(j, "theorems");
  s.get("trials", c.trials);
  s.get("k", c.k);
  s.get("alpha", c.alpha);
  s.get("thetas", c.thetas);
  s.get("spurious", c.spurious);
  s.get("mixture_share", c.mixture_share);
  s.get("adversarial_trials", c.adversarial_trials);
  s.get("seed", c.seed);
  s.finish();
  if (c.k == 0) throw PreconditionError("config field 'theorems.k' must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw PreconditionError("config field 'theorems.alpha' must lie in (0,1)");
  for (double t : c.thetas) {
    if (!(t >= 0.0 && t < 1.0)) throw PreconditionError("config field 'theorems.thetas' entries must lie in [0,1)");
  }
}

Json to_json(const CoverageSweepConfig& c) {
  return Json{{"alphas", c.alphas},       {"n_train", c.n_train},
              {"n_cal", c.n_cal},         {"n_test", c.n_test},
              {"dim", c.dim},             {"separation", c.separation},
              {"positive_rate", c.positive_rate}, {"seed", c.seed}};
}

void apply_json(const Json& j, CoverageSweepConfig& c) {
  Section s(j, "coverage");
  s.get("alphas", c.alphas);
  s.get("n_train", c.n_train);
  s.get("n_cal", c.n_cal);
  s.get("n_test", c.n_test);
  s.get("dim", c.dim);
  s.get("separation", c.separation);
  s.get("positive_rate", c.positive_rate);
  s.get("seed", c.seed);
  s.finish();
  for (double a : c.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw PreconditionError("config field 'coverage.alphas' entries must lie in (0,1)");
  }
  if (c.n_cal == 0 || c.n_test == 0 || c.n_train == 0 || c.dim == 0) {
    throw PreconditionError("config section 'coverage': sizes must be positive");
  }
}

Json to_json(const RunConfig& c) {
  return Json{{"sim", to_json(c.pipeline.sim)},
              {"hyperparams", to_json(c.pipeline.hp)},
              {"calibration", to_json(c.pipeline.calibration)},
              {"pipeline", to_json(c.pipeline)},
              {"eval", to_json(c.eval)},
              {"theorems", to_json(c.theorems)},
              {"coverage", to_json(c.coverage)}};
}

void apply_json(const Json& j, RunConfig& c) {
  Section s(j, "<root>");
  if (const Json* x = s.child("sim")) apply_json(*x, c.pipeline.sim);
  if (const Json* x = s.child("hyperparams")) apply_json(*x, c.pipeline.hp);
  if (const Json* x = s.child("calibration")) apply_json(*x, c.pipeline.calibration);
  if (const Json* x = s.child("pipeline")) {
    Section p(*x, "pipeline");
    p.get("train_instances", c.pipeline.train_instances);
    p.get("calib_fraction", c.pipeline.calib_fraction);
    p.get("split_seed", c.pipeline.split_seed);
    p.get("test_instances", c.pipeline.test_instances);
    p.get("train_columns", c.pipeline.train_columns);
    p.finish();
  }
  if (const Json* x = s.child("eval")) apply_json(*x, c.eval);
  if (const Json* x = s.child("theorems")) apply_json(*x, c.theorems);
  if (const Json* x = s.child("coverage")) apply_json(*x, c.coverage);
  s.finish();
  c.pipeline.sim.validate();
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  apply_json(j, c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace linkguard::eval
