// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

#include "eelab/bench.hpp"
#include "eelab/parallel.hpp"

namespace eelab::bench {

using nlohmann::ordered_json;

std::string Policy::label() const {
  switch (kind) {
    case PolicyKind::Full: return "full";
    case PolicyKind::Fixed: return exit_layer ? "fixed(" + std::to_string(*exit_layer) + ")" : "fixed(-)";
    case PolicyKind::Dynamic: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "dynamic(%g)", threshold);
      return buf;
    }
  }
  return "?";
}

std::string_view missing_name(Missing m) {
  switch (m) {
    case Missing::NoData: return "no_data";
    case Missing::NoExitLayer: return "no_exit_layer";
    case Missing::None: break;
  }
  return "";
}

namespace {

std::optional<double> mean_of(const std::vector<ClassResult>& rows, std::optional<double> ClassResult::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      sum += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct Outcome {
  bool correct = false;
  double layer_fraction = 0.0;
  double wall_ms = 0.0;
};

}  // namespace

EvalResult evaluate(const model::LayerStack& model, std::span<const LabeledExample> eval_split, const TaskSpec& task,
                    const Policy& policy, const EvalOptions& options) {
  const int n_layers = model.n_layers();
  if (policy.kind == PolicyKind::Fixed && policy.exit_layer &&
      (*policy.exit_layer < 1 || *policy.exit_layer > n_layers)) {
    throw DataError("exit layer " + std::to_string(*policy.exit_layer) + " outside [1, " + std::to_string(n_layers) +
                    "]");
  }
  exit::MatchSpec spec = task.match_spec;
  if (policy.kind == PolicyKind::Dynamic) spec.threshold = policy.threshold;
  const exit::Matcher matcher(spec);
  const bool no_layer = policy.kind == PolicyKind::Fixed && !policy.exit_layer;

  std::vector<Outcome> outcomes(eval_split.size());
  if (!no_layer) {
    parallel_for(eval_split.size(), options.jobs, [&](std::size_t i) {
      const auto& ex = eval_split[i];
      const auto input = task.make_input(ex);
      exit::ExitDecision d;
      switch (policy.kind) {
        case PolicyKind::Full: d = exit::run_fixed_exit(model, input, matcher, n_layers); break;
        case PolicyKind::Fixed: d = exit::run_fixed_exit(model, input, matcher, *policy.exit_layer); break;
        case PolicyKind::Dynamic: d = exit::run_with_early_exit(model, input, matcher); break;
      }
      outcomes[i] = {d.predicted_class == ex.label, d.latency.layer_fraction, d.latency.wall_ms};
    });
  }

  EvalResult r;
  r.policy = policy;
  for (const auto& cls : task.classes()) {
    ClassResult c;
    c.class_name = cls;
    double frac = 0.0;
    double wall = 0.0;
    for (std::size_t i = 0; i < eval_split.size(); ++i) {
      if (eval_split[i].label != cls) continue;
      ++c.n;
      c.correct += outcomes[i].correct ? 1 : 0;
      frac += outcomes[i].layer_fraction;
      wall += outcomes[i].wall_ms;
    }
    if (c.n == 0) {
      c.missing = Missing::NoData;
      c.correct = 0;
    } else if (no_layer) {
      c.missing = Missing::NoExitLayer;
      c.correct = 0;
    } else {
      const auto n = static_cast<double>(c.n);
      c.accuracy_pct = 100.0 * static_cast<double>(c.correct) / n;
      c.layer_fraction = frac / n;
      if (options.wall_clock) c.wall_ms = wall / n;
    }
    r.classes.push_back(std::move(c));
  }
  r.avg_accuracy_pct = mean_of(r.classes, &ClassResult::accuracy_pct);
  r.avg_layer_fraction = mean_of(r.classes, &ClassResult::layer_fraction);
  r.avg_wall_ms = mean_of(r.classes, &ClassResult::wall_ms);
  return r;
}

namespace {

std::optional<double> improvement(std::optional<double> base, std::optional<double> cand) {
  if (!base || !cand || *base <= 0.0) return std::nullopt;
  return 100.0 * (*base - *cand) / *base;
}

std::optional<double> difference(std::optional<double> base, std::optional<double> cand) {
  if (!base || !cand) return std::nullopt;
  return *cand - *base;
}

}  // namespace

Comparison compare(const EvalResult& baseline, const EvalResult& candidate) {
  if (baseline.classes.size() != candidate.classes.size()) throw DataError("compared results have different classes");
  Comparison c;
  c.baseline = baseline.policy.label();
  c.candidate = candidate.policy.label();
  for (std::size_t i = 0; i < baseline.classes.size(); ++i) {
    const auto& b = baseline.classes[i];
    const auto& e = candidate.classes[i];
    if (b.class_name != e.class_name) throw DataError("compared results have different classes");
    c.classes.push_back({b.class_name, difference(b.accuracy_pct, e.accuracy_pct),
                         improvement(b.layer_fraction, e.layer_fraction), improvement(b.wall_ms, e.wall_ms)});
  }
  c.avg = {"Avg", difference(baseline.avg_accuracy_pct, candidate.avg_accuracy_pct),
           improvement(baseline.avg_layer_fraction, candidate.avg_layer_fraction),
           improvement(baseline.avg_wall_ms, candidate.avg_wall_ms)};
  return c;
}

namespace {

ordered_json opt(std::optional<double> v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> read_opt(const ordered_json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string_view kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Fixed: return "fixed";
    case PolicyKind::Dynamic: return "dynamic";
    case PolicyKind::Full: break;
  }
  return "full";
}

ordered_json to_json(const EvalResult& r) {
  ordered_json j;
  j["policy"] = std::string(kind_name(r.policy.kind));
  j["label"] = r.policy.label();
  j["exit_layer"] = r.policy.exit_layer ? ordered_json(*r.policy.exit_layer) : ordered_json(nullptr);
  j["threshold"] = r.policy.kind == PolicyKind::Dynamic ? ordered_json(r.policy.threshold) : ordered_json(nullptr);
  ordered_json rows = ordered_json::array();
  for (const auto& c : r.classes) {
    ordered_json row;
    row["class"] = c.class_name;
    row["n"] = c.n;
    row["correct"] = c.correct;
    row["accuracy_pct"] = opt(c.accuracy_pct);
    row["layer_fraction"] = opt(c.layer_fraction);
    row["wall_ms"] = opt(c.wall_ms);
    row["reason"] = c.missing == Missing::None ? ordered_json(nullptr) : ordered_json(std::string(missing_name(c.missing)));
    rows.push_back(std::move(row));
  }
  j["classes"] = std::move(rows);
  j["avg"] = {{"accuracy_pct", opt(r.avg_accuracy_pct)},
              {"layer_fraction", opt(r.avg_layer_fraction)},
              {"wall_ms", opt(r.avg_wall_ms)}};
  return j;
}

ordered_json to_json(const ClassDelta& d) {
  ordered_json j;
  j["class"] = d.class_name;
  j["accuracy_delta_pct"] = opt(d.accuracy_delta_pct);
  j["latency_improvement_pct"] = opt(d.latency_improvement_pct);
  j["wall_improvement_pct"] = opt(d.wall_improvement_pct);
  return j;
}

EvalResult eval_result_from_json(const ordered_json& j) {
  EvalResult r;
  const auto kind = j.at("policy").get<std::string>();
  if (kind == "full") {
    r.policy = Policy::full();
  } else if (kind == "fixed") {
    r.policy = Policy::fixed(j.at("exit_layer").is_null() ? std::nullopt
                                                          : std::optional<int>(j.at("exit_layer").get<int>()));
  } else if (kind == "dynamic") {
    r.policy = Policy::dynamic(j.at("threshold").get<double>());
  } else {
    throw DataError("unknown policy '" + kind + "'");
  }
  for (const auto& row : j.at("classes")) {
    ClassResult c;
    c.class_name = row.at("class").get<std::string>();
    c.n = row.at("n").get<std::size_t>();
    c.correct = row.at("correct").get<std::size_t>();
    c.accuracy_pct = read_opt(row, "accuracy_pct");
    c.layer_fraction = read_opt(row, "layer_fraction");
    c.wall_ms = read_opt(row, "wall_ms");
    const auto& reason = row.at("reason");
    if (!reason.is_null()) {
      const auto s = reason.get<std::string>();
      if (s == "no_data") {
        c.missing = Missing::NoData;
      } else if (s == "no_exit_layer") {
        c.missing = Missing::NoExitLayer;
      } else {
        throw DataError("unknown reason '" + s + "'");
      }
    }
    r.classes.push_back(std::move(c));
  }
  const auto& avg = j.at("avg");
  r.avg_accuracy_pct = read_opt(avg, "accuracy_pct");
  r.avg_layer_fraction = read_opt(avg, "layer_fraction");
  r.avg_wall_ms = read_opt(avg, "wall_ms");
  return r;
}

}  // namespace

ordered_json to_json(const EvalReport& report) {
  ordered_json j;
  j["kind"] = "eval";
  j["task_id"] = report.task_id;
  j["model"] = report.model_name;
  j["n_layers"] = report.n_layers;
  j["n_eval"] = report.n_eval;
  ordered_json results = ordered_json::array();
  for (const auto& r : report.results) results.push_back(to_json(r));
  j["results"] = std::move(results);
  ordered_json comparisons = ordered_json::array();
  for (std::size_t i = 1; i < report.results.size(); ++i) {
    const auto c = compare(report.results[0], report.results[i]);
    ordered_json cj;
    cj["baseline"] = c.baseline;
    cj["candidate"] = c.candidate;
    ordered_json rows = ordered_json::array();
    for (const auto& d : c.classes) rows.push_back(to_json(d));
    cj["classes"] = std::move(rows);
    cj["avg"] = to_json(c.avg);
    comparisons.push_back(std::move(cj));
  }
  j["comparisons"] = std::move(comparisons);
  return j;
}

EvalReport eval_report_from_json(const ordered_json& j) {
  EvalReport r;
  try {
    if (j.at("kind").get<std::string>() != "eval") throw DataError("not an eval report");
    r.task_id = j.at("task_id").get<std::string>();
    r.model_name = j.at("model").get<std::string>();
    r.n_layers = j.at("n_layers").get<int>();
    r.n_eval = j.at("n_eval").get<std::size_t>();
    for (const auto& res : j.at("results")) r.results.push_back(eval_result_from_json(res));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
  if (r.results.empty()) throw DataError("eval report has no results");
  return r;
}

}  // namespace eelab::bench
