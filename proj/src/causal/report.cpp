// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include "eelab/causal_profiler.hpp"

namespace eelab::causal {

using nlohmann::ordered_json;

ProfileReport make_report(std::string model_name, const CausalProfiler& profiler, const ExitLayerSelection& selection) {
  ProfileReport r;
  r.model_name = std::move(model_name);
  r.mode = selection.search_mode;
  r.profile = profiler.profile();
  r.selection = selection;
  if (selection.optimal_layer) r.treatment = treatment_effect(r.profile, *selection.optimal_layer);
  return r;
}

namespace {

template <typename T>
ordered_json layer_map(const std::map<int, T>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [layer, v] : m) j[std::to_string(layer)] = v;
  return j;
}

template <typename T>
std::map<int, T> read_layer_map(const ordered_json& j) {
  std::map<int, T> out;
  for (const auto& [key, v] : j.items()) {
    std::size_t used = 0;
    const int layer = std::stoi(key, &used);
    if (used != key.size()) throw ProfileError("bad layer key '" + key + "'");
    out[layer] = v.template get<T>();
  }
  return out;
}

}  // namespace

ordered_json to_json(const ProfileReport& r) {
  const auto& p = r.profile;
  ordered_json acc = ordered_json::object();
  for (int layer : p.evaluated_layers()) acc[std::to_string(layer)] = p.acc(layer);

  ordered_json j;
  j["task_id"] = p.task_id;
  j["model"] = r.model_name;
  j["mode"] = std::string(mode_name(r.mode));
  j["n_layers"] = p.n_layers;
  j["n_examples"] = p.n_examples;
  j["acc_clean"] = p.acc_clean();
  j["clean_correct"] = p.clean_correct;
  j["acc"] = std::move(acc);
  j["correct"] = layer_map(p.correct);
  j["restoration_correct"] = layer_map(p.restoration_correct);
  j["optimal_layer"] = r.selection.optimal_layer ? ordered_json(*r.selection.optimal_layer) : ordered_json(nullptr);
  j["acc_at_optimal"] = r.selection.acc_at_optimal;
  j["restoration_validated"] = r.selection.restoration_validated;
  if (r.treatment) {
    j["te"] = layer_map(r.treatment->te);
    j["ate"] = r.treatment->ate;
  } else {
    j["te"] = ordered_json::object();
    j["ate"] = nullptr;
  }
  j["partial"] = p.partial();
  return j;
}

ProfileReport profile_report_from_json(const ordered_json& j) {
  ProfileReport r;
  try {
    auto& p = r.profile;
    p.task_id = j.at("task_id").get<std::string>();
    r.model_name = j.value("model", std::string{});
    r.mode = parse_mode(j.at("mode").get<std::string>());
    p.n_layers = j.at("n_layers").get<int>();
    p.n_examples = j.at("n_examples").get<std::size_t>();
    if (p.n_examples == 0) throw ProfileError("profile report has zero examples");
    p.clean_correct = j.at("clean_correct").get<std::size_t>();
    p.correct = read_layer_map<std::size_t>(j.at("correct"));
    p.restoration_correct = read_layer_map<std::size_t>(j.at("restoration_correct"));

    auto& s = r.selection;
    s.task_id = p.task_id;
    s.search_mode = r.mode;
    if (!j.at("optimal_layer").is_null()) s.optimal_layer = j.at("optimal_layer").get<int>();
    s.acc_at_optimal = j.at("acc_at_optimal").get<double>();
    s.restoration_validated = j.at("restoration_validated").get<bool>();
    if (s.optimal_layer) {
      TreatmentEffectReport t;
      t.task_id = p.task_id;
      t.reference_layer = *s.optimal_layer;
      t.te = read_layer_map<double>(j.at("te"));
      t.ate = j.at("ate").get<double>();
      t.partial = j.at("partial").get<bool>();
      r.treatment = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProfileError(std::string("malformed profile report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ProfileError(std::string("malformed profile report: ") + e.what());
  }
  return r;
}

}  // namespace eelab::causal
