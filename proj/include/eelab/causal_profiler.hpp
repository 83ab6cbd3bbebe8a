// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eelab/exit_engine.hpp"
#include "eelab/model.hpp"
#include "json.hpp"

namespace eelab::causal {

class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SearchMode { Staged, Exhaustive };

std::string_view mode_name(SearchMode mode);
SearchMode parse_mode(std::string_view name);  // throws ProfileError

struct LabeledInput {
  model::TokenInput input;
  std::string label;
};

// Accuracy of fixed-depth readout at each evaluated layer. Counts are kept
// exactly; accuracies are derived as correct / n_examples.
struct LayerAccuracyProfile {
  std::string task_id;
  int n_layers = 0;
  std::size_t n_examples = 0;
  std::map<int, std::size_t> correct;
  std::size_t clean_correct = 0;
  // Counts recomputed from scratch while restoring layers above a candidate.
  std::map<int, std::size_t> restoration_correct;

  bool evaluated(int layer) const { return correct.contains(layer); }
  double acc(int layer) const;
  double acc_clean() const;
  std::vector<int> evaluated_layers() const;
  // True unless every layer 0..N was evaluated.
  bool partial() const;
};

struct ExitLayerSelection {
  std::string task_id;
  std::optional<int> optimal_layer;  // none: no layer produced a correct answer
  double acc_at_optimal = 0.0;
  bool restoration_validated = false;
  SearchMode search_mode = SearchMode::Staged;
};

struct TreatmentEffectReport {
  std::string task_id;
  int reference_layer = 0;
  std::map<int, double> te;  // acc(reference) - acc(L) per evaluated layer
  double ate = 0.0;
  bool partial = false;
};

TreatmentEffectReport treatment_effect(const LayerAccuracyProfile& profile, int reference_layer);

struct ProfilerOptions {
  // Explore stops after this many consecutive layers below the best accuracy.
  int patience = 2;
  std::size_t jobs = 1;
};

// Correct predictions at one layer (0..N).
using LayerEvaluator = std::function<std::size_t(int layer)>;
// Correct predictions at every layer 0..N in one sweep; must agree with the
// per-layer evaluator.
using SweepEvaluator = std::function<std::vector<std::size_t>()>;

// Clean, corrupted, restoration and explore runs over one task. Layer counts
// are memoized, except inside restoration_run, which recomputes them.
class CausalProfiler {
 public:
  CausalProfiler(std::string task_id, int n_layers, std::size_t n_examples, LayerEvaluator eval,
                 SweepEvaluator sweep = {}, ProfilerOptions options = {});

  // Throws ProfileError on an empty example set.
  static CausalProfiler for_model(const model::LayerStack& model, std::vector<LabeledInput> examples,
                                  const exit::Matcher& matcher, ProfilerOptions options = {});

  // Accuracy of the full-depth readout.
  double clean_run();

  // Exhaustive: every layer 0..N. Staged: N-1, N-2, ... until a layer reaches
  // the clean accuracy.
  const LayerAccuracyProfile& corrupted_run(SearchMode mode);

  // Re-adds layers candidate+1..N (depth N alone for candidate N) and checks
  // that depth N recovers the clean count exactly.
  bool restoration_run(int candidate);

  // Removes layers below `candidate` while accuracy holds; returns the
  // smallest layer at the best accuracy seen.
  int explore_run(int candidate);

  ExitLayerSelection select_optimal_layer(SearchMode mode);

  const LayerAccuracyProfile& profile() const { return profile_; }
  // Layer at which the staged descent first met the clean accuracy.
  std::optional<int> viable_layer() const { return viable_; }

 private:
  std::size_t count(int layer);
  void check_layer(int layer, int lo) const;

  LayerEvaluator eval_;
  SweepEvaluator sweep_;
  ProfilerOptions options_;
  LayerAccuracyProfile profile_;
  bool clean_done_ = false;
  std::optional<int> viable_;
};

// Free-function forms of the profiler stages.
double clean_run(const model::LayerStack& model, std::span<const LabeledInput> examples, const exit::MatchSpec& spec);
LayerAccuracyProfile corrupted_run(const model::LayerStack& model, std::span<const LabeledInput> examples,
                                   const exit::MatchSpec& spec, SearchMode mode);
bool restoration_run(const model::LayerStack& model, std::span<const LabeledInput> examples,
                     const exit::MatchSpec& spec, int candidate);
int explore_run(const model::LayerStack& model, std::span<const LabeledInput> examples, const exit::MatchSpec& spec,
                int candidate);
ExitLayerSelection select_optimal_layer(const model::LayerStack& model, std::span<const LabeledInput> examples,
                                        const exit::MatchSpec& spec, SearchMode mode);

// One serialized profiling result per task.
struct ProfileReport {
  std::string model_name;
  SearchMode mode = SearchMode::Staged;
  LayerAccuracyProfile profile;
  ExitLayerSelection selection;
  std::optional<TreatmentEffectReport> treatment;
};

ProfileReport make_report(std::string model_name, const CausalProfiler& profiler, const ExitLayerSelection& selection);

nlohmann::ordered_json to_json(const ProfileReport& report);
ProfileReport profile_report_from_json(const nlohmann::ordered_json& j);  // throws ProfileError

}  // namespace eelab::causal
