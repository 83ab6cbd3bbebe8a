// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <memory>

#include "eelab/causal_profiler.hpp"
#include "eelab/parallel.hpp"

namespace eelab::causal {

std::string_view mode_name(SearchMode mode) { return mode == SearchMode::Staged ? "staged" : "exhaustive"; }

SearchMode parse_mode(std::string_view name) {
  if (name == "staged") return SearchMode::Staged;
  if (name == "exhaustive") return SearchMode::Exhaustive;
  throw ProfileError("unknown search mode '" + std::string(name) + "'");
}

double LayerAccuracyProfile::acc(int layer) const {
  auto it = correct.find(layer);
  if (it == correct.end()) throw ProfileError("layer " + std::to_string(layer) + " was not evaluated");
  return static_cast<double>(it->second) / static_cast<double>(n_examples);
}

double LayerAccuracyProfile::acc_clean() const {
  return static_cast<double>(clean_correct) / static_cast<double>(n_examples);
}

std::vector<int> LayerAccuracyProfile::evaluated_layers() const {
  std::vector<int> out;
  out.reserve(correct.size());
  for (const auto& [layer, c] : correct) out.push_back(layer);
  return out;
}

bool LayerAccuracyProfile::partial() const { return correct.size() != static_cast<std::size_t>(n_layers) + 1; }

TreatmentEffectReport treatment_effect(const LayerAccuracyProfile& profile, int reference_layer) {
  if (!profile.evaluated(reference_layer)) {
    throw ProfileError("reference layer " + std::to_string(reference_layer) + " is not in the profile");
  }
  TreatmentEffectReport r;
  r.task_id = profile.task_id;
  r.reference_layer = reference_layer;
  r.partial = profile.partial();
  const double ref = profile.acc(reference_layer);
  double sum = 0.0;
  for (const auto& [layer, c] : profile.correct) {
    const double te = layer == reference_layer ? 0.0 : ref - profile.acc(layer);
    r.te[layer] = te;
    sum += te;
  }
  r.ate = sum / static_cast<double>(r.te.size());
  return r;
}

CausalProfiler::CausalProfiler(std::string task_id, int n_layers, std::size_t n_examples, LayerEvaluator eval,
                               SweepEvaluator sweep, ProfilerOptions options)
    : eval_(std::move(eval)), sweep_(std::move(sweep)), options_(options) {
  if (n_examples == 0) throw ProfileError("empty example set");
  if (n_layers < 1) throw ProfileError("model has no layers");
  if (options_.patience < 1) throw ProfileError("patience must be >= 1");
  profile_.task_id = std::move(task_id);
  profile_.n_layers = n_layers;
  profile_.n_examples = n_examples;
}

namespace {

struct ModelContext {
  const model::LayerStack* model;
  std::vector<LabeledInput> examples;
  exit::Matcher matcher;
  std::size_t jobs;
};

}  // namespace

CausalProfiler CausalProfiler::for_model(const model::LayerStack& model, std::vector<LabeledInput> examples,
                                         const exit::Matcher& matcher, ProfilerOptions options) {
  if (examples.empty()) throw ProfileError("empty example set");
  for (const auto& ex : examples) model::check_input(model, ex.input);
  const std::size_t n = examples.size();
  auto ctx = std::make_shared<const ModelContext>(ModelContext{&model, std::move(examples), matcher, options.jobs});

  LayerEvaluator eval = [ctx](int layer) {
    std::vector<char> ok(ctx->examples.size(), 0);
    parallel_for(ok.size(), ctx->jobs, [&](std::size_t i) {
      const auto& ex = ctx->examples[i];
      ok[i] = exit::predict_class_at(*ctx->model, ex.input, ctx->matcher, layer) == ex.label ? 1 : 0;
    });
    return static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
  };
  SweepEvaluator sweep = [ctx]() {
    const auto layers = static_cast<std::size_t>(ctx->model->n_layers()) + 1;
    std::vector<std::vector<char>> ok(ctx->examples.size());
    parallel_for(ok.size(), ctx->jobs, [&](std::size_t i) {
      const auto& ex = ctx->examples[i];
      const auto preds = exit::predict_class_all_layers(*ctx->model, ex.input, ctx->matcher);
      ok[i].resize(layers);
      for (std::size_t l = 0; l < layers; ++l) ok[i][l] = preds[l] == ex.label ? 1 : 0;
    });
    std::vector<std::size_t> counts(layers, 0);
    for (const auto& row : ok) {
      for (std::size_t l = 0; l < layers; ++l) counts[l] += static_cast<std::size_t>(row[l]);
    }
    return counts;
  };
  return CausalProfiler(matcher.spec().task_id, model.n_layers(), n, std::move(eval), std::move(sweep), options);
}

void CausalProfiler::check_layer(int layer, int lo) const {
  if (layer < lo || layer > profile_.n_layers) {
    throw ProfileError("layer " + std::to_string(layer) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(profile_.n_layers) + "]");
  }
}

std::size_t CausalProfiler::count(int layer) {
  auto it = profile_.correct.find(layer);
  if (it != profile_.correct.end()) return it->second;
  const std::size_t c = eval_(layer);
  profile_.correct.emplace(layer, c);
  return c;
}

double CausalProfiler::clean_run() {
  if (!clean_done_) {
    profile_.clean_correct = count(profile_.n_layers);
    clean_done_ = true;
  }
  return profile_.acc_clean();
}

const LayerAccuracyProfile& CausalProfiler::corrupted_run(SearchMode mode) {
  const int n = profile_.n_layers;
  if (mode == SearchMode::Exhaustive) {
    if (sweep_ && profile_.correct.size() < static_cast<std::size_t>(n) + 1) {
      const auto counts = sweep_();
      for (int l = 0; l <= n; ++l) profile_.correct.emplace(l, counts[static_cast<std::size_t>(l)]);
    }
    for (int l = 0; l <= n; ++l) count(l);
    clean_run();
    return profile_;
  }
  clean_run();
  viable_.reset();
  for (int l = n - 1; l >= 1; --l) {
    if (count(l) >= profile_.clean_correct) {
      viable_ = l;
      break;
    }
  }
  return profile_;
}

bool CausalProfiler::restoration_run(int candidate) {
  check_layer(candidate, 1);
  clean_run();
  const int n = profile_.n_layers;
  // Depth N is always recounted, so candidate N checks against the clean run too.
  for (int l = std::min(candidate + 1, n); l <= n; ++l) profile_.restoration_correct[l] = eval_(l);
  return profile_.restoration_correct.at(n) == profile_.clean_correct;
}

int CausalProfiler::explore_run(int candidate) {
  check_layer(candidate, 1);
  std::size_t best_count = count(candidate);
  int best = candidate;
  int misses = 0;
  for (int l = candidate - 1; l >= 1; --l) {
    const std::size_t c = count(l);
    if (c >= best_count) {
      best_count = c;
      best = l;
      misses = 0;
    } else if (++misses >= options_.patience) {
      break;
    }
  }
  return best;
}

ExitLayerSelection CausalProfiler::select_optimal_layer(SearchMode mode) {
  ExitLayerSelection sel;
  sel.task_id = profile_.task_id;
  sel.search_mode = mode;
  const int n = profile_.n_layers;

  corrupted_run(mode);
  if (mode == SearchMode::Staged) {
    // A viable layer that fails restoration is dropped and the descent resumes below it.
    while (viable_ && !restoration_run(*viable_)) {
      const int from = *viable_;
      viable_.reset();
      for (int l = from - 1; l >= 1; --l) {
        if (count(l) >= profile_.clean_correct) {
          viable_ = l;
          break;
        }
      }
    }
    if (viable_) explore_run(*viable_);
  }

  std::vector<int> ranked;
  for (const auto& [layer, c] : profile_.correct) {
    if (layer >= 1 && layer <= n && c > 0) ranked.push_back(layer);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](int a, int b) { return profile_.correct.at(a) > profile_.correct.at(b); });
  for (int layer : ranked) {
    if (restoration_run(layer)) {
      sel.optimal_layer = layer;
      sel.acc_at_optimal = profile_.acc(layer);
      sel.restoration_validated = true;
      break;
    }
  }
  return sel;
}

double clean_run(const model::LayerStack& model, std::span<const LabeledInput> examples,
                 const exit::MatchSpec& spec) {
  auto p = CausalProfiler::for_model(model, {examples.begin(), examples.end()}, exit::Matcher(spec));
  return p.clean_run();
}

LayerAccuracyProfile corrupted_run(const model::LayerStack& model, std::span<const LabeledInput> examples,
                                   const exit::MatchSpec& spec, SearchMode mode) {
  auto p = CausalProfiler::for_model(model, {examples.begin(), examples.end()}, exit::Matcher(spec));
  return p.corrupted_run(mode);
}

bool restoration_run(const model::LayerStack& model, std::span<const LabeledInput> examples,
                     const exit::MatchSpec& spec, int candidate) {
  auto p = CausalProfiler::for_model(model, {examples.begin(), examples.end()}, exit::Matcher(spec));
  return p.restoration_run(candidate);
}

int explore_run(const model::LayerStack& model, std::span<const LabeledInput> examples, const exit::MatchSpec& spec,
                int candidate) {
  auto p = CausalProfiler::for_model(model, {examples.begin(), examples.end()}, exit::Matcher(spec));
  return p.explore_run(candidate);
}

ExitLayerSelection select_optimal_layer(const model::LayerStack& model, std::span<const LabeledInput> examples,
                                        const exit::MatchSpec& spec, SearchMode mode) {
  auto p = CausalProfiler::for_model(model, {examples.begin(), examples.end()}, exit::Matcher(spec));
  return p.select_optimal_layer(mode);
}

}  // namespace eelab::causal
