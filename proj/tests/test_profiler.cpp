// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "eelab/causal_profiler.hpp"
#include "eelab/planted.hpp"
#include "eelab/rng.hpp"

using namespace eelab;
using namespace eelab::causal;

namespace {

// Profiler over a fixed table of per-layer correct counts.
CausalProfiler synthetic(const std::vector<std::size_t>& counts, std::size_t n, int* calls = nullptr,
                         ProfilerOptions opt = {}) {
  const int layers = static_cast<int>(counts.size()) - 1;
  return CausalProfiler(
      "synthetic", layers, n,
      [counts, calls](int layer) {
        if (calls != nullptr) ++*calls;
        return counts.at(static_cast<std::size_t>(layer));
      },
      {}, opt);
}

// Smallest index among the maxima over layers 1..N; none when that maximum is 0.
std::optional<int> argmax_oracle(const std::vector<std::size_t>& counts) {
  std::optional<int> best;
  for (int l = 1; l < static_cast<int>(counts.size()); ++l) {
    if (counts[static_cast<std::size_t>(l)] == 0) continue;
    if (!best || counts[static_cast<std::size_t>(l)] > counts[static_cast<std::size_t>(*best)]) best = l;
  }
  return best;
}

// Non-decreasing up to a plateau holding the maximum, non-increasing after it.
std::vector<std::size_t> unimodal(Rng& rng, int layers, std::size_t n) {
  const auto top = static_cast<std::uint64_t>(layers);
  const auto first = static_cast<std::size_t>(rng.below(top + 1));
  const auto last = first + static_cast<std::size_t>(rng.below(top - first + 1));
  const std::size_t peak = 1 + rng.below(n);
  std::vector<std::size_t> c(static_cast<std::size_t>(layers) + 1);
  const auto step_down = [&](std::size_t from) {
    const std::size_t v = from - rng.below(std::min<std::size_t>(from, 3) + 1);
    return v == peak ? peak - 1 : v;
  };
  for (std::size_t l = first; l <= last; ++l) c[l] = peak;
  for (std::size_t l = first; l-- > 0;) c[l] = step_down(c[l + 1]);
  for (std::size_t l = last + 1; l < c.size(); ++l) c[l] = step_down(c[l - 1]);
  return c;
}

const std::map<model::TokenId, model::TokenId> kPlant = {{3, 20}, {4, 21}, {5, 22}, {6, 23}};

exit::MatchSpec planted_spec() {
  exit::MatchSpec s;
  s.task_id = "dynamic";
  s.classes = {"bike", "person", "vehicle"};
  s.label_tokens = {{"bike", {{20}}}, {"person", {{21}}}, {"vehicle", {{22}, {23}}}};
  return s;
}

std::vector<LabeledInput> planted_examples(Rng& rng, int per_key) {
  std::vector<LabeledInput> out;
  const std::vector<std::pair<model::TokenId, std::string>> keys = {
      {3, "bike"}, {4, "person"}, {5, "vehicle"}, {6, "vehicle"}};
  for (const auto& [key, label] : keys) {
    for (int i = 0; i < per_key; ++i) {
      model::TokenInput in;
      for (std::uint64_t f = rng.below(4); f > 0; --f) in.tokens.push_back(8 + static_cast<model::TokenId>(rng.below(8)));
      in.tokens.push_back(key);
      out.push_back({in, label});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("treatment effect arithmetic") {
  auto p = synthetic({1, 5, 9}, 10);
  p.corrupted_run(SearchMode::Exhaustive);
  const auto te = treatment_effect(p.profile(), 2);
  CHECK(te.te.size() == 3);
  CHECK(std::fabs(te.te.at(0) - 0.8) < 1e-12);
  CHECK(std::fabs(te.te.at(1) - 0.4) < 1e-12);
  CHECK(te.te.at(2) == 0.0);
  CHECK(std::fabs(te.ate - 0.4) < 1e-12);
  CHECK_FALSE(te.partial);

  auto flat = synthetic({4, 4, 4, 4}, 8);
  flat.corrupted_run(SearchMode::Exhaustive);
  const auto zero = treatment_effect(flat.profile(), 1);
  for (const auto& [layer, v] : zero.te) CHECK(v == 0.0);
  CHECK(zero.ate == 0.0);

  auto part = synthetic({0, 1, 2, 3, 4}, 4);
  part.clean_run();
  CHECK_THROWS_AS(treatment_effect(part.profile(), 2), ProfileError);
  CHECK(treatment_effect(part.profile(), 4).partial);
}

TEST_CASE("explore returns the smallest layer of a flat maximum") {
  //                layer: 0  1  2  3  4   5   6  7
  auto p = synthetic({0, 2, 3, 5, 10, 10, 10, 8}, 10);
  CHECK(p.explore_run(6) == 4);
  // Patience 2: two consecutive layers below the best end the search.
  CHECK_FALSE(p.profile().evaluated(1));
  CHECK(p.profile().evaluated(2));
}

TEST_CASE("staged search: descent, viability and the clean run") {
  int calls = 0;
  auto p = synthetic({0, 1, 4, 9, 9, 7, 6}, 10, &calls);
  CHECK(p.clean_run() == doctest::Approx(0.6));
  p.corrupted_run(SearchMode::Staged);
  CHECK(p.viable_layer() == 5);
  const auto sel = p.select_optimal_layer(SearchMode::Staged);
  CHECK(sel.optimal_layer == 3);
  CHECK(sel.restoration_validated);
  CHECK(sel.acc_at_optimal == doctest::Approx(0.9));
  CHECK(p.profile().partial());
  CHECK(p.profile().restoration_correct.at(6) == p.profile().clean_correct);
}

TEST_CASE("staged search equals the exhaustive oracle on unimodal profiles") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int layers = 2 + static_cast<int>(rng.below(30));
    const std::size_t n = 1 + rng.below(40);
    const auto counts = unimodal(rng, layers, n);
    CAPTURE(trial);
    int staged_calls = 0;
    auto staged = synthetic(counts, n, &staged_calls);
    auto exhaustive = synthetic(counts, n);
    const auto a = staged.select_optimal_layer(SearchMode::Staged);
    const auto b = exhaustive.select_optimal_layer(SearchMode::Exhaustive);
    CHECK(a.optimal_layer == argmax_oracle(counts));
    CHECK(b.optimal_layer == argmax_oracle(counts));
    CHECK(a.restoration_validated == a.optimal_layer.has_value());
    CHECK_FALSE(exhaustive.profile().partial());
  }
}

TEST_CASE("exhaustive selection on arbitrary profiles is the smallest argmax over 1..N") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const int layers = 1 + static_cast<int>(rng.below(20));
    std::vector<std::size_t> counts(static_cast<std::size_t>(layers) + 1);
    for (auto& c : counts) c = rng.below(6);
    auto p = synthetic(counts, 5);
    CHECK(p.select_optimal_layer(SearchMode::Exhaustive).optimal_layer == argmax_oracle(counts));
  }
}

TEST_CASE("none when no layer from 1 to N is correct") {
  auto p = synthetic({3, 0, 0, 0}, 5);
  const auto sel = p.select_optimal_layer(SearchMode::Exhaustive);
  CHECK_FALSE(sel.optimal_layer.has_value());
  CHECK_FALSE(sel.restoration_validated);
  for (int l = 1; l <= 3; ++l) CHECK(p.profile().acc(l) == 0.0);
  auto s = synthetic({0, 0, 0, 0}, 5);
  CHECK_FALSE(s.select_optimal_layer(SearchMode::Staged).optimal_layer.has_value());
}

TEST_CASE("a candidate failing restoration is discarded for the next best layer") {
  // Depth N answers 6 on the first call and 5 on the second: the first
  // restoration sees a changed clean count and fails.
  int n_calls = 0;
  const std::vector<std::size_t> counts = {0, 2, 8, 7, 6};
  CausalProfiler p("flaky", 4, 10, [&](int layer) -> std::size_t {
    if (layer == 4) return ++n_calls == 2 ? 5 : 6;
    return counts.at(static_cast<std::size_t>(layer));
  });
  const auto sel = p.select_optimal_layer(SearchMode::Exhaustive);
  CHECK(sel.optimal_layer == 3);
  CHECK(sel.restoration_validated);
}

TEST_CASE("profiler errors") {
  CHECK_THROWS_AS(CausalProfiler("t", 4, 0, [](int) { return std::size_t{0}; }), ProfileError);
  auto p = synthetic({0, 1, 2}, 2);
  CHECK_THROWS_AS(p.restoration_run(0), ProfileError);
  CHECK_THROWS_AS(p.explore_run(3), ProfileError);
  CHECK(parse_mode("staged") == SearchMode::Staged);
  CHECK_THROWS_AS(parse_mode("greedy"), ProfileError);
  const auto model = model::build_planted_model(4, 2, kPlant, 1);
  CHECK_THROWS_AS(CausalProfiler::for_model(model, {}, exit::Matcher(planted_spec())), ProfileError);
}

TEST_CASE("planted models: both modes select the plant layer") {
  Rng rng(31);
  const auto examples = planted_examples(rng, 6);
  for (int k : {1, 3, 5, 8}) {
    CAPTURE(k);
    const auto model = model::build_planted_model(8, k, kPlant, 100 + static_cast<std::uint64_t>(k));
    for (auto mode : {SearchMode::Staged, SearchMode::Exhaustive}) {
      auto p = CausalProfiler::for_model(model, examples, exit::Matcher(planted_spec()));
      const auto sel = p.select_optimal_layer(mode);
      CHECK(sel.optimal_layer == k);
      CHECK(sel.restoration_validated);
      CHECK(sel.acc_at_optimal == 1.0);
      CHECK(p.profile().restoration_correct.at(8) == p.profile().clean_correct);
      const auto te = treatment_effect(p.profile(), k);
      CHECK(te.te.at(k) == 0.0);
    }
  }
  const auto model = model::build_planted_model(8, 5, kPlant, 42);
  const auto sel = select_optimal_layer(model, examples, planted_spec(), SearchMode::Staged);
  CHECK(sel.optimal_layer == 5);
  CHECK(clean_run(model, examples, planted_spec()) == 1.0);
  CHECK(restoration_run(model, examples, planted_spec(), 5));
  CHECK(explore_run(model, examples, planted_spec(), 7) == 5);
  CHECK(corrupted_run(model, examples, planted_spec(), SearchMode::Exhaustive).acc(4) == 0.0);
}

TEST_CASE("distracted plant: the profiler prefers the layer before the flip") {
  model::PlantSpec spec;
  spec.n_layers = 8;
  spec.plant_layer = 5;
  spec.key_to_label = kPlant;
  spec.key_to_label[7] = 21;
  spec.distractors = {{7, 7, 20}};
  spec.seed = 5;
  const auto model = model::build_planted_model(spec);
  Rng rng(8);
  auto examples = planted_examples(rng, 5);
  examples.push_back({model::TokenInput{{9, 7}, {}}, "person"});
  auto p = CausalProfiler::for_model(model, examples, exit::Matcher(planted_spec()));
  const auto sel = p.select_optimal_layer(SearchMode::Staged);
  CHECK(sel.optimal_layer == 5);
  CHECK(sel.acc_at_optimal > p.profile().acc_clean());
  CHECK(p.profile().clean_correct == examples.size() - 1);
}

TEST_CASE("disjoint label map: no exit layer") {
  const auto model = model::build_planted_model(6, 3, kPlant, 9);
  auto spec = planted_spec();
  spec.label_tokens = {{"bike", {{200}}}, {"person", {{201}}}, {"vehicle", {{202}}}};
  Rng rng(1);
  const auto sel = select_optimal_layer(model, planted_examples(rng, 3), spec, SearchMode::Staged);
  CHECK_FALSE(sel.optimal_layer.has_value());
}

TEST_CASE("profiles do not depend on the job count") {
  model::ModelConfig cfg;
  cfg.n_layers = 6;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.d_ff = 24;
  cfg.vocab_size = 10;
  cfg.max_seq = 6;
  const auto model = model::build_random_model(cfg, 13);
  exit::MatchSpec spec;
  spec.task_id = "r";
  spec.classes = {"lo", "hi"};
  for (model::TokenId t = 0; t < 10; ++t) spec.label_tokens[t < 5 ? "lo" : "hi"].push_back({t});
  Rng rng(4);
  std::vector<LabeledInput> examples;
  for (int i = 0; i < 60; ++i) {
    model::TokenInput in;
    for (std::uint64_t n = 1 + rng.below(5); n > 0; --n) in.tokens.push_back(static_cast<model::TokenId>(rng.below(10)));
    examples.push_back({in, rng.below(2) == 0 ? "lo" : "hi"});
  }
  ProfilerOptions one, many;
  many.jobs = 4;
  auto a = CausalProfiler::for_model(model, examples, exit::Matcher(spec), one);
  auto b = CausalProfiler::for_model(model, examples, exit::Matcher(spec), many);
  a.corrupted_run(SearchMode::Exhaustive);
  b.corrupted_run(SearchMode::Exhaustive);
  CHECK(a.profile().correct == b.profile().correct);

  // The sweep fast path agrees with per-layer evaluation.
  auto e = CausalProfiler::for_model(model, examples, exit::Matcher(spec), one);
  e.clean_run();
  for (int l = 6; l >= 1; --l) e.explore_run(l);
  for (int l = 1; l <= 6; ++l) CHECK(e.profile().correct.at(l) == a.profile().correct.at(l));
}

TEST_CASE("profile report JSON round trip is byte-identical") {
  Rng rng(6);
  const auto model = model::build_planted_model(8, 5, kPlant, 42);
  auto p = CausalProfiler::for_model(model, planted_examples(rng, 4), exit::Matcher(planted_spec()));
  const auto report = make_report("planted", p, p.select_optimal_layer(SearchMode::Staged));
  const auto text = to_json(report).dump(2);
  const auto back = profile_report_from_json(nlohmann::ordered_json::parse(text));
  CHECK(to_json(back).dump(2) == text);
  CHECK(back.selection.optimal_layer == 5);
  CHECK(back.treatment->partial);
  const auto j = to_json(report);
  for (const char* key : {"task_id", "mode", "acc_clean", "acc", "optimal_layer", "restoration_validated", "te", "ate",
                          "partial"}) {
    CHECK(j.contains(key));
  }
  CHECK_THROWS_AS(profile_report_from_json(nlohmann::ordered_json::parse("{}")), ProfileError);
}
