// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

#include "eelab/bench.hpp"
#include "eelab/planted.hpp"
#include "eelab/rng.hpp"

namespace eelab::bench {

namespace {

// Token layout of the fixture vocabulary.
constexpr TokenId kPromptA = 1;
constexpr TokenId kPromptB = 2;
constexpr TokenId kBikeKey = 3;
constexpr TokenId kPersonKey = 4;
constexpr TokenId kVehicleKey = 5;
constexpr TokenId kCarKey = 6;
constexpr TokenId kOddKey = 7;  // a person key used only by the distracted example
constexpr TokenId kFillerFirst = 8;
constexpr TokenId kFillerCount = 8;
constexpr TokenId kBike = 20;
constexpr TokenId kPerson = 21;
constexpr TokenId kVehicle = 22;
constexpr TokenId kCar = 23;  // vehicle synonym

}  // namespace

Fixture make_planted_fixture(const FixtureOptions& options) {
  if (options.examples_per_key < 1) throw DataError("examples_per_key must be >= 1");

  model::PlantSpec plant;
  plant.n_layers = options.n_layers;
  plant.plant_layer = options.plant_layer;
  plant.seed = options.seed;
  plant.key_to_label = {{kBikeKey, kBike}, {kPersonKey, kPerson}, {kVehicleKey, kVehicle}, {kCarKey, kCar}};
  if (options.distract_layer) {
    plant.key_to_label[kOddKey] = kPerson;
    plant.distractors.push_back({*options.distract_layer, kOddKey, kBike});
  }

  TaskSpec task;
  task.match_spec.task_id = "dynamic";
  task.match_spec.classes = {"bike", "person", "vehicle"};
  task.match_spec.label_tokens = {{"bike", {{kBike}}}, {"person", {{kPerson}}}, {"vehicle", {{kVehicle}, {kCar}}}};
  task.prompt_template = {kPromptA, kPromptB, kSceneSlot};
  task.dynamics_partition = {{"bike", Dynamics::Dynamic}, {"person", Dynamics::Dynamic}, {"vehicle", Dynamics::Dynamic}};
  task.validate();

  struct Draw {
    TokenId key;
    std::string label;
  };
  std::vector<Draw> draws;
  const std::vector<Draw> keys = {{kBikeKey, "bike"}, {kPersonKey, "person"}, {kVehicleKey, "vehicle"},
                                  {kCarKey, "vehicle"}};
  for (const auto& k : keys) {
    for (int i = 0; i < options.examples_per_key; ++i) draws.push_back(k);
  }
  if (options.distract_layer) draws.push_back({kOddKey, "person"});

  // Separate stream from the model weights so both stay stable if either changes.
  Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  rng.shuffle(draws);

  std::vector<LabeledExample> examples;
  examples.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    LabeledExample ex;
    char id[32];
    std::snprintf(id, sizeof id, "scene-%04zu", i + 1);
    ex.id = id;
    const auto fillers = rng.below(4);
    for (std::uint64_t f = 0; f < fillers; ++f) {
      ex.prompt_tokens.push_back(kFillerFirst + static_cast<TokenId>(rng.below(kFillerCount)));
    }
    ex.prompt_tokens.push_back(draws[i].key);
    ex.label = draws[i].label;
    ex.dynamics = Dynamics::Dynamic;
    ex.line = static_cast<int>(i + 1);
    examples.push_back(std::move(ex));
  }

  return {model::build_planted_model(plant), std::move(task), std::move(examples)};
}

}  // namespace eelab::bench
