// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "eelab/model.hpp"

namespace eelab::model {

// From `layer` upward the model answers `wrong` for inputs ending in `key`,
// overriding the planted label. Used to build fixtures where the full-depth
// answer is worse than an intermediate one.
struct Distractor {
  int layer = 0;
  TokenId key = 0;
  TokenId wrong = 0;
};

struct PlantSpec {
  int n_layers = 8;
  int plant_layer = 1;
  std::map<TokenId, TokenId> key_to_label;
  std::uint64_t seed = 0;
  int vocab_size = 32;
  int n_heads = 4;
  int d_model = 0;  // 0: smallest multiple of n_heads >= 2 * vocab_size
  int d_ff = 64;
  int max_seq = 16;
  TokenId end_token = kNoToken;
  // Half-width of the uniform noise put on every weight not used by the plant.
  float noise = 0.02f;
  std::vector<Distractor> distractors;
};

// Builds a model whose logit-lens readout copies the last input token at
// layers below `plant_layer` and answers key_to_label[last token] from
// `plant_layer` on. The residual stream is split into an input block
// (coordinates 0..V-1, one per token) and an answer block (V..2V-1); the plant
// layer's FFN moves each key into its label's answer coordinate. Every other
// weight is small uniform noise, so blocks outside the plant stay close to the
// identity on the residual stream.
//
// The construction is verified on single-token inputs before returning; any
// violation throws ModelError(InfeasiblePlant).
LayerStack build_planted_model(const PlantSpec& spec);

LayerStack build_planted_model(int n_layers, int plant_layer, const std::map<TokenId, TokenId>& key_to_label,
                               std::uint64_t seed);

// Uniform random weights scaled by 1/sqrt(fan_in).
LayerStack build_random_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace eelab::model
