// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include "eelab/planted.hpp"

#include <cmath>
#include <string>

#include "eelab/rng.hpp"

namespace eelab::model {

namespace {

void fill(Matrix& m, Rng& rng, float a) {
  for (float& v : m.data()) v = rng.symmetric(a);
}

Matrix noise_matrix(std::size_t rows, std::size_t cols, Rng& rng, float a) {
  Matrix m(rows, cols);
  fill(m, rng, a);
  return m;
}

TransformerLayer noise_layer(std::size_t d, std::size_t ff, Rng& rng, float a) {
  TransformerLayer l;
  l.attn_norm.assign(d, 1.0f);
  l.wq = noise_matrix(d, d, rng, a);
  l.wk = noise_matrix(d, d, rng, a);
  l.wv = noise_matrix(d, d, rng, a);
  l.wo = noise_matrix(d, d, rng, a);
  l.ffn_norm.assign(d, 1.0f);
  l.w_up = noise_matrix(d, ff, rng, a);
  l.w_down = noise_matrix(ff, d, rng, a);
  return l;
}

// Dedicates FFN hidden unit `unit` to: if input coordinate `from` is active,
// add `gain` to residual coordinate `to`.
void route(TransformerLayer& l, std::size_t unit, std::size_t from, std::size_t to, float gain) {
  for (std::size_t r = 0; r < l.w_up.rows(); ++r) l.w_up.at(r, unit) = 0.0f;
  for (std::size_t c = 0; c < l.w_down.cols(); ++c) l.w_down.at(unit, c) = 0.0f;
  l.w_up.at(from, unit) = 1.0f;
  l.w_down.at(unit, to) = gain;
}

[[noreturn]] void infeasible(const std::string& msg) { throw ModelError(ModelErrc::InfeasiblePlant, msg); }

}  // namespace

LayerStack build_planted_model(const PlantSpec& spec) {
  const int v = spec.vocab_size;
  if (spec.n_layers < 1) infeasible("n_layers must be >= 1");
  if (spec.plant_layer < 1 || spec.plant_layer > spec.n_layers) {
    infeasible("plant layer " + std::to_string(spec.plant_layer) + " outside [1, " + std::to_string(spec.n_layers) +
               "]");
  }
  if (spec.key_to_label.empty()) infeasible("key_to_label is empty");
  for (const auto& [key, label] : spec.key_to_label) {
    if (key < 0 || key >= v || label < 0 || label >= v) infeasible("plant token outside the vocabulary");
    if (key == label) infeasible("key " + std::to_string(key) + " maps to itself");
  }

  ModelConfig cfg;
  cfg.n_layers = spec.n_layers;
  cfg.n_heads = spec.n_heads;
  cfg.d_model = spec.d_model;
  if (cfg.d_model == 0) cfg.d_model = ((2 * v + spec.n_heads - 1) / spec.n_heads) * spec.n_heads;
  cfg.d_ff = spec.d_ff;
  cfg.vocab_size = v;
  cfg.max_seq = spec.max_seq;
  cfg.end_token = spec.end_token;
  cfg.validate();
  if (cfg.d_model < 2 * v) infeasible("d_model must be >= 2 * vocab_size");

  std::map<int, std::size_t> units_used;
  units_used[spec.plant_layer] = spec.key_to_label.size();
  for (const auto& dis : spec.distractors) {
    if (dis.layer <= spec.plant_layer || dis.layer > spec.n_layers) infeasible("distractor layer must be above the plant");
    if (dis.key < 0 || dis.key >= v || dis.wrong < 0 || dis.wrong >= v) infeasible("distractor token outside vocabulary");
    ++units_used[dis.layer];
  }
  for (const auto& [layer, units] : units_used) {
    if (units > static_cast<std::size_t>(cfg.d_ff)) infeasible("d_ff too small for layer " + std::to_string(layer));
  }

  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto ff = static_cast<std::size_t>(cfg.d_ff);
  const auto vs = static_cast<std::size_t>(v);
  Rng rng(spec.seed);

  Matrix tok(vs, d);
  for (std::size_t t = 0; t < vs; ++t) tok.at(t, t) = 1.0f;
  Matrix pos = noise_matrix(static_cast<std::size_t>(cfg.max_seq), d, rng, spec.noise);

  std::vector<TransformerLayer> layers;
  layers.reserve(static_cast<std::size_t>(cfg.n_layers));
  for (int i = 0; i < cfg.n_layers; ++i) layers.push_back(noise_layer(d, ff, rng, spec.noise));

  // A one-hot input coordinate normalizes to ~sqrt(d); the plant writes an
  // answer coordinate four times the input coordinate.
  const float sqrt_d = std::sqrt(static_cast<float>(d));
  {
    auto& l = layers[static_cast<std::size_t>(spec.plant_layer - 1)];
    std::size_t unit = 0;
    for (const auto& [key, label] : spec.key_to_label) {
      route(l, unit++, static_cast<std::size_t>(key), vs + static_cast<std::size_t>(label), 4.0f / sqrt_d);
    }
  }
  // Above the plant the residual is ~(1 input, 4 answer), so the input
  // coordinate normalizes to sqrt(d / 17); write 8 into the wrong answer.
  std::map<int, std::size_t> next_unit;
  next_unit[spec.plant_layer] = spec.key_to_label.size();
  for (const auto& dis : spec.distractors) {
    auto& l = layers[static_cast<std::size_t>(dis.layer - 1)];
    route(l, next_unit[dis.layer]++, static_cast<std::size_t>(dis.key), vs + static_cast<std::size_t>(dis.wrong),
          8.0f / std::sqrt(static_cast<float>(d) / 17.0f));
  }

  Matrix unembed = noise_matrix(d, vs, rng, spec.noise);
  for (std::size_t t = 0; t < vs; ++t) {
    unembed.at(t, t) = 1.0f;
    unembed.at(vs + t, t) = 1.0f;
  }

  LayerStack model(cfg, std::move(tok), std::move(pos), std::move(layers), std::vector<float>(d, 1.0f),
                   std::move(unembed));

  // Verify the step at the plant layer on single-token inputs.
  for (const auto& [key, label] : spec.key_to_label) {
    TokenInput in;
    in.tokens = {key};
    ForwardPass pass(model, in);
    for (int layer = 0; layer <= cfg.n_layers; ++layer) {
      pass.advance_to(layer);
      TokenId expect = layer >= spec.plant_layer ? label : key;
      for (const auto& dis : spec.distractors) {
        if (dis.key == key && layer >= dis.layer) expect = dis.wrong;
      }
      const TokenId got = decode_at_layer(model, pass.state()).top1;
      if (got != expect) {
        infeasible("verification failed for key " + std::to_string(key) + " at layer " + std::to_string(layer) +
                   ": decoded " + std::to_string(got) + ", expected " + std::to_string(expect));
      }
    }
  }
  return model;
}

LayerStack build_planted_model(int n_layers, int plant_layer, const std::map<TokenId, TokenId>& key_to_label,
                               std::uint64_t seed) {
  PlantSpec spec;
  spec.n_layers = n_layers;
  spec.plant_layer = plant_layer;
  spec.key_to_label = key_to_label;
  spec.seed = seed;
  return build_planted_model(spec);
}

LayerStack build_random_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto ff = static_cast<std::size_t>(config.d_ff);
  const auto vs = static_cast<std::size_t>(config.vocab_size);
  Rng rng(seed);
  const float in_d = 1.0f / std::sqrt(static_cast<float>(d));
  const float in_ff = 1.0f / std::sqrt(static_cast<float>(ff));

  Matrix tok = noise_matrix(vs, d, rng, 1.0f);
  Matrix pos = noise_matrix(static_cast<std::size_t>(config.max_seq), d, rng, 0.1f);
  std::vector<TransformerLayer> layers;
  for (int i = 0; i < config.n_layers; ++i) {
    TransformerLayer l;
    l.attn_norm.resize(d);
    for (float& g : l.attn_norm) g = 1.0f + rng.symmetric(0.1f);
    l.wq = noise_matrix(d, d, rng, in_d);
    l.wk = noise_matrix(d, d, rng, in_d);
    l.wv = noise_matrix(d, d, rng, in_d);
    l.wo = noise_matrix(d, d, rng, in_d);
    l.ffn_norm.resize(d);
    for (float& g : l.ffn_norm) g = 1.0f + rng.symmetric(0.1f);
    l.w_up = noise_matrix(d, ff, rng, in_d);
    l.w_down = noise_matrix(ff, d, rng, in_ff);
    layers.push_back(std::move(l));
  }
  std::vector<float> final_norm(d);
  for (float& g : final_norm) g = 1.0f + rng.symmetric(0.1f);
  Matrix unembed = noise_matrix(d, vs, rng, in_d);
  return LayerStack(config, std::move(tok), std::move(pos), std::move(layers), std::move(final_norm),
                    std::move(unembed));
}

}  // namespace eelab::model
