// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "eelab/model.hpp"

namespace eelab::model {

std::string_view errc_name(ModelErrc code) {
  switch (code) {
    case ModelErrc::Io: return "io";
    case ModelErrc::BadMagic: return "bad_magic";
    case ModelErrc::UnsupportedVersion: return "unsupported_version";
    case ModelErrc::MalformedHeader: return "malformed_header";
    case ModelErrc::DimensionMismatch: return "dimension_mismatch";
    case ModelErrc::NonFinite: return "non_finite";
    case ModelErrc::InvalidConfig: return "invalid_config";
    case ModelErrc::LayerOutOfRange: return "layer_out_of_range";
    case ModelErrc::InputTooLong: return "input_too_long";
    case ModelErrc::TokenOutOfRange: return "token_out_of_range";
    case ModelErrc::WidthMismatch: return "width_mismatch";
    case ModelErrc::InfeasiblePlant: return "infeasible_plant";
  }
  return "unknown";
}

ModelError::ModelError(ModelErrc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ModelError(ModelErrc::InvalidConfig, msg); };
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (d_model < 1) fail("d_model must be >= 1");
  if (n_heads < 1) fail("n_heads must be >= 1");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (d_ff < 1) fail("d_ff must be >= 1");
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (max_seq < 1) fail("max_seq must be >= 1");
  if (end_token != kNoToken && (end_token < 0 || end_token >= vocab_size)) {
    fail("end_token outside the vocabulary");
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ModelError(ModelErrc::DimensionMismatch, "matrix payload does not match its shape");
  }
}

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ModelError(ModelErrc::DimensionMismatch,
                     name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void expect_len(const std::vector<float>& v, std::size_t n, const std::string& name) {
  if (v.size() != n) {
    throw ModelError(ModelErrc::DimensionMismatch,
                     name + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n));
  }
}

void expect_finite(std::span<const float> values, const std::string& name) {
  for (float v : values) {
    if (!std::isfinite(v)) throw ModelError(ModelErrc::NonFinite, name + " contains NaN or Inf");
  }
}

}  // namespace

LayerStack::LayerStack(ModelConfig config, Matrix token_embedding, Matrix position_embedding,
                       std::vector<TransformerLayer> layers, std::vector<float> final_norm, Matrix unembedding)
    : config_(config),
      token_embedding_(std::move(token_embedding)),
      position_embedding_(std::move(position_embedding)),
      layers_(std::move(layers)),
      final_norm_(std::move(final_norm)),
      unembedding_(std::move(unembedding)) {
  config_.validate();
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  if (layers_.size() != static_cast<std::size_t>(config_.n_layers)) {
    throw ModelError(ModelErrc::DimensionMismatch, "config declares " + std::to_string(config_.n_layers) +
                                                       " layers but " + std::to_string(layers_.size()) +
                                                       " were supplied");
  }
  expect_shape(token_embedding_, v, d, "token_embedding");
  expect_shape(position_embedding_, static_cast<std::size_t>(config_.max_seq), d, "position_embedding");
  expect_len(final_norm_, d, "final_norm");
  expect_shape(unembedding_, d, v, "unembedding");
  expect_finite(token_embedding_.data(), "token_embedding");
  expect_finite(position_embedding_.data(), "position_embedding");
  expect_finite(final_norm_, "final_norm");
  expect_finite(unembedding_.data(), "unembedding");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    expect_len(l.attn_norm, d, p + "attn_norm");
    expect_shape(l.wq, d, d, p + "wq");
    expect_shape(l.wk, d, d, p + "wk");
    expect_shape(l.wv, d, d, p + "wv");
    expect_shape(l.wo, d, d, p + "wo");
    expect_len(l.ffn_norm, d, p + "ffn_norm");
    expect_shape(l.w_up, d, ff, p + "w_up");
    expect_shape(l.w_down, ff, d, p + "w_down");
    expect_finite(l.attn_norm, p + "attn_norm");
    expect_finite(l.wq.data(), p + "wq");
    expect_finite(l.wk.data(), p + "wk");
    expect_finite(l.wv.data(), p + "wv");
    expect_finite(l.wo.data(), p + "wo");
    expect_finite(l.ffn_norm, p + "ffn_norm");
    expect_finite(l.w_up.data(), p + "w_up");
    expect_finite(l.w_down.data(), p + "w_down");
  }
}

}  // namespace eelab::model
