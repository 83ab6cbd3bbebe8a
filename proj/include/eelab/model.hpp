// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eelab/kernels.hpp"

namespace eelab::model {

using TokenId = std::int32_t;

inline constexpr TokenId kNoToken = -1;
inline constexpr float kNormEps = 1e-5f;

enum class ModelErrc {
  Io,
  BadMagic,
  UnsupportedVersion,
  MalformedHeader,
  DimensionMismatch,
  NonFinite,
  InvalidConfig,
  LayerOutOfRange,
  InputTooLong,
  TokenOutOfRange,
  WidthMismatch,
  InfeasiblePlant,
};

std::string_view errc_name(ModelErrc code);

class ModelError : public std::runtime_error {
 public:
  ModelError(ModelErrc code, const std::string& what);
  ModelErrc code() const noexcept { return code_; }

 private:
  ModelErrc code_;
};

struct ModelConfig {
  int n_layers = 1;
  int d_model = 8;
  int n_heads = 1;
  int d_ff = 16;
  int vocab_size = 2;
  int max_seq = 16;
  // Token that terminates greedy answer decoding; kNoToken disables it.
  TokenId end_token = kNoToken;

  int head_dim() const { return d_model / n_heads; }

  // Throws ModelError(InvalidConfig).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Dense row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// One pre-norm decoder block: x += Attn(RMSNorm(x)); x += FFN(RMSNorm(x)).
struct TransformerLayer {
  std::vector<float> attn_norm;  // d_model
  Matrix wq, wk, wv, wo;         // d_model x d_model
  std::vector<float> ffn_norm;   // d_model
  Matrix w_up;                   // d_model x d_ff
  Matrix w_down;                 // d_ff x d_model

  bool operator==(const TransformerLayer&) const = default;
};

// Immutable, layer-indexed model. All parts are validated on construction, so
// every LayerStack in existence satisfies the shape and finiteness invariants.
class LayerStack {
 public:
  LayerStack(ModelConfig config, Matrix token_embedding, Matrix position_embedding,
             std::vector<TransformerLayer> layers, std::vector<float> final_norm, Matrix unembedding);

  const ModelConfig& config() const { return config_; }
  int n_layers() const { return config_.n_layers; }
  const Matrix& token_embedding() const { return token_embedding_; }
  const Matrix& position_embedding() const { return position_embedding_; }
  const std::vector<TransformerLayer>& layers() const { return layers_; }
  // 1-based: layer(1) is the first transformer block.
  const TransformerLayer& layer(int number) const { return layers_.at(static_cast<std::size_t>(number - 1)); }
  const std::vector<float>& final_norm() const { return final_norm_; }
  const Matrix& unembedding() const { return unembedding_; }

  bool operator==(const LayerStack&) const = default;

 private:
  ModelConfig config_;
  Matrix token_embedding_;     // vocab x d_model
  Matrix position_embedding_;  // max_seq x d_model
  std::vector<TransformerLayer> layers_;
  std::vector<float> final_norm_;
  Matrix unembedding_;         // d_model x vocab
};

struct TokenInput {
  std::vector<TokenId> tokens;
  // Precomputed d_model vectors placed before the token embeddings.
  std::vector<std::vector<float>> embedding_prefix;

  std::size_t length() const { return embedding_prefix.size() + tokens.size(); }
};

// Residual stream after `layer_index` blocks (0 = embeddings only).
struct HiddenState {
  int layer_index = 0;
  std::size_t width = 0;
  std::vector<float> values;  // positions x width, row-major

  std::size_t positions() const { return width == 0 ? 0 : values.size() / width; }
  std::span<const float> position(std::size_t p) const { return {values.data() + p * width, width}; }
  std::span<const float> last() const { return position(positions() - 1); }
};

struct TokenDistribution {
  std::vector<float> logits;
  std::vector<float> probs;
  TokenId top1 = kNoToken;
  float top1_prob = 0.0f;
};

// Incremental forward pass over one input. Each call to advance_to() applies
// only the blocks not yet applied, so stepping through candidate exit layers
// runs every block at most once. Scratch buffers live in the pass, so separate
// passes over one LayerStack may run on separate threads.
class ForwardPass {
 public:
  ForwardPass(const LayerStack& model, const TokenInput& input,
              const kernels::KernelTable& k = kernels::active());
  // Resumes from an existing residual stream.
  ForwardPass(const LayerStack& model, HiddenState start, const kernels::KernelTable& k = kernels::active());

  void advance_to(int layer);
  int layer() const { return state_.layer_index; }
  const HiddenState& state() const { return state_; }
  // Number of transformer blocks executed by this pass.
  std::size_t blocks_executed() const { return blocks_executed_; }

 private:
  void apply_next();

  const LayerStack* model_;
  const kernels::KernelTable* k_;
  HiddenState state_;
  std::size_t blocks_executed_ = 0;
  std::vector<float> norm_, q_, kk_, v_, att_, proj_, ff_, scores_;
};

// Validates token ids, prefix widths and the max_seq bound. Throws ModelError.
void check_input(const LayerStack& model, const TokenInput& input);

HiddenState embed(const LayerStack& model, const TokenInput& input,
                  const kernels::KernelTable& k = kernels::active());

// Embedding followed by exactly the first `layer` blocks.
HiddenState forward_to_layer(const LayerStack& model, const TokenInput& input, int layer,
                             const kernels::KernelTable& k = kernels::active());

// Applies block `number` (1-based) to a state that has seen number-1 blocks.
HiddenState apply_layer(const LayerStack& model, const HiddenState& h, int number,
                        const kernels::KernelTable& k = kernels::active());

// Logit-lens readout of the last position: final norm, unembedding, softmax.
// Top-1 is the argmax of the logits with the smallest token id winning ties.
TokenDistribution decode_at_layer(const LayerStack& model, const HiddenState& h,
                                  const kernels::KernelTable& k = kernels::active());

// Greedy answer decoding with every token read out at `exit_layer`. Stops after
// max_tokens tokens or after emitting the model's end token.
std::vector<TokenId> greedy_continue(const LayerStack& model, const TokenInput& input, int exit_layer,
                                     int max_tokens, const kernels::KernelTable& k = kernels::active());

}  // namespace eelab::model
