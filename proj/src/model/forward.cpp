// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <string>

#include "eelab/model.hpp"

namespace eelab::model {

void check_input(const LayerStack& model, const TokenInput& input) {
  const auto& cfg = model.config();
  if (input.length() == 0) throw ModelError(ModelErrc::InputTooLong, "input is empty");
  if (input.length() > static_cast<std::size_t>(cfg.max_seq)) {
    throw ModelError(ModelErrc::InputTooLong, "input length " + std::to_string(input.length()) +
                                                  " exceeds max_seq " + std::to_string(cfg.max_seq));
  }
  for (TokenId t : input.tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw ModelError(ModelErrc::TokenOutOfRange, "token id " + std::to_string(t) + " outside vocabulary");
    }
  }
  for (const auto& row : input.embedding_prefix) {
    if (row.size() != static_cast<std::size_t>(cfg.d_model)) {
      throw ModelError(ModelErrc::WidthMismatch, "embedding prefix row has width " + std::to_string(row.size()));
    }
  }
}

HiddenState embed(const LayerStack& model, const TokenInput& input, const kernels::KernelTable& k) {
  check_input(model, input);
  const auto d = static_cast<std::size_t>(model.config().d_model);
  HiddenState h;
  h.layer_index = 0;
  h.width = d;
  h.values.resize(input.length() * d);
  std::size_t p = 0;
  for (const auto& row : input.embedding_prefix) {
    std::copy(row.begin(), row.end(), h.values.begin() + static_cast<std::ptrdiff_t>(p * d));
    ++p;
  }
  for (TokenId t : input.tokens) {
    auto src = model.token_embedding().row(static_cast<std::size_t>(t));
    std::copy(src.begin(), src.end(), h.values.begin() + static_cast<std::ptrdiff_t>(p * d));
    ++p;
  }
  for (p = 0; p < input.length(); ++p) {
    k.add(h.values.data() + p * d, model.position_embedding().row(p).data(), d);
  }
  return h;
}

ForwardPass::ForwardPass(const LayerStack& model, const TokenInput& input, const kernels::KernelTable& k)
    : model_(&model), k_(&k), state_(embed(model, input, k)) {}

ForwardPass::ForwardPass(const LayerStack& model, HiddenState start, const kernels::KernelTable& k)
    : model_(&model), k_(&k), state_(std::move(start)) {
  if (state_.width != static_cast<std::size_t>(model.config().d_model)) {
    throw ModelError(ModelErrc::WidthMismatch, "hidden state width does not match the model");
  }
}

void ForwardPass::advance_to(int layer) {
  if (layer < 0 || layer > model_->n_layers()) {
    throw ModelError(ModelErrc::LayerOutOfRange, "layer " + std::to_string(layer) + " outside [0, " +
                                                     std::to_string(model_->n_layers()) + "]");
  }
  if (layer < state_.layer_index) {
    throw ModelError(ModelErrc::LayerOutOfRange, "forward pass cannot move backwards");
  }
  while (state_.layer_index < layer) apply_next();
}

void ForwardPass::apply_next() {
  const auto& cfg = model_->config();
  const auto& blk = model_->layer(state_.layer_index + 1);
  const auto& k = *k_;
  const std::size_t d = state_.width;
  const std::size_t ff = static_cast<std::size_t>(cfg.d_ff);
  const std::size_t heads = static_cast<std::size_t>(cfg.n_heads);
  const std::size_t hd = d / heads;
  const std::size_t n = state_.positions();
  const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));
  float* x = state_.values.data();

  norm_.resize(d);
  q_.resize(n * d);
  kk_.resize(n * d);
  v_.resize(n * d);
  att_.assign(n * d, 0.0f);
  proj_.resize(d);
  ff_.resize(ff);
  scores_.resize(n);

  for (std::size_t p = 0; p < n; ++p) {
    k.rmsnorm(x + p * d, blk.attn_norm.data(), norm_.data(), d, kNormEps);
    k.gemv(norm_.data(), blk.wq.data().data(), q_.data() + p * d, d, d);
    k.gemv(norm_.data(), blk.wk.data().data(), kk_.data() + p * d, d, d);
    k.gemv(norm_.data(), blk.wv.data().data(), v_.data() + p * d, d, d);
  }
  // Causal attention: position i attends to 0..i.
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        scores_[j] = k.dot(q_.data() + i * d + off, kk_.data() + j * d + off, hd) * inv_sqrt_hd;
      }
      kernels::softmax(k, {scores_.data(), i + 1});
      float* out = att_.data() + i * d + off;
      for (std::size_t j = 0; j <= i; ++j) k.axpy(scores_[j], v_.data() + j * d + off, out, hd);
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    k.gemv(att_.data() + p * d, blk.wo.data().data(), proj_.data(), d, d);
    k.add(x + p * d, proj_.data(), d);
  }
  for (std::size_t p = 0; p < n; ++p) {
    k.rmsnorm(x + p * d, blk.ffn_norm.data(), norm_.data(), d, kNormEps);
    k.gemv(norm_.data(), blk.w_up.data().data(), ff_.data(), d, ff);
    k.relu(ff_.data(), ff);
    k.gemv(ff_.data(), blk.w_down.data().data(), proj_.data(), ff, d);
    k.add(x + p * d, proj_.data(), d);
  }
  ++state_.layer_index;
  ++blocks_executed_;
}

HiddenState forward_to_layer(const LayerStack& model, const TokenInput& input, int layer,
                             const kernels::KernelTable& k) {
  if (layer < 0 || layer > model.n_layers()) {
    throw ModelError(ModelErrc::LayerOutOfRange, "layer " + std::to_string(layer) + " outside [0, " +
                                                     std::to_string(model.n_layers()) + "]");
  }
  ForwardPass pass(model, input, k);
  pass.advance_to(layer);
  return pass.state();
}

HiddenState apply_layer(const LayerStack& model, const HiddenState& h, int number, const kernels::KernelTable& k) {
  if (number < 1 || number > model.n_layers() || h.layer_index != number - 1) {
    throw ModelError(ModelErrc::LayerOutOfRange, "cannot apply layer " + std::to_string(number) +
                                                     " to a state at layer " + std::to_string(h.layer_index));
  }
  ForwardPass pass(model, h, k);
  pass.advance_to(number);
  return pass.state();
}

TokenDistribution decode_at_layer(const LayerStack& model, const HiddenState& h, const kernels::KernelTable& k) {
  const auto& cfg = model.config();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto v = static_cast<std::size_t>(cfg.vocab_size);
  if (h.width != d) throw ModelError(ModelErrc::WidthMismatch, "hidden state width does not match the model");
  if (h.positions() == 0) throw ModelError(ModelErrc::WidthMismatch, "hidden state has no positions");

  std::vector<float> normed(d);
  k.rmsnorm(h.last().data(), model.final_norm().data(), normed.data(), d, kNormEps);
  TokenDistribution out;
  out.logits.resize(v);
  k.gemv(normed.data(), model.unembedding().data().data(), out.logits.data(), d, v);

  std::size_t best = 0;
  for (std::size_t t = 1; t < v; ++t) {
    if (out.logits[t] > out.logits[best]) best = t;
  }
  out.probs = out.logits;
  kernels::softmax(k, out.probs);
  out.top1 = static_cast<TokenId>(best);
  out.top1_prob = out.probs[best];
  return out;
}

std::vector<TokenId> greedy_continue(const LayerStack& model, const TokenInput& input, int exit_layer, int max_tokens,
                                     const kernels::KernelTable& k) {
  if (exit_layer < 1 || exit_layer > model.n_layers()) {
    throw ModelError(ModelErrc::LayerOutOfRange, "exit layer " + std::to_string(exit_layer) + " outside [1, " +
                                                     std::to_string(model.n_layers()) + "]");
  }
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  std::vector<TokenId> out;
  TokenInput cur = input;
  const TokenId end = model.config().end_token;
  while (static_cast<int>(out.size()) < max_tokens) {
    // check_input inside the pass reports an over-long sequence.
    ForwardPass pass(model, cur, k);
    pass.advance_to(exit_layer);
    const TokenId t = decode_at_layer(model, pass.state(), k).top1;
    out.push_back(t);
    if (t == end) break;
    cur.tokens.push_back(t);
  }
  return out;
}

}  // namespace eelab::model
