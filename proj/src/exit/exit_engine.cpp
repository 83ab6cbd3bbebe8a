// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>

#include "eelab/exit_engine.hpp"

namespace eelab::exit {

using model::ForwardPass;
using model::LayerStack;
using model::TokenInput;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void note(ExecutionTrace* trace, const ForwardPass& pass) {
  if (trace == nullptr) return;
  trace->blocks_executed += pass.blocks_executed();
  trace->deepest_layer = std::max(trace->deepest_layer, pass.layer());
}

// Greedy answer of up to n tokens at `layer`, given its already decoded first
// token. Each further token re-runs the extended sequence to `layer`.
std::vector<TokenId> answer_from(const LayerStack& model, const TokenInput& input, int layer, TokenId first, int n,
                                 ExecutionTrace* trace, const kernels::KernelTable& k) {
  std::vector<TokenId> out{first};
  const TokenId end = model.config().end_token;
  if (first == end) return out;
  TokenInput cur = input;
  cur.tokens.push_back(first);
  while (static_cast<int>(out.size()) < n) {
    ForwardPass pass(model, cur, k);
    pass.advance_to(layer);
    note(trace, pass);
    const TokenId t = model::decode_at_layer(model, pass.state(), k).top1;
    out.push_back(t);
    if (t == end) break;
    cur.tokens.push_back(t);
  }
  return out;
}

void finish(ExitDecision& d, int n_layers, Clock::time_point t0) {
  d.layers_executed = d.exited_layer;
  d.exited_early = d.exited_layer < n_layers;
  d.latency.layers_executed = d.exited_layer;
  d.latency.layer_fraction = static_cast<double>(d.exited_layer) / static_cast<double>(n_layers);
  d.latency.wall_ms = ms_since(t0);
}

}  // namespace

ExitDecision run_with_early_exit(const LayerStack& model, const TokenInput& input, const Matcher& matcher,
                                 ExecutionTrace* trace, const kernels::KernelTable& k) {
  const auto t0 = Clock::now();
  const int n = model.n_layers();
  const auto candidates = matcher.spec().resolved_candidates(n);
  ForwardPass pass(model, input, k);
  ExitDecision d;
  for (int layer : candidates) {
    pass.advance_to(layer);
    const auto dist = model::decode_at_layer(model, pass.state(), k);
    auto cont = [&](int len) { return answer_from(model, input, layer, dist.top1, len, trace, k); };
    const MatchResult m = matcher.match(dist, cont);
    if (m.matched) {
      note(trace, pass);
      d.exited_layer = layer;
      d.predicted_class = m.class_name;
      d.confidence = dist.top1_prob;
      d.tokens = m.tokens;
      finish(d, n, t0);
      return d;
    }
  }
  pass.advance_to(n);
  note(trace, pass);
  const auto dist = model::decode_at_layer(model, pass.state(), k);
  d.exited_layer = n;
  d.tokens = answer_from(model, input, n, dist.top1, matcher.answer_length(), trace, k);
  d.predicted_class = matcher.classify(d.tokens);
  d.confidence = dist.top1_prob;
  finish(d, n, t0);
  return d;
}

ExitDecision run_with_early_exit(const LayerStack& model, const TokenInput& input, const MatchSpec& spec) {
  return run_with_early_exit(model, input, Matcher(spec));
}

ExitDecision run_fixed_exit(const LayerStack& model, const TokenInput& input, const Matcher& matcher, int layer,
                            ExecutionTrace* trace, const kernels::KernelTable& k) {
  const int n = model.n_layers();
  if (layer < 1 || layer > n) {
    throw model::ModelError(model::ModelErrc::LayerOutOfRange,
                            "exit layer " + std::to_string(layer) + " outside [1, " + std::to_string(n) + "]");
  }
  const auto t0 = Clock::now();
  ForwardPass pass(model, input, k);
  pass.advance_to(layer);
  note(trace, pass);
  const auto dist = model::decode_at_layer(model, pass.state(), k);
  ExitDecision d;
  d.exited_layer = layer;
  d.tokens = answer_from(model, input, layer, dist.top1, matcher.answer_length(), trace, k);
  d.predicted_class = matcher.classify(d.tokens);
  d.confidence = dist.top1_prob;
  finish(d, n, t0);
  return d;
}

ExitDecision run_fixed_exit(const LayerStack& model, const TokenInput& input, const MatchSpec& spec, int layer) {
  return run_fixed_exit(model, input, Matcher(spec), layer);
}

namespace {

std::optional<std::string> classify_from(const LayerStack& model, const TokenInput& input, const Matcher& matcher,
                                         int layer, const model::TokenDistribution& dist,
                                         const kernels::KernelTable& k) {
  const int longest = matcher.longest_label_from(dist.top1);
  if (longest == 0) return std::nullopt;
  if (longest == 1) return matcher.classify(std::span<const TokenId>(&dist.top1, 1));
  return matcher.classify(answer_from(model, input, layer, dist.top1, longest, nullptr, k));
}

}  // namespace

std::optional<std::string> predict_class_at(const LayerStack& model, const TokenInput& input, const Matcher& matcher,
                                            int layer, const kernels::KernelTable& k) {
  ForwardPass pass(model, input, k);
  pass.advance_to(layer);
  return classify_from(model, input, matcher, layer, model::decode_at_layer(model, pass.state(), k), k);
}

std::vector<std::optional<std::string>> predict_class_all_layers(const LayerStack& model, const TokenInput& input,
                                                                 const Matcher& matcher,
                                                                 const kernels::KernelTable& k) {
  std::vector<std::optional<std::string>> out;
  out.reserve(static_cast<std::size_t>(model.n_layers()) + 1);
  ForwardPass pass(model, input, k);
  for (int layer = 0; layer <= model.n_layers(); ++layer) {
    pass.advance_to(layer);
    out.push_back(classify_from(model, input, matcher, layer, model::decode_at_layer(model, pass.state(), k), k));
  }
  return out;
}

}  // namespace eelab::exit
