// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eelab/model.hpp"
#include "json.hpp"

namespace eelab::exit {

using model::TokenId;

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target label set and exit threshold for one task.
struct MatchSpec {
  std::string task_id;
  std::vector<std::string> classes;
  // class -> token sequences that name it (canonical label and synonyms).
  std::map<std::string, std::vector<std::vector<TokenId>>> label_tokens;
  // Minimum top-1 probability for an early exit. Values above 1 never match.
  double threshold = 0.0;
  // Strictly increasing layers probed for an exit; empty means 1..N.
  std::vector<int> candidate_layers;

  // Throws SpecError.
  void validate() const;

  // Throws SpecError when a candidate lies outside [1, n_layers].
  std::vector<int> resolved_candidates(int n_layers) const;

  bool operator==(const MatchSpec&) const = default;
};

void to_json(nlohmann::json& j, const MatchSpec& s);
void from_json(const nlohmann::json& j, MatchSpec& s);

MatchSpec load_match_spec(const std::filesystem::path& path);

struct MatchResult {
  bool matched = false;
  std::optional<std::string> class_name;
  std::vector<TokenId> tokens;  // the matched label sequence
};

// Produces the greedy answer of n tokens at the layer being matched; the first
// token is the distribution's top-1.
using ContinuationFn = std::function<std::vector<TokenId>(int n)>;

// Indexed, validated MatchSpec.
class Matcher {
 public:
  explicit Matcher(MatchSpec spec);

  const MatchSpec& spec() const { return spec_; }

  // Longest label sequence, at least 1: the number of answer tokens decoded
  // when a prediction is read out at a fixed depth.
  int answer_length() const { return answer_length_; }

  // Longest label starting with `first`, 0 if none.
  int longest_label_from(TokenId first) const;

  // The matching function: the top-1 token must start a mapped sequence, its
  // probability must reach the threshold, and for multi-token labels the
  // greedy continuation must reproduce the whole sequence. The longest such
  // sequence wins. Without `cont` only single-token labels can match.
  MatchResult match(const model::TokenDistribution& dist, const ContinuationFn& cont = {}) const;

  // Class of the longest mapped sequence that prefixes `answer`.
  std::optional<std::string> classify(std::span<const TokenId> answer) const;

 private:
  struct Label {
    std::vector<TokenId> seq;
    std::string class_name;
  };
  MatchSpec spec_;
  std::map<TokenId, std::vector<Label>> by_first_;  // longest first
  int answer_length_ = 1;
};

MatchResult match(const model::TokenDistribution& dist, const MatchSpec& spec);

struct LatencyRecord {
  int layers_executed = 0;
  double layer_fraction = 0.0;  // layers_executed / N
  double wall_ms = 0.0;         // informational only
};

struct ExitDecision {
  int exited_layer = 0;
  bool exited_early = false;
  std::optional<std::string> predicted_class;
  double confidence = 0.0;  // top-1 probability at the exit layer
  int layers_executed = 0;
  LatencyRecord latency;
  std::vector<TokenId> tokens;  // answer tokens emitted at the exit layer
};

// Counts transformer blocks actually run, including those spent decoding
// continuation tokens.
struct ExecutionTrace {
  int deepest_layer = 0;
  std::size_t blocks_executed = 0;
};

// Dynamic exit: probes candidate layers in ascending order on one incremental
// forward pass and stops at the first match. Falls back to the full model's
// answer (mapped without the threshold) when nothing matches.
ExitDecision run_with_early_exit(const model::LayerStack& model, const model::TokenInput& input, const Matcher& matcher,
                                 ExecutionTrace* trace = nullptr,
                                 const kernels::KernelTable& k = kernels::active());
ExitDecision run_with_early_exit(const model::LayerStack& model, const model::TokenInput& input, const MatchSpec& spec);

// Reads the answer out at exactly `layer` (1..N).
ExitDecision run_fixed_exit(const model::LayerStack& model, const model::TokenInput& input, const Matcher& matcher,
                            int layer, ExecutionTrace* trace = nullptr,
                            const kernels::KernelTable& k = kernels::active());
ExitDecision run_fixed_exit(const model::LayerStack& model, const model::TokenInput& input, const MatchSpec& spec,
                            int layer);

// Class predicted at `layer` (0..N, 0 = embeddings only) under the same
// semantics as run_fixed_exit, decoding continuation tokens only when the
// first token starts a multi-token label.
std::optional<std::string> predict_class_at(const model::LayerStack& model, const model::TokenInput& input,
                                            const Matcher& matcher, int layer,
                                            const kernels::KernelTable& k = kernels::active());

// predict_class_at for every layer 0..N on one incremental pass.
std::vector<std::optional<std::string>> predict_class_all_layers(const model::LayerStack& model,
                                                                 const model::TokenInput& input,
                                                                 const Matcher& matcher,
                                                                 const kernels::KernelTable& k = kernels::active());

}  // namespace eelab::exit
