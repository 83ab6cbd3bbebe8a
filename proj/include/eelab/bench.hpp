// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eelab/causal_profiler.hpp"
#include "eelab/exit_engine.hpp"
#include "eelab/model.hpp"
#include "json.hpp"

namespace eelab::bench {

using model::TokenId;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Dynamics { Unspecified, Static, Dynamic };

std::string_view dynamics_name(Dynamics d);

struct LabeledExample {
  std::string id;
  std::vector<TokenId> prompt_tokens;
  std::vector<std::vector<float>> embedding_prefix;
  std::string label;
  Dynamics dynamics = Dynamics::Unspecified;
  int line = 0;  // 1-based position in the source file

  bool operator==(const LabeledExample&) const = default;
};

// Prompt template slot marker.
inline constexpr TokenId kSceneSlot = -1;

struct TaskSpec {
  exit::MatchSpec match_spec;
  // Tokens wrapped around each example's prompt; kSceneSlot marks where the
  // example's tokens go. Empty means the prompt is used as is.
  std::vector<TokenId> prompt_template;
  std::map<std::string, Dynamics> dynamics_partition;

  const std::string& task_id() const { return match_spec.task_id; }
  const std::vector<std::string>& classes() const { return match_spec.classes; }

  model::TokenInput make_input(const LabeledExample& ex) const;
  void validate() const;  // throws exit::SpecError
};

TaskSpec task_from_json(const nlohmann::json& j);  // throws exit::SpecError
nlohmann::json task_to_json(const TaskSpec& task);
TaskSpec load_task(const std::filesystem::path& path);

// Parses JSONL dataset text. With a model config, assembled inputs are also
// checked against the vocabulary, the embedding width and the context length
// (including room for the answer tokens). Throws DataError naming the line.
std::vector<LabeledExample> parse_dataset(std::string_view text, const TaskSpec& task,
                                          const model::ModelConfig* config = nullptr);
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, const TaskSpec& task,
                                         const model::ModelConfig* config = nullptr);

std::string example_to_jsonl(const LabeledExample& ex);

struct Split {
  std::vector<LabeledExample> profiling;
  std::vector<LabeledExample> eval;
  std::vector<std::string> warnings;
};

// Per class: shuffle with a seed-derived stream, put floor(8n/9) on the
// profiling side and the rest on the eval side. Classes with fewer than nine
// examples go entirely to profiling. Both sides keep file order.
Split split_dataset(std::span<const LabeledExample> examples, std::uint64_t seed);

std::vector<causal::LabeledInput> to_labeled_inputs(std::span<const LabeledExample> examples, const TaskSpec& task);

enum class PolicyKind { Full, Fixed, Dynamic };

struct Policy {
  PolicyKind kind = PolicyKind::Full;
  std::optional<int> exit_layer;  // fixed only; none when no layer was identified
  double threshold = 0.0;         // dynamic only

  static Policy full() { return {}; }
  static Policy fixed(std::optional<int> layer) { return {PolicyKind::Fixed, layer, 0.0}; }
  static Policy dynamic(double tau) { return {PolicyKind::Dynamic, std::nullopt, tau}; }

  std::string label() const;  // "full", "fixed(5)", "fixed(-)", "dynamic(0.5)"
  bool operator==(const Policy&) const = default;
};

// Why a cell has no value.
enum class Missing { None, NoData, NoExitLayer };

std::string_view missing_name(Missing m);

struct ClassResult {
  std::string class_name;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy_pct;
  std::optional<double> layer_fraction;  // mean exited_layer / N
  std::optional<double> wall_ms;         // mean, only when timing is enabled
  Missing missing = Missing::None;
};

struct EvalResult {
  Policy policy;
  std::vector<ClassResult> classes;  // task class order
  // Unweighted means over classes that have a value.
  std::optional<double> avg_accuracy_pct;
  std::optional<double> avg_layer_fraction;
  std::optional<double> avg_wall_ms;
};

struct EvalOptions {
  std::size_t jobs = 1;
  bool wall_clock = false;
};

EvalResult evaluate(const model::LayerStack& model, std::span<const LabeledExample> eval_split, const TaskSpec& task,
                    const Policy& policy, const EvalOptions& options = {});

struct ClassDelta {
  std::string class_name;
  std::optional<double> accuracy_delta_pct;  // candidate - baseline, percentage points
  std::optional<double> latency_improvement_pct;  // (base - cand) / base on layer fraction
  std::optional<double> wall_improvement_pct;
};

struct Comparison {
  std::string baseline;
  std::string candidate;
  std::vector<ClassDelta> classes;
  ClassDelta avg;
};

Comparison compare(const EvalResult& baseline, const EvalResult& candidate);

// Evaluation results for one task. results[0] is the baseline the others are
// compared against.
struct EvalReport {
  std::string task_id;
  std::string model_name;
  int n_layers = 0;
  std::size_t n_eval = 0;
  std::vector<EvalResult> results;
};

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::ordered_json& j);  // throws DataError

enum class Format { Markdown, Csv, Json };

Format parse_format(std::string_view name);  // throws DataError
Format format_from_path(const std::filesystem::path& path, Format fallback);

// Exit layer summary table followed by per-task layer profiles.
std::string render_profiles(std::span<const causal::ProfileReport> reports, Format format);
// Per-class accuracy and latency blocks, one row per class plus Avg.
std::string render_eval(std::span<const EvalReport> reports, Format format);

// Writes `text` to `path`; throws DataError when the path is not writable.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);  // throws DataError

// Planted demonstration task: three classes in the style of a driving-scene
// benchmark, with one synonym token for the vehicle class.
struct FixtureOptions {
  int n_layers = 8;
  int plant_layer = 5;
  std::uint64_t seed = 0;
  int examples_per_key = 27;
  // Adds one example whose key is flipped to a wrong label from this layer on.
  std::optional<int> distract_layer;
};

struct Fixture {
  model::LayerStack model;
  TaskSpec task;
  std::vector<LabeledExample> examples;
};

Fixture make_planted_fixture(const FixtureOptions& options);

}  // namespace eelab::bench
