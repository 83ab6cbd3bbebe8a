// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eelab/bench.hpp"

namespace eelab::bench {

using nlohmann::json;

std::string_view dynamics_name(Dynamics d) {
  switch (d) {
    case Dynamics::Static: return "static";
    case Dynamics::Dynamic: return "dynamic";
    case Dynamics::Unspecified: break;
  }
  return "unspecified";
}

namespace {

std::optional<Dynamics> parse_dynamics(const json& j) {
  if (j.is_null()) return Dynamics::Unspecified;
  if (!j.is_string()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s == "static") return Dynamics::Static;
  if (s == "dynamic") return Dynamics::Dynamic;
  return std::nullopt;
}

}  // namespace

model::TokenInput TaskSpec::make_input(const LabeledExample& ex) const {
  model::TokenInput in;
  in.embedding_prefix = ex.embedding_prefix;
  if (prompt_template.empty()) {
    in.tokens = ex.prompt_tokens;
    return in;
  }
  for (TokenId t : prompt_template) {
    if (t == kSceneSlot) {
      in.tokens.insert(in.tokens.end(), ex.prompt_tokens.begin(), ex.prompt_tokens.end());
    } else {
      in.tokens.push_back(t);
    }
  }
  return in;
}

void TaskSpec::validate() const {
  match_spec.validate();
  if (!prompt_template.empty() && std::count(prompt_template.begin(), prompt_template.end(), kSceneSlot) != 1) {
    throw exit::SpecError("prompt_template must contain exactly one scene slot (-1)");
  }
  for (TokenId t : prompt_template) {
    if (t < kSceneSlot) throw exit::SpecError("prompt_template has negative token id " + std::to_string(t));
  }
  if (!dynamics_partition.empty()) {
    std::set<std::string> covered;
    for (const auto& [cls, d] : dynamics_partition) covered.insert(cls);
    const std::set<std::string> classes(match_spec.classes.begin(), match_spec.classes.end());
    if (covered != classes) throw exit::SpecError("dynamics partition must cover exactly the task classes");
  }
}

TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  t.match_spec = j.get<exit::MatchSpec>();
  try {
    t.prompt_template = j.value("prompt_template", std::vector<TokenId>{});
    if (j.contains("dynamics") && !j.at("dynamics").is_null()) {
      for (const auto& [cls, v] : j.at("dynamics").items()) {
        const auto d = parse_dynamics(v);
        if (!d || *d == Dynamics::Unspecified) {
          throw exit::SpecError("dynamics for class '" + cls + "' must be \"static\" or \"dynamic\"");
        }
        t.dynamics_partition[cls] = *d;
      }
    }
  } catch (const json::exception& e) {
    throw exit::SpecError(std::string("malformed task file: ") + e.what());
  }
  t.validate();
  return t;
}

json task_to_json(const TaskSpec& task) {
  json j = task.match_spec;
  if (!task.prompt_template.empty()) j["prompt_template"] = task.prompt_template;
  if (!task.dynamics_partition.empty()) {
    json d = json::object();
    for (const auto& [cls, v] : task.dynamics_partition) d[cls] = std::string(dynamics_name(v));
    j["dynamics"] = std::move(d);
  }
  return j;
}

TaskSpec load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw exit::SpecError("cannot open task file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw exit::SpecError("task file " + path.string() + " is not valid JSON: " + e.what());
  }
  return task_from_json(j);
}

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

LabeledExample parse_line(const json& j, int line, const TaskSpec& task, const std::set<std::string>& classes,
                          const model::ModelConfig* config, int answer_length) {
  if (!j.is_object()) fail(line, "expected a JSON object");
  LabeledExample ex;
  ex.line = line;
  try {
    ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    ex.prompt_tokens = j.at("prompt_tokens").get<std::vector<TokenId>>();
    if (j.contains("embedding_prefix") && !j.at("embedding_prefix").is_null()) {
      ex.embedding_prefix = j.at("embedding_prefix").get<std::vector<std::vector<float>>>();
    }
    ex.label = j.at("label").get<std::string>();
  } catch (const json::exception& e) {
    fail(line, std::string("malformed example: ") + e.what());
  }
  const auto dyn = parse_dynamics(j.contains("dynamics") ? j.at("dynamics") : json(nullptr));
  if (!dyn) fail(line, "dynamics must be \"static\", \"dynamic\" or null");
  ex.dynamics = *dyn;

  if (!classes.contains(ex.label)) fail(line, "label '" + ex.label + "' is not a class of task '" + task.task_id() + "'");
  if (ex.dynamics != Dynamics::Unspecified && !task.dynamics_partition.empty() &&
      task.dynamics_partition.at(ex.label) != ex.dynamics) {
    fail(line, "dynamics '" + std::string(dynamics_name(ex.dynamics)) + "' disagrees with the task for class '" +
                   ex.label + "'");
  }
  if (ex.prompt_tokens.empty()) fail(line, "prompt_tokens is empty");
  for (TokenId t : ex.prompt_tokens) {
    if (t < 0) fail(line, "token id " + std::to_string(t) + " out of vocabulary");
  }
  for (const auto& row : ex.embedding_prefix) {
    for (float v : row) {
      if (!std::isfinite(v)) fail(line, "embedding_prefix has a non-finite value");
    }
  }
  if (config != nullptr) {
    const auto in = task.make_input(ex);
    for (TokenId t : in.tokens) {
      if (t >= config->vocab_size) fail(line, "token id " + std::to_string(t) + " out of vocabulary");
    }
    for (const auto& row : in.embedding_prefix) {
      if (row.size() != static_cast<std::size_t>(config->d_model)) {
        fail(line, "embedding_prefix row width " + std::to_string(row.size()) + " != d_model " +
                       std::to_string(config->d_model));
      }
    }
    const std::size_t needed = in.length() + static_cast<std::size_t>(answer_length) - 1;
    if (needed > static_cast<std::size_t>(config->max_seq)) {
      fail(line, "sequence too long: " + std::to_string(in.length()) + " input positions plus " +
                     std::to_string(answer_length - 1) + " answer positions exceed max_seq " +
                     std::to_string(config->max_seq));
    }
  }
  return ex;
}

}  // namespace

std::vector<LabeledExample> parse_dataset(std::string_view text, const TaskSpec& task,
                                          const model::ModelConfig* config) {
  const std::set<std::string> classes(task.classes().begin(), task.classes().end());
  const int answer_length = exit::Matcher(task.match_spec).answer_length();
  std::vector<LabeledExample> out;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(number, std::string("parse error: ") + e.what());
    }
    auto ex = parse_line(j, number, task, classes, config, answer_length);
    if (!ids.insert(ex.id).second) fail(number, "duplicate id '" + ex.id + "'");
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw DataError("empty dataset");
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, const TaskSpec& task,
                                         const model::ModelConfig* config) {
  try {
    return parse_dataset(read_text(path), task, config);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string example_to_jsonl(const LabeledExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["prompt_tokens"] = ex.prompt_tokens;
  if (!ex.embedding_prefix.empty()) j["embedding_prefix"] = ex.embedding_prefix;
  j["label"] = ex.label;
  j["dynamics"] = ex.dynamics == Dynamics::Unspecified ? nlohmann::ordered_json(nullptr)
                                                       : nlohmann::ordered_json(std::string(dynamics_name(ex.dynamics)));
  return j.dump();
}

std::vector<causal::LabeledInput> to_labeled_inputs(std::span<const LabeledExample> examples, const TaskSpec& task) {
  std::vector<causal::LabeledInput> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back({task.make_input(ex), ex.label});
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace eelab::bench
