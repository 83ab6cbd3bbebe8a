// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "eelab/exit_engine.hpp"

namespace eelab::exit {

using nlohmann::json;

void MatchSpec::validate() const {
  if (classes.empty()) throw SpecError("task '" + task_id + "' has no classes");
  std::set<std::string> names;
  for (const auto& c : classes) {
    if (!names.insert(c).second) throw SpecError("duplicate class '" + c + "'");
  }
  std::map<std::vector<TokenId>, std::string> owner;
  for (const auto& [cls, seqs] : label_tokens) {
    if (!names.contains(cls)) throw SpecError("label_tokens names unknown class '" + cls + "'");
    if (seqs.empty()) throw SpecError("class '" + cls + "' has an empty label set");
    for (const auto& seq : seqs) {
      if (seq.empty()) throw SpecError("class '" + cls + "' has an empty token sequence");
      auto [it, inserted] = owner.emplace(seq, cls);
      if (!inserted && it->second != cls) {
        throw SpecError("token sequence mapped to both '" + it->second + "' and '" + cls + "'");
      }
    }
  }
  if (!std::isfinite(threshold) || threshold < 0.0) throw SpecError("threshold must be a finite value >= 0");
  for (std::size_t i = 0; i < candidate_layers.size(); ++i) {
    if (candidate_layers[i] < 1) throw SpecError("candidate layers must be >= 1");
    if (i > 0 && candidate_layers[i] <= candidate_layers[i - 1]) {
      throw SpecError("candidate layers must be strictly increasing");
    }
  }
}

std::vector<int> MatchSpec::resolved_candidates(int n_layers) const {
  if (candidate_layers.empty()) {
    std::vector<int> all(static_cast<std::size_t>(n_layers));
    for (int i = 0; i < n_layers; ++i) all[static_cast<std::size_t>(i)] = i + 1;
    return all;
  }
  for (int l : candidate_layers) {
    if (l < 1 || l > n_layers) {
      throw SpecError("candidate layer " + std::to_string(l) + " outside [1, " + std::to_string(n_layers) + "]");
    }
  }
  return candidate_layers;
}

void to_json(json& j, const MatchSpec& s) {
  j = json{{"task_id", s.task_id},
           {"classes", s.classes},
           {"label_tokens", s.label_tokens},
           {"threshold", s.threshold},
           {"candidate_layers", s.candidate_layers}};
}

void from_json(const json& j, MatchSpec& s) {
  try {
    s.task_id = j.at("task_id").get<std::string>();
    s.classes = j.at("classes").get<std::vector<std::string>>();
    s.label_tokens = j.at("label_tokens").get<std::map<std::string, std::vector<std::vector<TokenId>>>>();
    s.threshold = j.value("threshold", 0.0);
    s.candidate_layers = j.value("candidate_layers", std::vector<int>{});
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed task file: ") + e.what());
  }
  s.validate();
}

MatchSpec load_match_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open task file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SpecError("task file " + path.string() + " is not valid JSON: " + e.what());
  }
  return j.get<MatchSpec>();
}

Matcher::Matcher(MatchSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& [cls, seqs] : spec_.label_tokens) {
    for (const auto& seq : seqs) {
      by_first_[seq.front()].push_back({seq, cls});
      answer_length_ = std::max(answer_length_, static_cast<int>(seq.size()));
    }
  }
  for (auto& [first, labels] : by_first_) {
    std::stable_sort(labels.begin(), labels.end(),
                     [](const Label& a, const Label& b) { return a.seq.size() > b.seq.size(); });
  }
}

int Matcher::longest_label_from(TokenId first) const {
  auto it = by_first_.find(first);
  return it == by_first_.end() ? 0 : static_cast<int>(it->second.front().seq.size());
}

MatchResult Matcher::match(const model::TokenDistribution& dist, const ContinuationFn& cont) const {
  MatchResult r;
  auto it = by_first_.find(dist.top1);
  if (it == by_first_.end()) return r;
  if (static_cast<double>(dist.top1_prob) < spec_.threshold) return r;
  std::vector<TokenId> answer{dist.top1};
  bool continued = false;
  for (const auto& label : it->second) {
    if (label.seq.size() > 1) {
      if (!cont) continue;
      if (!continued) {
        answer = cont(static_cast<int>(it->second.front().seq.size()));
        continued = true;
      }
      if (answer.size() < label.seq.size() || !std::equal(label.seq.begin(), label.seq.end(), answer.begin())) {
        continue;
      }
    }
    r.matched = true;
    r.class_name = label.class_name;
    r.tokens = label.seq;
    return r;
  }
  return r;
}

std::optional<std::string> Matcher::classify(std::span<const TokenId> answer) const {
  if (answer.empty()) return std::nullopt;
  auto it = by_first_.find(answer.front());
  if (it == by_first_.end()) return std::nullopt;
  for (const auto& label : it->second) {
    if (answer.size() >= label.seq.size() && std::equal(label.seq.begin(), label.seq.end(), answer.begin())) {
      return label.class_name;
    }
  }
  return std::nullopt;
}

MatchResult match(const model::TokenDistribution& dist, const MatchSpec& spec) { return Matcher(spec).match(dist); }

}  // namespace eelab::exit
