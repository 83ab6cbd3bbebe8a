// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>

#include "eelab/bench.hpp"
#include "eelab/rng.hpp"

namespace eelab::bench {

namespace {

// FNV-1a, so each class gets its own shuffle stream independent of which
// other classes are present.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Split split_dataset(std::span<const LabeledExample> examples, std::uint64_t seed) {
  if (examples.empty()) throw DataError("cannot split an empty dataset");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].label].push_back(i);

  Split out;
  std::vector<char> to_eval(examples.size(), 0);
  for (auto& [cls, idx] : by_class) {
    const std::size_t n = idx.size();
    if (n < 9) {
      out.warnings.push_back("class '" + cls + "' has " + std::to_string(n) +
                             " examples (< 9); all go to the profiling split");
      continue;
    }
    Rng rng(seed ^ fnv1a(cls));
    rng.shuffle(idx);
    const std::size_t n_profile = n * 8 / 9;
    for (std::size_t j = n_profile; j < n; ++j) to_eval[idx[j]] = 1;
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (to_eval[i] ? out.eval : out.profiling).push_back(examples[i]);
  }
  return out;
}

}  // namespace eelab::bench
