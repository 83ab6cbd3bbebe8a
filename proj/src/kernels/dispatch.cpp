// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace eelab::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_table() { return scalar::table(); }

const KernelTable* avx2_table() {
#if defined(EELAB_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("EELAB_KERNELS");
    if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
  }();
  return *chosen;
}

const KernelTable& table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return scalar_table();
    case Isa::Avx2:
      if (const KernelTable* t = avx2_table()) return *t;
      throw std::runtime_error("avx2 kernels are not available on this machine");
  }
  throw std::invalid_argument("unknown isa");
}

void softmax(const KernelTable& k, std::span<float> x) {
  if (x.empty()) return;
  const float m = k.max(x.data(), x.size());
  float sum = 0.0f;
  for (float& v : x) {
    v = std::exp(v - m);
    sum += v;
  }
  k.scale(x.data(), 1.0f / sum, x.size());
}

}  // namespace eelab::kernels
