// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "eelab/kernels.hpp"
#include "eelab/model.hpp"
#include "eelab/planted.hpp"
#include "eelab/rng.hpp"

using namespace eelab;
using kernels::KernelTable;

namespace {

std::vector<float> draw(Rng& rng, std::size_t n, float a = 1.0f) {
  std::vector<float> v(n);
  for (auto& e : v) e = rng.symmetric(a);
  return v;
}

// Lengths around every SIMD boundary the AVX2 table uses.
const std::vector<std::size_t> kLengths = {0, 1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 32, 33, 63, 64, 65, 100, 257};

bool close(float a, float b, float tol = 1e-5f) { return std::fabs(a - b) <= tol * (1.0f + std::fabs(b)); }

}  // namespace

TEST_CASE("scalar kernels compute the documented functions") {
  const auto& k = kernels::scalar_table();
  const std::vector<float> a = {1, 2, 3, -4};
  const std::vector<float> b = {0.5f, -1, 2, 0.25f};
  CHECK(k.dot(a.data(), b.data(), 4) == doctest::Approx(0.5 - 2 + 6 - 1));

  // [1 2 3; 4 5 6] with x = [1, -1] -> [-3, -3, -3]
  const std::vector<float> w = {1, 2, 3, 4, 5, 6};
  const std::vector<float> x = {1, -1};
  std::vector<float> y(3, 99.0f);
  k.gemv(x.data(), w.data(), y.data(), 2, 3);
  CHECK(y == std::vector<float>{-3, -3, -3});

  std::vector<float> r = {-1, 0, 2};
  k.relu(r.data(), 3);
  CHECK(r == std::vector<float>{0, 0, 2});
  CHECK(k.max(a.data(), 4) == 3.0f);

  // rms([3, 4]) = sqrt(12.5)
  const std::vector<float> v = {3, 4};
  const std::vector<float> g = {1, 2};
  std::vector<float> out(2);
  k.rmsnorm(v.data(), g.data(), out.data(), 2, 0.0f);
  CHECK(out[0] == doctest::Approx(3 / std::sqrt(12.5)));
  CHECK(out[1] == doctest::Approx(8 / std::sqrt(12.5)));

  std::vector<float> s = {1, 1, 1, 1};
  kernels::softmax(k, s);
  for (float e : s) CHECK(e == doctest::Approx(0.25));
}

TEST_CASE("softmax is shift invariant and stable for large logits") {
  const auto& k = kernels::scalar_table();
  std::vector<float> a = {1000.0f, 1001.0f, 999.0f};
  std::vector<float> b = {0.0f, 1.0f, -1.0f};
  kernels::softmax(k, a);
  kernels::softmax(k, b);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::isfinite(a[i]));
    CHECK(a[i] == doctest::Approx(b[i]));
  }
}

TEST_CASE("AVX2 table matches the scalar reference") {
  const KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 table unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const auto& ref = kernels::scalar_table();
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      const auto a = draw(rng, n);
      const auto b = draw(rng, n);
      CHECK(close(simd->dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), 1e-4f));
      if (n > 0) CHECK(simd->max(a.data(), n) == ref.max(a.data(), n));

      auto y1 = draw(rng, n);
      auto y2 = y1;
      simd->axpy(0.75f, a.data(), y1.data(), n);
      ref.axpy(0.75f, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]));

      y1 = y2;
      simd->add(y1.data(), b.data(), n);
      ref.add(y2.data(), b.data(), n);
      CHECK(y1 == y2);

      simd->scale(y1.data(), -1.5f, n);
      ref.scale(y2.data(), -1.5f, n);
      CHECK(y1 == y2);

      simd->relu(y1.data(), n);
      ref.relu(y2.data(), n);
      CHECK(y1 == y2);

      if (n > 0) {
        const auto g = draw(rng, n, 2.0f);
        std::vector<float> o1(n), o2(n);
        simd->rmsnorm(a.data(), g.data(), o1.data(), n, model::kNormEps);
        ref.rmsnorm(a.data(), g.data(), o2.data(), n, model::kNormEps);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(o1[i], o2[i], 1e-4f));
      }
    }
    for (std::size_t rows : {1u, 5u, 16u, 33u}) {
      for (std::size_t cols : kLengths) {
        if (cols == 0) continue;
        CAPTURE(rows);
        CAPTURE(cols);
        const auto x = draw(rng, rows);
        const auto w = draw(rng, rows * cols);
        std::vector<float> y1(cols), y2(cols);
        simd->gemv(x.data(), w.data(), y1.data(), rows, cols);
        ref.gemv(x.data(), w.data(), y2.data(), rows, cols);
        for (std::size_t i = 0; i < cols; ++i) CHECK(close(y1[i], y2[i], 1e-4f));
      }
    }
  }
}

TEST_CASE("forward pass agrees across kernel tables") {
  const KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) return;
  model::ModelConfig cfg;
  cfg.n_layers = 3;
  cfg.d_model = 40;
  cfg.n_heads = 4;
  cfg.d_ff = 72;
  cfg.vocab_size = 37;
  cfg.max_seq = 12;
  const auto m = model::build_random_model(cfg, 11);
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    model::TokenInput in;
    const auto len = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < len; ++i) in.tokens.push_back(static_cast<model::TokenId>(rng.below(37)));
    for (int layer = 0; layer <= 3; ++layer) {
      const auto h1 = model::forward_to_layer(m, in, layer, *simd);
      const auto h2 = model::forward_to_layer(m, in, layer, kernels::scalar_table());
      const auto d1 = model::decode_at_layer(m, h1, *simd);
      const auto d2 = model::decode_at_layer(m, h2, kernels::scalar_table());
      for (std::size_t i = 0; i < d1.logits.size(); ++i) CHECK(close(d1.logits[i], d2.logits[i], 1e-3f));
    }
  }
}

TEST_CASE("EELAB_KERNELS=scalar forces the reference table") {
  CHECK(kernels::table_for(kernels::Isa::Scalar).isa == kernels::Isa::Scalar);
  const char* env = std::getenv("EELAB_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") {
    CHECK(kernels::active().isa == kernels::Isa::Scalar);
  } else if (kernels::avx2_table() != nullptr) {
    CHECK(kernels::active().isa == kernels::Isa::Avx2);
  }
}
