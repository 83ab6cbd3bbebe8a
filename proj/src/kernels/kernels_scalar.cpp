// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#include <algorithm>
#include <cmath>

namespace eelab::kernels::scalar {

float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemv(const float* x, const float* w, float* y, std::size_t rows, std::size_t cols) {
  std::fill(y, y + cols, 0.0f);
  for (std::size_t r = 0; r < rows; ++r) {
    const float xr = x[r];
    const float* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(float* y, const float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale(float* y, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void relu(float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > 0.0f ? y[i] : 0.0f;
}

float max(const float* x, std::size_t n) {
  float m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void rmsnorm(const float* x, const float* gain, float* y, std::size_t n, float eps) {
  float ss = 0.0f;
  for (std::size_t i = 0; i < n; ++i) ss += x[i] * x[i];
  const float inv = 1.0f / std::sqrt(ss / static_cast<float>(n) + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * inv * gain[i];
}

const KernelTable& table() {
  static const KernelTable t{Isa::Scalar, dot, gemv, axpy, add, scale, relu, max, rmsnorm};
  return t;
}

}  // namespace eelab::kernels::scalar
