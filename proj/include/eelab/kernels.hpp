// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace eelab::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Inner loops of the forward pass. Every entry of a table computes the same
// function; only rounding (summation order, fused multiply-add) may differ
// between tables.
struct KernelTable {
  Isa isa;

  // sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);

  // y[0..cols) = x[0..rows) * W, with W row-major rows x cols. Overwrites y.
  void (*gemv)(const float* x, const float* w, float* y, std::size_t rows, std::size_t cols);

  // y += a * x
  void (*axpy)(float a, const float* x, float* y, std::size_t n);

  // y += x
  void (*add)(float* y, const float* x, std::size_t n);

  // y *= a
  void (*scale)(float* y, float a, std::size_t n);

  // y = max(y, 0)
  void (*relu)(float* y, std::size_t n);

  float (*max)(const float* x, std::size_t n);

  // y = x / sqrt(mean(x^2) + eps) * gain
  void (*rmsnorm)(const float* x, const float* gain, float* y, std::size_t n, float eps);
};

const KernelTable& scalar_table();

// Null when the AVX2 table was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// Widest table the running CPU supports. EELAB_KERNELS=scalar in the
// environment forces the scalar reference table.
const KernelTable& active();

const KernelTable& table_for(Isa isa);

// Max-subtracted softmax in place. exp() is evaluated in scalar code for every
// table, so only the max and the normalization go through `k`.
void softmax(const KernelTable& k, std::span<float> x);

}  // namespace eelab::kernels
