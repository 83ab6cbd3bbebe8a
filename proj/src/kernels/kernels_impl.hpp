// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "eelab/kernels.hpp"

namespace eelab::kernels {

namespace scalar {
const KernelTable& table();
}

#if defined(EELAB_HAVE_AVX2)
namespace avx2 {
// Only call after confirming CPU support; the translation unit is built with -mavx2 -mfma.
const KernelTable& table();
}
#endif

}  // namespace eelab::kernels
