// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "eelab/model.hpp"

namespace eelab::model {

// Weight file layout:
//
//   bytes 0..3   "ADEE"
//   u32 LE       format version (kWeightFormatVersion)
//   u64 LE       header length in bytes
//   header       UTF-8 JSON: {"config": {...}, "tensors": [{"name", "shape"}, ...]}
//   payload      each listed tensor in header order, little-endian f32, row-major
//
// The header is authoritative; payload size must equal the sum of the listed
// tensor sizes exactly.
inline constexpr char kWeightMagic[4] = {'A', 'D', 'E', 'E'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::string serialize_model(const LayerStack& model);
LayerStack parse_model(std::string_view bytes);

void save_model(const LayerStack& model, const std::filesystem::path& path);
LayerStack load_model(const std::filesystem::path& path);

}  // namespace eelab::model
