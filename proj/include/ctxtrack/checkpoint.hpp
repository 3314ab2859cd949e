// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

// Binary layout, all integers little-endian:
//   "LMTK" | u32 version | u32 entry count |
//   per entry: u32 name length | name bytes (UTF-8) | u8 dtype (0 = f32) |
//              u32 rank | rank x u64 dims | raw scalar data
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& entries);
NamedTensors decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxtrack
