// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// MTF tensor interchange: "MSTF", then little-endian u32 version (1),
// u32 dtype (0 = f32), u32 rank, rank x u64 dims, row-major payload.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kMtfVersion = 1;
inline constexpr std::uint32_t kMtfDtypeF32 = 0;

std::vector<std::uint8_t> encode_mtf(const Tensor &t);
Tensor decode_mtf(std::span<const std::uint8_t> bytes);

void write_mtf(const std::filesystem::path &path, const Tensor &t);
Tensor read_mtf(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace monosplat
