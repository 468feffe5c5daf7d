// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const Tensor &t);
std::string sha256_file(const std::filesystem::path &path);

} // namespace monosplat
