// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// 8-bit PNG for color images and little-endian PFM for float maps.
#pragma once

#include <filesystem>

#include "monosplat/numerics/mtf.hpp"
#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

/// Writes an [H, W, 3] image with values in [0, 1]; values are clamped and
/// rounded to 8 bits.
void write_png(const std::filesystem::path &path, const Tensor &image);
/// Reads an 8-bit RGB or RGBA PNG into [H, W, 3] values in [0, 1] (alpha dropped).
Tensor read_png(const std::filesystem::path &path);

/// Writes [H, W] (grayscale "Pf") or [H, W, 3] ("PF") maps, rows stored bottom-up.
void write_pfm(const std::filesystem::path &path, const Tensor &map);
Tensor read_pfm(const std::filesystem::path &path);

/// Rounds to the nearest 8-bit level, as a PNG round-trip would.
Tensor quantize8(const Tensor &image);

} // namespace monosplat
