// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Binary little-endian PLY in the layout used by common 3DGS tools:
// x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3, with
// opacity stored as a logit and scales as logarithms.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "monosplat/gaussians/gaussian_set.hpp"
#include "monosplat/numerics/mtf.hpp"

namespace MONOSPLAT_NS {

/// Vertex table exactly as stored on disk.
struct PlyTable {
    std::vector<std::string> properties;
    std::int64_t count = 0;
    std::vector<float> values; // count x properties, row-major

    bool operator==(const PlyTable &o) const = default;
};

PlyTable to_ply_table(const GaussianSet &g);
/// Decodes stored activations; the result is validated (scale bounds not enforced).
GaussianSet from_ply_table(const PlyTable &table);

std::vector<std::uint8_t> serialize_ply(const PlyTable &table);
PlyTable parse_ply(std::span<const std::uint8_t> bytes);

void write_ply(const std::filesystem::path &path, const GaussianSet &g);
GaussianSet read_ply(const std::filesystem::path &path);

} // namespace monosplat
