// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

inline constexpr float kMinGaussianScale = 0.5f;
inline constexpr float kMaxGaussianScale = 15.0f;

/// Flat collection of 3D Gaussian primitives with activated attributes.
/// SH coefficients are channel-major: sh[n][color][coeff], DC first.
struct GaussianSet {
    Tensor mu;    // [N, 3] world positions
    Tensor alpha; // [N] opacity in (0, 1)
    Tensor scale; // [N, 3] positive extents
    Tensor rot;   // [N, 4] unit quaternion (w, x, y, z)
    Tensor sh;    // [N, 3, B]

    static GaussianSet empty(int sh_bands);
    static GaussianSet allocate(std::int64_t n, int sh_bands);

    std::int64_t size() const { return mu.rank() == 2 ? mu.dim(0) : 0; }
    int sh_bands() const { return sh.rank() == 3 ? static_cast<int>(sh.dim(2)) : 0; }

    /// Throws ShapeError / NumericError when a type invariant is violated.
    /// Scale bounds are only enforced when `check_scale_bounds` is set.
    void validate(bool check_scale_bounds = true) const;
};

/// Concatenation in input order; no deduplication.
GaussianSet merge(const std::vector<GaussianSet> &sets);

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d &q);
/// R(q) diag(s^2) R(q)^T
Eigen::Matrix3d covariance(const Eigen::Vector4d &q, const Eigen::Vector3d &s);

} // namespace monosplat
