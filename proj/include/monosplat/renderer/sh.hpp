// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Real spherical harmonics up to degree 3, using the sign convention of the
// common 3DGS implementations.
#pragma once

#include <array>

#include "monosplat/config.hpp"

namespace MONOSPLAT_NS::sh {

inline constexpr double kC0 = 0.28209479177387814;
inline constexpr int kMaxBands = 16;

/// Basis values Y_k(d) for k < bands; d must be unit length.
void eval_basis(int bands, const double d[3], double *Y);
/// Basis values and their partials dY_k/dd (treating d components as independent).
void eval_basis_grad(int bands, const double d[3], double *Y, std::array<double, 3> *dY);

} // namespace monosplat::sh
