// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Scalar type selection. The library is normally built with 32-bit reals; a
// 64-bit variant lives in its own inline namespace so both can be linked
// into one program.
#pragma once

#ifdef MONOSPLAT_REAL_DOUBLE
#define MONOSPLAT_NS monosplat::inline f64
namespace monosplat {
inline namespace f64 {
using Real = double;
}
} // namespace monosplat
#else
#define MONOSPLAT_NS monosplat::inline f32
namespace monosplat {
inline namespace f32 {
using Real = float;
}
} // namespace monosplat
#endif
