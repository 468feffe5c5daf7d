// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Image metrics on [H, W, C] tensors with values in [0, 1].
#pragma once

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

inline constexpr double kPsnrCap = 99.0;

double mse(const Tensor &a, const Tensor &b);
/// 10 log10(1 / mse), capped at kPsnrCap when mse < 1e-10.
double psnr(const Tensor &a, const Tensor &b);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over every fully contained window position and channel.
double ssim(const Tensor &a, const Tensor &b, const SsimOptions &opts = {});

} // namespace monosplat
