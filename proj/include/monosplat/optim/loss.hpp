// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Photometric training loss: mean squared error plus an optional perceptual
// term supplied by an external scorer.
#pragma once

#include <functional>
#include <string>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

enum class Perceptual { Off, Plugin };

/// Scores two images; larger means more different. Value only, no gradient.
using PerceptualScorer = std::function<double(const Tensor &pred, const Tensor &gt)>;

struct LossConfig {
    double lambda_lpips = 0.05;
    Perceptual perceptual = Perceptual::Off;
    PerceptualScorer scorer;

    void validate() const;
};

/// Runs `command <pred.mtf> <gt.mtf>` and parses a scalar from its stdout.
PerceptualScorer command_scorer(std::string command);

struct LossValue {
    double total = 0.0;
    double mse = 0.0;
    double perceptual = 0.0;
    Tensor grad; // dL/dpred of the differentiable part
};

LossValue photometric_loss(const Tensor &pred, const Tensor &gt, const LossConfig &cfg);

} // namespace monosplat
