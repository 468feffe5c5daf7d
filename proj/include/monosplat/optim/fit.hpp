// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Gradient descent with momentum over a set of Parameters.
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

enum class Schedule { Constant, Cosine };

struct FitConfig {
    int steps = 100;
    double lr = 1e-2;
    double momentum = 0.9;
    Schedule schedule = Schedule::Constant;
    double divergence_factor = 10.0;
    int divergence_patience = 50;
    /// Newline-delimited JSON, one record per step.
    std::optional<std::filesystem::path> report;

    void validate() const;
    double lr_at(int step) const;
};

struct StepResult {
    double loss = 0.0;
    double psnr = 0.0;
};

/// Evaluates the objective at the current parameter values and accumulates
/// its gradient into Parameter::grad (which fit() zeroes beforehand).
using StepFn = std::function<StepResult(int step)>;

struct FitRecord {
    int step = 0;
    double loss = 0.0;
    double psnr = 0.0;
};

struct FitReport {
    std::vector<FitRecord> history;
    bool diverged = false;
    double initial_loss() const { return history.empty() ? 0.0 : history.front().loss; }
    double final_loss() const { return history.empty() ? 0.0 : history.back().loss; }
};

class DivergenceError : public NumericError {
  public:
    using NumericError::NumericError;
};

/// Runs `cfg.steps` updates v = momentum * v + g, p -= lr * v on every
/// trainable parameter. Throws DivergenceError when the loss stays above
/// divergence_factor times the first loss for divergence_patience steps.
FitReport fit(const std::vector<Parameter *> &params, const StepFn &step, const FitConfig &cfg);

} // namespace monosplat
