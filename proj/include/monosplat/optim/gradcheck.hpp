// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of analytic gradients.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

struct GradCheckOptions {
    double h = 1e-3;
    double tol = 1e-3;
    // Lower bound of the relative-error denominator, so entries whose true
    // gradient is near zero are compared on an absolute scale.
    double floor = 1e-6;
    std::int64_t max_samples = 256; // per parameter; <= 0 checks every entry
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string param;
    std::int64_t index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    std::int64_t checked = 0;
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    std::vector<GradCheckEntry> failures;
    bool passed() const { return failures.empty(); }
};

struct NamedParameter {
    std::string name;
    Parameter *param = nullptr;
};

/// `loss` evaluates the scalar objective from the current parameter values.
/// The analytic gradient is read from each Parameter::grad, which the caller
/// fills beforehand.
GradCheckReport grad_check(const std::function<double()> &loss, const std::vector<NamedParameter> &params,
                           const GradCheckOptions &opts = {});

double relative_error(double analytic, double numeric, double floor);

} // namespace monosplat
