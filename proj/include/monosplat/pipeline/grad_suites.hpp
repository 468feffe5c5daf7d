// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks of the renderer backward pass and of every
// trainable block on small randomized instances. Only meaningful in the
// 64-bit build.
#pragma once

#include <string>
#include <vector>

#include "monosplat/optim/gradcheck.hpp"

namespace MONOSPLAT_NS {

struct GradSuiteResult {
    std::string name;
    GradCheckReport report;
    double seconds = 0.0;
};

/// renderer, dpt, cross_view, cost_refiner, feature_refiner, heads, full_chain
const std::vector<std::string> &grad_suite_names();

/// Throws std::invalid_argument for an unknown suite.
GradSuiteResult run_grad_suite(const std::string &name, std::uint64_t seed = 0, const GradCheckOptions &base = {});

} // namespace monosplat
