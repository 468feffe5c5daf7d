// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Result lines shared by the f32 driver and the f64 gradient criterion.
// Only standard types cross between the two translation units.
#pragma once

#include <string>
#include <vector>

namespace monosplat_acceptance {

struct Line {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    std::vector<std::string> info;
};

Line gradient_suite();

} // namespace monosplat_acceptance
