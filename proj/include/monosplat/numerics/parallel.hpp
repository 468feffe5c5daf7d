// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <functional>

#include "monosplat/config.hpp"

namespace MONOSPLAT_NS {

/// Process-wide worker count used by parallel_for. Defaults to MONOSPLAT_THREADS or 1.
int num_threads();
void set_num_threads(int n);

/// Runs body(i) for i in [0, n). Work items must write disjoint outputs; the
/// result never depends on the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)> &body);

} // namespace monosplat
