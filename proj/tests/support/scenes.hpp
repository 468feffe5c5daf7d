// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <random>

#include "monosplat/gaussians/gaussian_set.hpp"

namespace monosplat::tsupport {

// Random Gaussians in a slab in front of a camera at the origin looking down +z.
inline GaussianSet random_gaussians(std::int64_t n, int bands, std::uint64_t seed, double spread = 1.5,
                                    double depth = 5.0, double size = 0.4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GaussianSet g = GaussianSet::allocate(n, bands);
    for (std::int64_t i = 0; i < n; ++i) {
        g.mu[i * 3] = static_cast<Real>(spread * u(rng));
        g.mu[i * 3 + 1] = static_cast<Real>(spread * u(rng));
        g.mu[i * 3 + 2] = static_cast<Real>(depth + u(rng));
        g.alpha[i] = static_cast<Real>(0.45 + 0.35 * u(rng));
        for (int k = 0; k < 3; ++k) {
            g.scale[i * 3 + k] = static_cast<Real>(size * (1.0 + 0.5 * u(rng)));
        }
        double q[4], norm = 0.0;
        for (auto &v : q) {
            v = u(rng);
            norm += v * v;
        }
        for (int k = 0; k < 4; ++k) {
            g.rot[i * 4 + k] = static_cast<Real>(q[k] / std::sqrt(norm));
        }
        for (int k = 0; k < 3 * bands; ++k) {
            g.sh[i * 3 * bands + k] = static_cast<Real>(0.3 * u(rng));
        }
        for (int c = 0; c < 3; ++c) {
            g.sh[(i * 3 + c) * bands] += static_cast<Real>(1.2);
        }
    }
    return g;
}

} // namespace monosplat::tsupport
