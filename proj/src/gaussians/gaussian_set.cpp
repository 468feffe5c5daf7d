// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/gaussians/gaussian_set.hpp"

#include <cmath>
#include <string>

namespace MONOSPLAT_NS {

GaussianSet GaussianSet::empty(int sh_bands) { return allocate(0, sh_bands); }

GaussianSet GaussianSet::allocate(std::int64_t n, int sh_bands) {
    GaussianSet g;
    g.mu = Tensor({n, 3});
    g.alpha = Tensor({n});
    g.scale = Tensor({n, 3});
    g.rot = Tensor({n, 4});
    g.sh = Tensor({n, 3, sh_bands});
    for (std::int64_t i = 0; i < n; ++i) {
        g.rot[i * 4] = 1.0f;
    }
    return g;
}

void GaussianSet::validate(bool check_scale_bounds) const {
    const std::int64_t n = size();
    const auto bands = sh_bands();
    const int degree = static_cast<int>(std::lround(std::sqrt(static_cast<double>(bands)))) - 1;
    if (mu.shape() != Shape{n, 3} || alpha.shape() != Shape{n} || scale.shape() != Shape{n, 3} ||
        rot.shape() != Shape{n, 4} || sh.rank() != 3 || sh.dim(0) != n || sh.dim(1) != 3) {
        throw ShapeError("gaussian set: attribute arity mismatch");
    }
    if (bands < 1 || (degree + 1) * (degree + 1) != bands || degree > 3) {
        throw ShapeError("gaussian set: SH band count must be 1, 4, 9 or 16, got " + std::to_string(bands));
    }
    for (const Tensor *t : {&mu, &alpha, &scale, &rot, &sh}) {
        t->require_finite("gaussian set");
    }
    for (std::int64_t i = 0; i < n; ++i) {
        if (!(alpha[i] > 0.0f && alpha[i] < 1.0f)) {
            throw ShapeError("gaussian set: opacity outside (0, 1) at " + std::to_string(i));
        }
        double qn = 0.0;
        for (int k = 0; k < 4; ++k) {
            qn += static_cast<double>(rot[i * 4 + k]) * rot[i * 4 + k];
        }
        if (std::abs(std::sqrt(qn) - 1.0) > 1e-5) {
            throw ShapeError("gaussian set: quaternion not unit-norm at " + std::to_string(i));
        }
        for (int k = 0; k < 3; ++k) {
            const Real s = scale[i * 3 + k];
            if (!(s > 0.0f) ||
                (check_scale_bounds && (s < kMinGaussianScale || s > kMaxGaussianScale))) {
                throw ShapeError("gaussian set: scale out of range at " + std::to_string(i));
            }
        }
    }
}

GaussianSet merge(const std::vector<GaussianSet> &sets) {
    if (sets.empty()) {
        throw ShapeError("merge: no gaussian sets");
    }
    const int bands = sets.front().sh_bands();
    std::int64_t n = 0;
    for (const auto &s : sets) {
        if (s.sh_bands() != bands || s.mu.rank() != 2 || s.mu.dim(1) != 3 || s.alpha.size() != s.size() ||
            s.scale.size() != 3 * s.size() || s.rot.size() != 4 * s.size()) {
            throw ShapeError("merge: attribute arity mismatch");
        }
        n += s.size();
    }
    GaussianSet out = GaussianSet::allocate(n, bands);
    auto append = [](Tensor &dst, const Tensor &src, std::int64_t &off) {
        std::copy(src.data(), src.data() + src.size(), dst.data() + off);
        off += src.size();
    };
    std::int64_t om = 0, oa = 0, os = 0, orr = 0, oh = 0;
    for (const auto &s : sets) {
        append(out.mu, s.mu, om);
        append(out.alpha, s.alpha, oa);
        append(out.scale, s.scale, os);
        append(out.rot, s.rot, orr);
        append(out.sh, s.sh, oh);
    }
    return out;
}

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d &qin) {
    const Eigen::Vector4d q = qin.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Eigen::Matrix3d covariance(const Eigen::Vector4d &q, const Eigen::Vector3d &s) {
    const Eigen::Matrix3d R = quaternion_to_rotation(q);
    return R * s.cwiseProduct(s).asDiagonal() * R.transpose();
}

} // namespace monosplat
