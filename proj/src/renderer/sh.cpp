// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/renderer/sh.hpp"

namespace MONOSPLAT_NS::sh {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                           -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

} // namespace

void eval_basis(int bands, const double d[3], double *Y) { eval_basis_grad(bands, d, Y, nullptr); }

void eval_basis_grad(int bands, const double d[3], double *Y, std::array<double, 3> *dY) {
    const double x = d[0], y = d[1], z = d[2];
    auto set = [&](int k, double v, double gx, double gy, double gz) {
        if (k >= bands) {
            return;
        }
        Y[k] = v;
        if (dY != nullptr) {
            dY[k] = {gx, gy, gz};
        }
    };
    set(0, kC0, 0, 0, 0);
    if (bands <= 1) {
        return;
    }
    set(1, -kC1 * y, 0, -kC1, 0);
    set(2, kC1 * z, 0, 0, kC1);
    set(3, -kC1 * x, -kC1, 0, 0);
    if (bands <= 4) {
        return;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    set(4, kC2[0] * x * y, kC2[0] * y, kC2[0] * x, 0);
    set(5, kC2[1] * y * z, 0, kC2[1] * z, kC2[1] * y);
    set(6, kC2[2] * (2 * zz - xx - yy), -2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z);
    set(7, kC2[3] * x * z, kC2[3] * z, 0, kC2[3] * x);
    set(8, kC2[4] * (xx - yy), 2 * kC2[4] * x, -2 * kC2[4] * y, 0);
    if (bands <= 9) {
        return;
    }
    set(9, kC3[0] * y * (3 * xx - yy), kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0);
    set(10, kC3[1] * x * y * z, kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y);
    set(11, kC3[2] * y * (4 * zz - xx - yy), kC3[2] * (-2 * x * y), kC3[2] * (4 * zz - xx - 3 * yy),
        kC3[2] * 8 * y * z);
    set(12, kC3[3] * z * (2 * zz - 3 * xx - 3 * yy), kC3[3] * (-6 * x * z), kC3[3] * (-6 * y * z),
        kC3[3] * (6 * zz - 3 * xx - 3 * yy));
    set(13, kC3[4] * x * (4 * zz - xx - yy), kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * (-2 * x * y),
        kC3[4] * 8 * x * z);
    set(14, kC3[5] * z * (xx - yy), kC3[5] * 2 * x * z, kC3[5] * (-2 * y * z), kC3[5] * (xx - yy));
    set(15, kC3[6] * x * (xx - 3 * yy), kC3[6] * (3 * xx - 3 * yy), kC3[6] * (-6 * x * y), 0);
}

} // namespace monosplat::sh
