// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/optim/metrics.hpp"

#include <cmath>
#include <vector>

namespace MONOSPLAT_NS {

namespace {

void require_same(const Tensor &a, const Tensor &b, const char *what) {
    if (a.shape() != b.shape() || a.empty()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

} // namespace

double mse(const Tensor &a, const Tensor &b) {
    require_same(a, b, "mse");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Tensor &a, const Tensor &b) {
    const double m = mse(a, b);
    if (m < 1e-10) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(const Tensor &a, const Tensor &b, const SsimOptions &opts) {
    require_same(a, b, "ssim");
    if (a.rank() != 3) {
        throw ShapeError("ssim: expected [H, W, C] images");
    }
    const std::int64_t H = a.dim(0), W = a.dim(1), C = a.dim(2);
    const int k = opts.window;
    if (k < 1 || H < k || W < k) {
        throw ShapeError("ssim: image smaller than the " + std::to_string(k) + "px window");
    }
    std::vector<double> g(static_cast<std::size_t>(k));
    double gs = 0.0;
    for (int i = 0; i < k; ++i) {
        const double x = i - (k - 1) / 2.0;
        g[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * opts.sigma * opts.sigma));
        gs += g[static_cast<std::size_t>(i)];
    }
    for (auto &v : g) {
        v /= gs;
    }
    const double c1 = opts.k1 * opts.k1;
    const double c2 = opts.k2 * opts.k2;
    const std::int64_t oh = H - k + 1, ow = W - k + 1;

    // separable filtering of x, y, x^2, y^2, xy: horizontal pass then vertical
    auto filter = [&](auto &&value) {
        std::vector<double> tmp(static_cast<std::size_t>(H * ow));
        for (std::int64_t y = 0; y < H; ++y) {
            for (std::int64_t x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) {
                    s += g[static_cast<std::size_t>(i)] * value(y, x + i);
                }
                tmp[static_cast<std::size_t>(y * ow + x)] = s;
            }
        }
        std::vector<double> out(static_cast<std::size_t>(oh * ow));
        for (std::int64_t y = 0; y < oh; ++y) {
            for (std::int64_t x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) {
                    s += g[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>((y + i) * ow + x)];
                }
                out[static_cast<std::size_t>(y * ow + x)] = s;
            }
        }
        return out;
    };

    double total = 0.0;
    for (std::int64_t c = 0; c < C; ++c) {
        auto va = [&](std::int64_t y, std::int64_t x) { return static_cast<double>(a.at(y, x, c)); };
        auto vb = [&](std::int64_t y, std::int64_t x) { return static_cast<double>(b.at(y, x, c)); };
        const auto mu_a = filter(va);
        const auto mu_b = filter(vb);
        const auto aa = filter([&](std::int64_t y, std::int64_t x) { return va(y, x) * va(y, x); });
        const auto bb = filter([&](std::int64_t y, std::int64_t x) { return vb(y, x) * vb(y, x); });
        const auto ab = filter([&](std::int64_t y, std::int64_t x) { return va(y, x) * vb(y, x); });
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double sa = aa[i] - ma * ma, sb = bb[i] - mb * mb, sab = ab[i] - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        }
    }
    return total / static_cast<double>(oh * ow * C);
}

} // namespace monosplat
