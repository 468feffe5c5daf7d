// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "monosplat/numerics/parallel.hpp"
#include "monosplat/renderer/rasterizer.hpp"
#include "monosplat/renderer/sh.hpp"
#include "support/random.hpp"
#include "support/scenes.hpp"

using namespace monosplat;
using monosplat::tsupport::random_gaussians;

namespace {

GaussianSet single(double x, double y, double z, double alpha, double scale, double dc, int bands = 1) {
    GaussianSet g = GaussianSet::allocate(1, bands);
    g.mu[0] = static_cast<Real>(x);
    g.mu[1] = static_cast<Real>(y);
    g.mu[2] = static_cast<Real>(z);
    g.alpha[0] = static_cast<Real>(alpha);
    for (int k = 0; k < 3; ++k) {
        g.scale[k] = static_cast<Real>(scale);
        g.sh[k * bands] = static_cast<Real>(dc);
    }
    return g;
}

GaussianSet permuted(const GaussianSet &g, const std::vector<std::int64_t> &perm) {
    GaussianSet out = GaussianSet::allocate(g.size(), g.sh_bands());
    const int B = g.sh_bands();
    for (std::size_t j = 0; j < perm.size(); ++j) {
        const auto i = perm[j];
        const auto d = static_cast<std::int64_t>(j);
        std::copy_n(g.mu.data() + i * 3, 3, out.mu.data() + d * 3);
        out.alpha[d] = g.alpha[i];
        std::copy_n(g.scale.data() + i * 3, 3, out.scale.data() + d * 3);
        std::copy_n(g.rot.data() + i * 4, 4, out.rot.data() + d * 4);
        std::copy_n(g.sh.data() + i * 3 * B, 3 * B, out.sh.data() + d * 3 * B);
    }
    return out;
}

} // namespace

TEST(Render, EmptySetShowsBackground) {
    const Camera cam = make_camera(20, 24, 16);
    RenderSettings s = RenderSettings::for_camera(cam);
    s.background = {0.1f, 0.2f, 0.3f};
    const auto out = render(GaussianSet::empty(4), cam, s);
    for (std::int64_t p = 0; p < 24 * 16; ++p) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(out.image[p * 3 + c], s.background[static_cast<std::size_t>(c)]);
        }
        EXPECT_EQ(out.depth[p], 0.0f);
        EXPECT_EQ(out.transmittance[p], 1.0f);
    }
}

TEST(Render, SingleSplatMatchesClosedForm) {
    const Camera cam = make_camera(32, 33, 33); // principal point on pixel (16, 16)
    RenderSettings s = RenderSettings::for_camera(cam);
    s.background = {0.25f, 0.25f, 0.25f};
    const double alpha = 0.8, scale = 0.3, dc = 2.0, z = 5.0;
    const auto out = render(single(0, 0, z, alpha, scale, dc), cam, s);
    const double color = dc * sh::kC0;
    const double var = std::pow(32.0 * scale / z, 2) + 0.3;
    for (int dx : {0, 1, 2}) {
        const double a = alpha * std::exp(-0.5 * dx * dx / var);
        EXPECT_NEAR(out.image.at(16, 16 + dx, 0), color * a + 0.25 * (1 - a), 1e-6);
        EXPECT_NEAR(out.depth[16 * 33 + 16 + dx], z * a, 1e-5);
    }
    const auto brute = render_brute(single(0, 0, z, alpha, scale, dc), cam, s);
    EXPECT_EQ(max_abs_diff(out.image, brute.image), 0.0f);
}

TEST(Render, MatchesBruteForceOnRandomScenes) {
    const Camera cam = make_camera(40, 48, 40);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto g = random_gaussians(64, 16, seed);
        RenderSettings s = RenderSettings::for_camera(cam);
        s.background = {0.3f, 0.1f, 0.6f};
        s.tile = 8;
        const auto a = render(g, cam, s);
        const auto b = render_brute(g, cam, s);
        EXPECT_LT(max_abs_diff(a.image, b.image), 1e-5f) << "seed " << seed;
        EXPECT_LT(max_abs_diff(a.depth, b.depth), 1e-4f) << "seed " << seed;
        EXPECT_LT(max_abs_diff(a.transmittance, b.transmittance), 1e-5f) << "seed " << seed;
    }
}

TEST(Render, TransmittanceInUnitInterval) {
    const Camera cam = make_camera(40, 32, 32);
    const auto out = render(random_gaussians(50, 4, 9), cam, RenderSettings::for_camera(cam));
    for (auto t : out.transmittance.values()) {
        EXPECT_GE(t, 0.0f);
        EXPECT_LE(t, 1.0f);
    }
}

TEST(Render, BehindCameraIsCulled) {
    const Camera cam = make_camera(20, 16, 16);
    const auto out = render(single(0, 0, -3, 0.9, 0.5, 1.0), cam, RenderSettings::for_camera(cam));
    for (auto t : out.transmittance.values()) {
        EXPECT_EQ(t, 1.0f);
    }
}

TEST(Render, InvariantUnderPermutation) {
    const Camera cam = make_camera(40, 32, 32);
    const auto g = random_gaussians(30, 9, 11);
    std::vector<std::int64_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 7, perm.end());
    const auto s = RenderSettings::for_camera(cam);
    EXPECT_EQ(render(g, cam, s).image, render(permuted(g, perm), cam, s).image);
}

TEST(Render, InvariantUnderRigidTransform) {
    const Camera cam = make_camera(40, 32, 32);
    const auto g = random_gaussians(30, 1, 12);
    const Eigen::Matrix3d Rg = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    const Eigen::Vector3d tg(0.5, -1.0, 2.0);
    const Eigen::Quaterniond qg(Rg);
    GaussianSet h = g;
    for (std::int64_t i = 0; i < g.size(); ++i) {
        const Eigen::Vector3d mu(g.mu[i * 3], g.mu[i * 3 + 1], g.mu[i * 3 + 2]);
        const Eigen::Vector3d m2 = Rg * mu + tg;
        const Eigen::Quaterniond q(g.rot[i * 4], g.rot[i * 4 + 1], g.rot[i * 4 + 2], g.rot[i * 4 + 3]);
        const Eigen::Quaterniond q2 = (qg * q).normalized();
        for (int k = 0; k < 3; ++k) {
            h.mu[i * 3 + k] = static_cast<Real>(m2[k]);
        }
        h.rot[i * 4] = static_cast<Real>(q2.w());
        h.rot[i * 4 + 1] = static_cast<Real>(q2.x());
        h.rot[i * 4 + 2] = static_cast<Real>(q2.y());
        h.rot[i * 4 + 3] = static_cast<Real>(q2.z());
    }
    const auto s = RenderSettings::for_camera(cam);
    const auto a = render(g, cam, s);
    const auto b = render(h, cam.transformed(Rg, tg), s);
    EXPECT_LT(max_abs_diff(a.image, b.image), 1e-5f);
}

TEST(Render, SingularCovarianceIsSkippedAndCounted) {
    const Camera cam = make_camera(20, 16, 16);
    RenderSettings s = RenderSettings::for_camera(cam);
    s.lowpass = 0.0f;
    GaussianSet g = single(0, 0, 5, 0.5, 1.0, 1.0);
    g.scale[0] = 1e-20f;
    g.scale[1] = 1e-20f;
    const auto out = render(g, cam, s);
    EXPECT_EQ(out.degenerate, 1);
}

TEST(Render, RejectsInvalidSettings) {
    const Camera cam = make_camera(20, 16, 16);
    RenderSettings s = RenderSettings::for_camera(cam);
    s.tile = 0;
    EXPECT_THROW(render(GaussianSet::empty(1), cam, s), ShapeError);
    s = RenderSettings::for_camera(cam);
    s.alpha_cutoff = 1.0f;
    EXPECT_THROW(render(GaussianSet::empty(1), cam, s), ShapeError);
}

TEST(RenderBackward, DcGradientIsAccumulatedWeight) {
    const Camera cam = make_camera(32, 33, 33);
    const auto s = RenderSettings::for_camera(cam);
    const auto g = single(0.1, -0.05, 5, 0.7, 0.2, 1.5);
    const auto out = render(g, cam, s);
    Tensor dimg({33, 33, 3});
    for (std::int64_t p = 0; p < 33 * 33; ++p) {
        dimg[p * 3] = 1.0f;
    }
    const auto grads = render_backward(g, cam, s, out.state, dimg);
    double weight = 0.0;
    for (std::int64_t p = 0; p < 33 * 33; ++p) {
        weight += 1.0 - out.transmittance[p];
    }
    EXPECT_NEAR(grads.sh[0], weight * sh::kC0, 1e-4);
    EXPECT_EQ(grads.sh[1], 0.0f);
}

TEST(RenderBackward, OccludedGaussianGetsZeroGradient) {
    const Camera cam = make_camera(32, 32, 32);
    const auto s = RenderSettings::for_camera(cam);
    std::vector<GaussianSet> parts;
    for (double z : {3.0, 3.5, 4.0}) {
        parts.push_back(single(0, 0, z, 0.999999, 15.0, 1.0, 4));
    }
    parts.push_back(single(0, 0, 8, 0.8, 0.3, 1.0, 4));
    const GaussianSet g = merge(parts);
    const auto out = render(g, cam, s);
    Tensor dimg({32, 32, 3}, 1.0f);
    const auto grads = render_backward(g, cam, s, out.state, dimg);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(grads.mu[3 * 3 + k], 0.0f);
        EXPECT_EQ(grads.scale[3 * 3 + k], 0.0f);
    }
    EXPECT_EQ(grads.alpha[3], 0.0f);
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(grads.rot[3 * 4 + k], 0.0f);
    }
    for (int k = 0; k < 12; ++k) {
        EXPECT_EQ(grads.sh[3 * 12 + k], 0.0f);
    }
    EXPECT_NE(grads.sh[0], 0.0f);
}

TEST(RenderBackward, RequiresForwardState) {
    const Camera cam = make_camera(20, 16, 16);
    const auto s = RenderSettings::for_camera(cam);
    EXPECT_THROW(render_backward(GaussianSet::empty(1), cam, s, RenderState{}, Tensor({16, 16, 3})), ShapeError);
}

TEST(RenderBackward, BitwiseReproducibleAcrossThreadCounts) {
    const Camera cam = make_camera(40, 48, 40);
    const auto g = random_gaussians(80, 16, 21);
    RenderSettings s = RenderSettings::for_camera(cam);
    s.tile = 8;
    std::mt19937_64 rng(3);
    const Tensor dimg = monosplat::tsupport::uniform({40, 48, 3}, rng);
    std::vector<RenderOutput> outs;
    std::vector<GaussianGrads> grads;
    for (int threads : {1, 2, 8}) {
        set_num_threads(threads);
        outs.push_back(render(g, cam, s));
        grads.push_back(render_backward(g, cam, s, outs.back().state, dimg));
    }
    set_num_threads(1);
    for (std::size_t i = 1; i < outs.size(); ++i) {
        EXPECT_EQ(outs[i].image, outs[0].image);
        EXPECT_EQ(grads[i].mu, grads[0].mu);
        EXPECT_EQ(grads[i].sh, grads[0].sh);
        EXPECT_EQ(grads[i].rot, grads[0].rot);
    }
}
