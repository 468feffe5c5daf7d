// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <cmath>
#include <random>

#include "monosplat/gaussians/predictor.hpp"
#include "monosplat/renderer/sh.hpp"
#include "support/random.hpp"
#include "support/scenes.hpp"

using namespace monosplat;

namespace {

struct HeadFixture {
    ParamStore store;
    GaussianHeads heads;
    Camera cam;
    Tensor image;
    Tensor coarse;
    Tensor features;
    DepthRange range{2.0, 10.0};

    explicit HeadFixture(std::uint64_t seed, int bands = 16) {
        heads = GaussianHeads::make(store, "heads", GaussianHeadConfig{8, bands, 0.1}, seed);
        std::mt19937_64 rng(seed);
        const Eigen::Matrix3d R =
            Eigen::AngleAxisd(0.3, Eigen::Vector3d(0.2, 1.0, -0.4).normalized()).toRotationMatrix();
        cam = make_camera(18.0, 16, 16, R, Eigen::Vector3d(0.3, -0.2, 0.5));
        image = tsupport::uniform({16, 16, 3}, rng, 0.0, 1.0);
        coarse = tsupport::uniform({4, 4}, rng, 3.0, 9.0);
        features = tsupport::uniform({16, 16, 8}, rng);
    }

    GaussianVars run(Tape &t) const {
        return heads(t, t.constant(features), t.constant(coarse), image, cam, range);
    }

    void randomize_heads(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (auto &[name, p] : store.all()) {
            p->value = tsupport::uniform(p->value.shape(), rng, -0.3, 0.3);
        }
    }
};

} // namespace

TEST(FeatureRefiner, ConstantDepthStaysConstantAfterUpsampling) {
    Tape t;
    Var d = t.constant(Tensor({4, 4, 1}, 3.25f));
    for (Real v : ad::resize_bilinear(d, 16, 16).value().values()) {
        EXPECT_FLOAT_EQ(v, 3.25f);
    }
}

TEST(FeatureRefiner, OutputMatchesImageResolution) {
    FeatureRefinerConfig cfg;
    cfg.mono_channels = 4;
    cfg.mv_channels = 6;
    cfg.base = 4;
    cfg.out_channels = 5;
    ParamStore store;
    const auto r = FeatureRefiner::make(store, "fr", cfg, 1);
    std::mt19937_64 rng(2);
    for (auto [H, W] : {std::pair<std::int64_t, std::int64_t>{16, 16}, {32, 48}}) {
        Tape t;
        Var out = r(t, t.constant(tsupport::uniform({H / 4, W / 4}, rng, 2.0, 8.0)),
                    t.constant(tsupport::uniform({H / 4, W / 4, 4}, rng)),
                    t.constant(tsupport::uniform({H / 4, W / 4, 6}, rng)),
                    t.constant(tsupport::uniform({H, W, 3}, rng, 0.0, 1.0)), DepthRange{2.0, 8.0});
        EXPECT_EQ(out.shape(), (Shape{H, W, 5}));
        EXPECT_TRUE(out.value().all_finite());
    }
}

TEST(FeatureRefiner, RejectsResolutionMismatch) {
    FeatureRefinerConfig cfg;
    cfg.mono_channels = 2;
    cfg.mv_channels = 2;
    cfg.base = 4;
    cfg.use_mono = false;
    ParamStore store;
    const auto r = FeatureRefiner::make(store, "fr", cfg, 1);
    Tape t;
    Var none;
    EXPECT_THROW(r(t, t.constant(Tensor({4, 4})), none, t.constant(Tensor({4, 4, 2})), t.constant(Tensor({20, 16, 3})),
                   DepthRange{}),
                 ShapeError);
    EXPECT_THROW(r(t, t.constant(Tensor({4, 4})), none, t.constant(Tensor({4, 3, 2})), t.constant(Tensor({16, 16, 3})),
                   DepthRange{}),
                 ShapeError);
}

TEST(GaussianHeads, ZeroInitContract) {
    const HeadFixture f(3);
    Tape t;
    const auto g = f.run(t);
    const Tensor base =
        ad::resize_bilinear(t.constant(f.coarse.reshaped({4, 4, 1})), 16, 16).value().reshaped({16, 16});
    EXPECT_TRUE(g.depth.value() == base);
    for (Real a : g.alpha.value().values()) {
        EXPECT_EQ(a, 0.5);
    }
    const Tensor &q = g.rot.value();
    for (std::int64_t n = 0; n < 256; ++n) {
        EXPECT_EQ(q[n * 4], 1.0);
        EXPECT_EQ(q[n * 4 + 1], 0.0);
        EXPECT_EQ(q[n * 4 + 2], 0.0);
        EXPECT_EQ(q[n * 4 + 3], 0.0);
    }
    for (Real s : g.scale.value().values()) {
        EXPECT_FLOAT_EQ(s, 0.5f * (kMinGaussianScale + kMaxGaussianScale));
    }
    const Tensor &sh = g.sh.value();
    for (std::int64_t n = 0; n < 256; ++n) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_NEAR(sh[(n * 3 + c) * 16] * sh::kC0, f.image[n * 3 + c], 1e-6);
            for (int k = 1; k < 16; ++k) {
                EXPECT_EQ(sh[(n * 3 + c) * 16 + k], 0.0);
            }
        }
    }
    EXPECT_NO_THROW(g.materialize().validate());
}

TEST(GaussianHeads, ConstantBandIsViewIndependent) {
    const double d[2][3] = {{0.0, 0.0, 1.0}, {0.6, -0.48, 0.64}};
    for (const auto &dir : d) {
        double Y[1];
        sh::eval_basis(1, dir, Y);
        EXPECT_DOUBLE_EQ(0.7 * Y[0], 0.7 * sh::kC0);
    }
    const HeadFixture f(4, 1);
    Tape t;
    const auto g = f.run(t);
    EXPECT_EQ(g.sh.shape(), (Shape{256, 3, 1}));
}

TEST(GaussianHeads, MeansReprojectOntoPixelCenters) {
    HeadFixture f(5);
    f.randomize_heads(6);
    Tape t;
    const auto g = f.run(t);
    const Tensor &mu = g.mu.value();
    const Tensor &depth = g.depth.value();
    double worst = 0.0, depth_err = 0.0;
    for (std::int64_t y = 0; y < 16; ++y) {
        for (std::int64_t x = 0; x < 16; ++x) {
            const std::int64_t n = y * 16 + x;
            const auto p = project(f.cam, Eigen::Vector3d(mu[n * 3], mu[n * 3 + 1], mu[n * 3 + 2]));
            worst = std::max(worst, (p.pixel - Eigen::Vector2d(x, y)).norm());
            depth_err = std::max(depth_err, std::abs(p.depth - depth[n]) / depth[n]);
        }
    }
    EXPECT_LT(worst, 1e-4);
    EXPECT_LT(depth_err, 1e-5);
}

TEST(GaussianHeads, OutputsSatisfyInvariants) {
    HeadFixture f(7);
    f.randomize_heads(8);
    for (auto &v : f.store.get("heads.depth.bias").value.values()) {
        v = 40.0f;
    }
    Tape t;
    const auto g = f.run(t);
    for (Real d : g.depth.value().values()) {
        EXPECT_GE(d, f.range.near);
        EXPECT_LE(d, f.range.far);
    }
    const GaussianSet set = g.materialize();
    EXPECT_NO_THROW(set.validate());
    EXPECT_EQ(set.size(), 256);
    for (Real s : set.scale.values()) {
        EXPECT_GE(s, kMinGaussianScale);
        EXPECT_LE(s, kMaxGaussianScale);
    }
}

TEST(GaussianHeads, RejectsMismatchedInputs) {
    const HeadFixture f(9);
    Tape t;
    Camera small = f.cam;
    small.width = 8;
    EXPECT_THROW(f.heads(t, t.constant(f.features), t.constant(f.coarse), f.image, small, f.range), ShapeError);
    EXPECT_THROW(f.heads(t, t.constant(f.features), t.constant(f.coarse), Tensor({16, 8, 3}), f.cam, f.range),
                 ShapeError);
}

TEST(Merge, CountsAndOrder) {
    std::vector<GaussianSet> views;
    for (int v = 0; v < 2; ++v) {
        views.push_back(tsupport::random_gaussians(4, 4, 10 + v));
    }
    const GaussianSet m = merge(views);
    EXPECT_EQ(m.size(), 8);
    EXPECT_TRUE(merge({views[0]}).mu == views[0].mu);
    const GaussianSet r = merge({views[1], views[0]});
    for (std::int64_t i = 0; i < 12; ++i) {
        EXPECT_EQ(r.mu[i], views[1].mu[i]);
        EXPECT_EQ(r.mu[12 + i], views[0].mu[i]);
    }
    for (std::int64_t i = 0; i < 4 * 12; ++i) {
        EXPECT_EQ(r.sh[i], views[1].sh[i]);
        EXPECT_EQ(r.sh[4 * 12 + i], views[0].sh[i]);
    }
    EXPECT_THROW(merge({views[0], tsupport::random_gaussians(2, 9, 3)}), ShapeError);
}

TEST(Merge, TapeVariantMatchesSetMerge) {
    HeadFixture a(11), b(12);
    a.randomize_heads(1);
    b.randomize_heads(2);
    Tape t;
    const auto ga = a.run(t);
    const auto gb = b.run(t);
    const GaussianSet expect = merge({ga.materialize(), gb.materialize()});
    const GaussianSet got = merge_vars({ga, gb}).materialize();
    EXPECT_TRUE(got.mu == expect.mu);
    EXPECT_TRUE(got.alpha == expect.alpha);
    EXPECT_TRUE(got.scale == expect.scale);
    EXPECT_TRUE(got.rot == expect.rot);
    EXPECT_TRUE(got.sh == expect.sh);
    EXPECT_THROW(merge_vars({}), ShapeError);
}

TEST(Covariance, SymmetricPositiveDefiniteAboveMinScale) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(kMinGaussianScale, kMaxGaussianScale);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector4d q = Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized();
        Eigen::Vector3d s(u(rng), u(rng), u(rng));
        s[i % 3] = kMinGaussianScale;
        const Eigen::Matrix3d S = covariance(q, s);
        EXPECT_LT((S - S.transpose()).norm(), 1e-9);
        const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(S).eigenvalues();
        EXPECT_GE(ev.minCoeff(), 0.25 - 1e-6);
        EXPECT_NEAR(ev.minCoeff(), 0.25, 1e-6);
    }
}

TEST(GaussianSetValidate, RejectsBrokenInvariants) {
    GaussianSet g = tsupport::random_gaussians(3, 4, 14);
    EXPECT_NO_THROW(g.validate(false));
    GaussianSet bad = g;
    bad.alpha[0] = 1.0f;
    EXPECT_ANY_THROW(bad.validate(false));
    bad = g;
    bad.rot[0] *= 2.0f;
    EXPECT_ANY_THROW(bad.validate(false));
    bad = g;
    bad.scale[1] = 0.2f;
    EXPECT_ANY_THROW(bad.validate(true));
    bad = g;
    bad.mu[2] = std::nanf("");
    EXPECT_ANY_THROW(bad.validate(false));
}
