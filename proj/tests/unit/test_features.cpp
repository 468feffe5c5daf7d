// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>

#include "monosplat/features/adapter.hpp"
#include "monosplat/features/provider.hpp"
#include "monosplat/numerics/mtf.hpp"
#include "support/random.hpp"

using namespace monosplat;

namespace {

Tensor mirror_x(const Tensor &t) {
    Tensor out(t.shape());
    const auto h = t.dim(0), w = t.dim(1), c = t.dim(2);
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            for (std::int64_t k = 0; k < c; ++k) {
                out.at(y, x, k) = t.at(y, w - 1 - x, k);
            }
        }
    }
    return out;
}

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatD as_matrix(const Tensor &t, std::int64_t rows, std::int64_t cols) {
    MatD m(rows, cols);
    for (std::int64_t i = 0; i < rows * cols; ++i) {
        m.data()[i] = t[i];
    }
    return m;
}

MatD linear(const ParamStore &store, const std::string &name, const MatD &x) {
    const Tensor &w = store.get(name + ".weight").value;
    const Tensor &b = store.get(name + ".bias").value;
    MatD out = x * as_matrix(w, w.size() / w.dim(-1), w.dim(-1));
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            out(r, c) += b[c];
        }
    }
    return out;
}

// Single-head attention evaluated straight from its definition.
MatD dense_attention(const ParamStore &store, const std::string &name, const MatD &q_in, const MatD &kv_in) {
    const MatD q = linear(store, name + ".q", q_in);
    const MatD k = linear(store, name + ".k", kv_in);
    const MatD v = linear(store, name + ".v", kv_in);
    MatD logits = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - m).exp().matrix();
        logits.row(r) /= logits.row(r).sum();
    }
    return linear(store, name + ".out", logits * v);
}

} // namespace

TEST(FeatureExtent, CeilDivision) {
    EXPECT_EQ(feature_extent(64, 0), 16);
    EXPECT_EQ(feature_extent(64, 3), 2);
    EXPECT_EQ(feature_extent(48, 3), 2);
    EXPECT_EQ(feature_extent(16, 3), 1);
}

TEST(SyntheticProvider, ShapesAndDeterminism) {
    std::mt19937_64 rng(1);
    const Tensor img = tsupport::uniform({48, 64, 3}, rng, 0.0, 1.0);
    SyntheticProviderConfig cfg;
    cfg.seed = 7;
    const SyntheticProvider a(cfg), b(cfg);
    const auto oa = a.extract(0, img);
    const auto ob = b.extract(0, img);
    ASSERT_EQ(oa.scales.size(), 4u);
    for (int s = 0; s < 4; ++s) {
        EXPECT_EQ(oa.scales[s].shape(), (Shape{feature_extent(48, s), feature_extent(64, s), 16}));
        EXPECT_TRUE(oa.scales[s] == ob.scales[s]);
        EXPECT_TRUE(oa.scales[s].all_finite());
    }
    EXPECT_EQ(oa.mono.shape(), (Shape{12, 16, 32}));
    EXPECT_TRUE(oa.mono == ob.mono);
    EXPECT_EQ(a.state_hash(), b.state_hash());

    cfg.seed = 8;
    const SyntheticProvider c(cfg);
    EXPECT_FALSE(c.extract(0, img).scales[0] == oa.scales[0]);
    EXPECT_NE(c.state_hash(), a.state_hash());
}

TEST(SyntheticProvider, MirrorEquivariant) {
    std::mt19937_64 rng(2);
    const Tensor img = tsupport::uniform({64, 64, 3}, rng, 0.0, 1.0);
    const SyntheticProvider p(SyntheticProviderConfig{});
    const auto ref = p.extract(0, img);
    const auto mir = p.extract(0, mirror_x(img));
    for (std::size_t s = 0; s < ref.scales.size(); ++s) {
        EXPECT_LT(max_abs_diff(mir.scales[s], mirror_x(ref.scales[s])), 1e-5) << "scale " << s;
    }
    EXPECT_LT(max_abs_diff(mir.mono, mirror_x(ref.mono)), 1e-5);
}

TEST(SyntheticProvider, DistinguishesImages) {
    std::mt19937_64 rng(3);
    const Tensor a = tsupport::uniform({32, 32, 3}, rng, 0.0, 1.0);
    const Tensor b = tsupport::uniform({32, 32, 3}, rng, 0.0, 1.0);
    const SyntheticProvider p(SyntheticProviderConfig{});
    EXPECT_GT(max_abs_diff(p.extract(0, a).scales[0], p.extract(0, b).scales[0]), 0.05);
}

TEST(SyntheticProvider, RejectsNonDivisibleResolution) {
    const SyntheticProvider p(SyntheticProviderConfig{});
    EXPECT_THROW(p.extract(0, Tensor({40, 32, 3})), ShapeError);
    EXPECT_THROW(p.extract(0, Tensor({32, 32, 4})), ShapeError);
}

class FileProviderTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("monosplat_fp_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    void write_view(int view, std::mt19937_64 &rng, std::int64_t H, std::int64_t W, int S, std::int64_t C) {
        for (int s = 0; s < S; ++s) {
            write_mtf(dir_ / ("view_" + std::to_string(view) + "_scale_" + std::to_string(s) + ".mtf"),
                      tsupport::uniform({feature_extent(H, s), feature_extent(W, s), C}, rng));
        }
        write_mtf(dir_ / ("view_" + std::to_string(view) + "_mono.mtf"), tsupport::uniform({H / 4, W / 4, 8}, rng));
    }

    std::filesystem::path dir_;
};

TEST_F(FileProviderTest, PassesTensorsThrough) {
    std::mt19937_64 rng(4);
    write_view(0, rng, 32, 48, 3, 6);
    const FileProvider p(dir_);
    EXPECT_EQ(p.num_scales(), 3);
    const auto out = p.extract(0, Tensor({32, 48, 3}));
    ASSERT_EQ(out.scales.size(), 3u);
    for (int s = 0; s < 3; ++s) {
        EXPECT_TRUE(out.scales[s] == read_mtf(dir_ / ("view_0_scale_" + std::to_string(s) + ".mtf")));
    }
    EXPECT_TRUE(out.mono == read_mtf(dir_ / "view_0_mono.mtf"));
    EXPECT_EQ(make_provider("dir:" + dir_.string(), {})->name(), p.name());
}

TEST_F(FileProviderTest, RejectsShapeMismatch) {
    std::mt19937_64 rng(5);
    write_view(0, rng, 32, 32, 2, 6);
    const FileProvider p(dir_);
    EXPECT_THROW(p.extract(0, Tensor({64, 32, 3})), ShapeError);
    EXPECT_THROW(p.extract(1, Tensor({32, 32, 3})), std::runtime_error);
    write_mtf(dir_ / "view_0_scale_1.mtf", tsupport::uniform({4, 4, 7}, rng));
    EXPECT_THROW(p.extract(0, Tensor({32, 32, 3})), ShapeError);
    write_mtf(dir_ / "view_0_scale_1.mtf", tsupport::uniform({5, 4, 6}, rng));
    EXPECT_THROW(p.extract(0, Tensor({32, 32, 3})), ShapeError);
}

TEST(MakeProvider, ParsesSpec) {
    EXPECT_EQ(make_provider("synthetic", {})->name(), "synthetic");
    EXPECT_THROW(make_provider("vit", {}), std::invalid_argument);
}

TEST(DptFuse, ZeroInputGivesZeroOutput) {
    ParamStore store;
    const DptFuse dpt = DptFuse::make(store, "dpt", DptConfig{8, 3, 16}, 1);
    Tape t;
    std::vector<Var> scales{t.constant(Tensor({8, 8, 8})), t.constant(Tensor({4, 4, 8})), t.constant(Tensor({2, 2, 8}))};
    const Tensor out = dpt(t, scales).value();
    EXPECT_EQ(out.shape(), (Shape{8, 8, 16}));
    for (Real v : out.values()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(DptFuse, SingleScaleIsOneProjection) {
    ParamStore store;
    const DptFuse dpt = DptFuse::make(store, "dpt", DptConfig{8, 1, 64}, 2);
    std::mt19937_64 rng(6);
    const Tensor x = tsupport::uniform({4, 6, 8}, rng);
    Tape t;
    const Tensor out = dpt(t, {t.constant(x)}).value();
    ASSERT_EQ(out.shape(), (Shape{4, 6, 64}));
    const MatD ref = linear(store, "dpt.proj0", as_matrix(x, 24, 8));
    double err = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        err = std::max(err, std::abs(ref.data()[i] - out[i]));
    }
    EXPECT_LT(err, 1e-5);
}

TEST(DptFuse, RandomInputFiniteAndDeterministic) {
    ParamStore store;
    const DptFuse dpt = DptFuse::make(store, "dpt", DptConfig{6, 4, 16}, 3);
    std::mt19937_64 rng(7);
    std::vector<Tensor> xs{tsupport::uniform({12, 12, 6}, rng), tsupport::uniform({6, 6, 6}, rng),
                           tsupport::uniform({3, 3, 6}, rng), tsupport::uniform({2, 2, 6}, rng)};
    auto run = [&] {
        Tape t;
        std::vector<Var> v;
        for (const auto &x : xs) {
            v.push_back(t.constant(x));
        }
        return dpt(t, v).value();
    };
    const Tensor a = run();
    EXPECT_EQ(a.shape(), (Shape{12, 12, 16}));
    EXPECT_TRUE(a.all_finite());
    EXPECT_TRUE(a == run());
    Tape t;
    EXPECT_EQ(dpt.coarsest_only(t, {t.constant(xs[0]), t.constant(xs[1]), t.constant(xs[2]), t.constant(xs[3])})
                  .shape(),
              (Shape{12, 12, 16}));
}

TEST(DptFuse, RejectsBadScaleRatio) {
    ParamStore store;
    const DptFuse dpt = DptFuse::make(store, "dpt", DptConfig{4, 2, 8}, 1);
    Tape t;
    EXPECT_THROW(dpt(t, {t.constant(Tensor({8, 8, 4})), t.constant(Tensor({3, 4, 4}))}), ShapeError);
    EXPECT_THROW(dpt(t, {t.constant(Tensor({8, 8, 4}))}), ShapeError);
}

TEST(AttentionWindows, CoverMapWithRaggedEdges) {
    const auto w = attention_windows(10, 17, 8);
    ASSERT_EQ(w.size(), 6u);
    std::int64_t area = 0;
    for (const auto &b : w) {
        area += (b[1] - b[0]) * (b[3] - b[2]);
    }
    EXPECT_EQ(area, 170);
    EXPECT_EQ(w.back()[1], 10);
    EXPECT_EQ(w.back()[3], 17);
    EXPECT_THROW(attention_windows(4, 4, 0), ShapeError);
}

TEST(WindowAttention, FullWindowMatchesDenseReference) {
    ParamStore store;
    const Attention attn = Attention::make(store, "a", 8, 1, 4);
    std::mt19937_64 rng(8);
    const Tensor q = tsupport::uniform({5, 6, 8}, rng);
    const Tensor kv = tsupport::uniform({5, 6, 8}, rng);
    Tape t;
    const Tensor out = window_attention(t, attn, t.constant(q), t.constant(kv), 8).value();
    const MatD ref = dense_attention(store, "a", as_matrix(q, 30, 8), as_matrix(kv, 30, 8));
    double err = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
        err = std::max(err, std::abs(ref.data()[i] - out[i]));
    }
    EXPECT_LT(err, 1e-5);
}

TEST(WindowAttention, WindowsAreIndependent) {
    ParamStore store;
    const Attention attn = Attention::make(store, "a", 4, 1, 5);
    std::mt19937_64 rng(9);
    const Tensor q = tsupport::uniform({6, 5, 4}, rng);
    Tape t;
    const Tensor out = window_attention(t, attn, t.constant(q), t.constant(q), 4).value();
    for (const auto &b : attention_windows(6, 5, 4)) {
        const std::int64_t hh = b[1] - b[0], ww = b[3] - b[2];
        MatD win(hh * ww, 4);
        for (std::int64_t y = 0; y < hh; ++y) {
            for (std::int64_t x = 0; x < ww; ++x) {
                for (int c = 0; c < 4; ++c) {
                    win(y * ww + x, c) = q.at(b[0] + y, b[2] + x, c);
                }
            }
        }
        const MatD ref = dense_attention(store, "a", win, win);
        for (std::int64_t y = 0; y < hh; ++y) {
            for (std::int64_t x = 0; x < ww; ++x) {
                for (int c = 0; c < 4; ++c) {
                    EXPECT_NEAR(out.at(b[0] + y, b[2] + x, c), ref(y * ww + x, c), 1e-5);
                }
            }
        }
    }
}

TEST(CrossView, AttentionWeightsSumToOne) {
    ParamStore store;
    CrossViewConfig cfg{8, 8, 2, 4, 2, 4};
    const auto xf = CrossViewTransformer::make(store, "x", cfg, 1);
    std::mt19937_64 rng(10);
    Tape t;
    std::vector<Var> views{t.constant(tsupport::uniform({6, 6, 8}, rng)), t.constant(tsupport::uniform({6, 6, 8}, rng))};
    const auto out = xf(t, views, {{1}, {0}}, true, true);
    ASSERT_FALSE(out.weights.empty());
    for (const auto &w : out.weights) {
        const auto rows = w.size() / w.dim(-1);
        for (std::int64_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::int64_t c = 0; c < w.dim(-1); ++c) {
                s += w[r * w.dim(-1) + c];
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(CrossView, IdenticalViewsGiveIdenticalFeatures) {
    ParamStore store;
    const auto xf = CrossViewTransformer::make(store, "x", CrossViewConfig{16, 8, 3, 4, 1, 8}, 2);
    std::mt19937_64 rng(11);
    const Tensor f = tsupport::uniform({8, 8, 16}, rng);
    Tape t;
    const auto out = xf(t, {t.constant(f), t.constant(f)}, {{1}, {0}});
    ASSERT_EQ(out.features.size(), 2u);
    EXPECT_EQ(out.features[0].shape(), (Shape{8, 8, 8}));
    EXPECT_TRUE(out.features[0].value() == out.features[1].value());
    EXPECT_FALSE(out.self_attention_only);
}

TEST(CrossView, NoNeighborsFallsBackToSelfAttention) {
    ParamStore store;
    const auto xf = CrossViewTransformer::make(store, "x", CrossViewConfig{8, 8, 1, 4, 1, 2}, 3);
    std::mt19937_64 rng(12);
    Tape t;
    Var a = t.constant(tsupport::uniform({4, 4, 8}, rng));
    Var b = t.constant(tsupport::uniform({4, 4, 8}, rng));
    const auto solo = xf(t, {a}, {{}});
    EXPECT_TRUE(solo.self_attention_only);
    const auto off = xf(t, {a, b}, {{1}, {0}}, false);
    EXPECT_TRUE(off.self_attention_only);
    EXPECT_TRUE(off.features[0].value() == solo.features[0].value());
    const auto on = xf(t, {a, b}, {{1}, {0}}, true);
    EXPECT_FALSE(on.self_attention_only);
    EXPECT_GT(max_abs_diff(on.features[0].value(), solo.features[0].value()), 0.0);
}

TEST(CrossView, RejectsBadInputs) {
    ParamStore store;
    const auto xf = CrossViewTransformer::make(store, "x", CrossViewConfig{8, 8, 1, 4, 1, 2}, 3);
    Tape t;
    Var a = t.constant(Tensor({4, 4, 8}));
    EXPECT_THROW(xf(t, {a, a, a}, {{}, {}, {}}), ShapeError);
    EXPECT_THROW(xf(t, {a}, {{0}}), ShapeError);
    EXPECT_THROW(xf(t, {t.constant(Tensor({4, 4, 6}))}, {{}}), ShapeError);
}
