// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <filesystem>

#include "monosplat/numerics/autodiff.hpp"
#include "monosplat/numerics/hash.hpp"
#include "monosplat/numerics/mtf.hpp"
#include "monosplat/numerics/parallel.hpp"
#include "support/random.hpp"

using namespace monosplat;
using monosplat::tsupport::uniform;

namespace {

// Pointwise scalar interpolator used as an independent oracle.
double bilerp(const Tensor &src, double x, double y, int c) {
    const auto H = src.dim(0), W = src.dim(1);
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    const auto x0 = static_cast<std::int64_t>(std::floor(x)), y0 = static_cast<std::int64_t>(std::floor(y));
    const auto x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
           fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
}

} // namespace

TEST(Tensor, ShapeAndDataMustAgree) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<Real>(5)), ShapeError);
    Tensor t({2, 3}, 1.5f);
    EXPECT_EQ(t.size(), 6);
    EXPECT_EQ(t.dim(-1), 3);
    EXPECT_THROW(t.reshaped({4}), ShapeError);
    EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Tensor, NonFiniteIsAnError) {
    Tensor t({2}, std::vector<Real>{1.0f, std::nanf("")});
    EXPECT_FALSE(t.all_finite());
    EXPECT_THROW(t.require_finite("probe"), NumericError);
}

TEST(BilinearSample, IntegerCoordinatesAreExact) {
    std::mt19937_64 rng(1);
    Tensor src = uniform({5, 6, 2}, rng);
    Tensor coords({5, 6, 2});
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 6; ++x) {
            coords.at(y, x, 0) = static_cast<Real>(x);
            coords.at(y, x, 1) = static_cast<Real>(y);
        }
    }
    auto r = bilinear_sample(src, coords);
    EXPECT_EQ(r.value, src);
    for (auto v : r.valid) {
        EXPECT_EQ(v, 1);
    }
}

TEST(BilinearSample, MidpointIsAverage) {
    Tensor src({1, 2, 1}, std::vector<Real>{0.0f, 1.0f});
    Tensor coords({1, 1, 2}, std::vector<Real>{0.5f, 0.0f});
    EXPECT_NEAR(bilinear_sample(src, coords).value[0], 0.5, 1e-7);
}

TEST(BilinearSample, MatchesScalarOracleOnFinerGrid) {
    std::mt19937_64 rng(2);
    Tensor src = uniform({8, 8, 3}, rng);
    Tensor coords({16, 16, 2});
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            coords.at(y, x, 0) = static_cast<Real>(x * 0.5);
            coords.at(y, x, 1) = static_cast<Real>(y * 0.5);
        }
    }
    auto r = bilinear_sample(src, coords);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_NEAR(r.value.at(y, x, c), bilerp(src, x * 0.5, y * 0.5, c), 1e-6);
            }
            EXPECT_EQ(r.valid[static_cast<std::size_t>(y * 16 + x)], (x <= 14 && y <= 14) ? 1 : 0);
        }
    }
}

TEST(BilinearSample, OutOfRangeClampsAndFlags) {
    Tensor src({2, 2, 1}, std::vector<Real>{1, 2, 3, 4});
    Tensor coords({1, 2, 2}, std::vector<Real>{-3.0f, 0.0f, 0.0f, 7.0f});
    auto r = bilinear_sample(src, coords);
    EXPECT_EQ(r.value[0], 1.0f);
    EXPECT_EQ(r.value[1], 3.0f);
    EXPECT_EQ(r.valid[0], 0);
    EXPECT_EQ(r.valid[1], 0);
    EXPECT_THROW(bilinear_sample(Tensor({0, 2, 1}), coords), ShapeError);
    EXPECT_THROW(bilinear_sample(src, Tensor({1, 2, 3})), ShapeError);
}

TEST(Softmax, UniformSlice) {
    auto p = softmax_last(Tensor({4}, 3.0f));
    for (auto v : p.values()) {
        EXPECT_NEAR(v, 0.25, 1e-7);
    }
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    auto p = softmax_last(Tensor({2}, std::vector<Real>{1000.0f, 0.0f}));
    EXPECT_NEAR(p[0], 1.0, 1e-6);
    EXPECT_NEAR(p[1], 0.0, 1e-6);
}

TEST(Softmax, MatchesDoublePrecisionOracle) {
    std::mt19937_64 rng(3);
    Tensor x = uniform({7, 9}, rng, -5.0, 5.0);
    auto p = softmax_last(x);
    for (int r = 0; r < 7; ++r) {
        long double z = 0;
        for (int k = 0; k < 9; ++k) {
            z += std::exp(static_cast<long double>(x[r * 9 + k]));
        }
        double total = 0;
        for (int k = 0; k < 9; ++k) {
            EXPECT_NEAR(p[r * 9 + k], static_cast<double>(std::exp(static_cast<long double>(x[r * 9 + k])) / z), 1e-6);
            total += p[r * 9 + k];
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
    }
}

TEST(Backward, SumOfSquaresGivesTwoX) {
    std::mt19937_64 rng(4);
    Parameter x(uniform({3, 4}, rng), true);
    Tape tape;
    Var v = tape.parameter(x);
    tape.backward(ad::sum(ad::mul(v, v)));
    for (std::int64_t i = 0; i < x.value.size(); ++i) {
        EXPECT_EQ(x.grad[i], 2.0f * x.value[i]);
    }
}

TEST(Backward, FrozenParameterStaysZero) {
    std::mt19937_64 rng(5);
    Parameter w(uniform({4}, rng), false);
    Parameter b(uniform({4}, rng), true);
    Tape tape;
    tape.backward(ad::sum(ad::mul(tape.parameter(w), tape.parameter(b))));
    for (std::int64_t i = 0; i < 4; ++i) {
        EXPECT_EQ(w.grad[i], 0.0f);
        EXPECT_EQ(b.grad[i], w.value[i]);
    }
}

TEST(Backward, RejectsNonScalarAndOpaqueNodes) {
    Parameter p(Tensor({2}, 1.0f), true);
    Tape tape;
    Var v = tape.parameter(p);
    EXPECT_THROW(tape.backward(v), ShapeError);
    Var o = tape.opaque(Tensor({2}, 2.0f), {v});
    EXPECT_THROW(tape.backward(ad::sum(o)), std::logic_error);
}

TEST(Backward, BroadcastAddReducesGradient) {
    Parameter a(Tensor({2, 3}, 1.0f), true);
    Parameter b(Tensor({3}, 1.0f), true);
    Tape tape;
    Var s = ad::add(tape.parameter(a), tape.parameter(b));
    EXPECT_EQ(s.shape(), (Shape{2, 3}));
    tape.backward(ad::sum(s));
    for (std::int64_t i = 0; i < 3; ++i) {
        EXPECT_EQ(b.grad[i], 2.0f);
    }
}

TEST(Mtf, RoundTripIsBitwise) {
    std::mt19937_64 rng(6);
    Tensor t = uniform({3, 4, 5}, rng);
    const auto bytes = encode_mtf(t);
    EXPECT_EQ(decode_mtf(bytes), t);
    EXPECT_EQ(encode_mtf(decode_mtf(bytes)), bytes);
    const auto path = std::filesystem::temp_directory_path() / "monosplat_roundtrip.mtf";
    write_mtf(path, t);
    EXPECT_EQ(read_mtf(path), t);
    std::filesystem::remove(path);
}

TEST(Mtf, RejectsMalformedInput) {
    auto bytes = encode_mtf(Tensor({2, 2}, 1.0f));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_mtf(bad_magic), FormatError);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(decode_mtf(truncated), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(decode_mtf(bad_version), FormatError);
}

TEST(Hash, KnownSha256Vector) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t *>(abc.data()), 3)),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
    std::vector<double> a(1000), b(1000);
    set_num_threads(1);
    parallel_for(1000, [&](std::int64_t i) { a[static_cast<std::size_t>(i)] = std::sin(static_cast<double>(i)); });
    set_num_threads(4);
    parallel_for(1000, [&](std::int64_t i) { b[static_cast<std::size_t>(i)] = std::sin(static_cast<double>(i)); });
    set_num_threads(1);
    EXPECT_EQ(a, b);
    EXPECT_THROW(parallel_for(10, [](std::int64_t i) {
                     if (i == 7) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(ResizeBilinear, PixelCentersAligned) {
    Tensor ramp({1, 4, 1});
    for (int x = 0; x < 4; ++x) {
        ramp[x] = static_cast<Real>(x);
    }
    Tape t;
    const Tensor up = ad::resize_bilinear(t.constant(ramp), 1, 16).value();
    for (int x = 0; x < 16; ++x) {
        EXPECT_NEAR(up[x], std::clamp((x + 0.5) / 4.0 - 0.5, 0.0, 3.0), 1e-6) << x;
    }
    const Tensor down = ad::resize_bilinear(t.constant(up), 1, 4).value();
    for (int x = 0; x < 4; ++x) {
        EXPECT_NEAR(down[x], 0.5 * (up[4 * x + 1] + up[4 * x + 2]), 1e-6);
    }
}
