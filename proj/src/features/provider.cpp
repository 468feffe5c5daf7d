// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/features/provider.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

#include "monosplat/numerics/hash.hpp"
#include "monosplat/numerics/mtf.hpp"

namespace MONOSPLAT_NS {

std::int64_t feature_extent(std::int64_t image_extent, int s) {
    const std::int64_t f = std::int64_t{4} << s;
    return (image_extent + f - 1) / f;
}

void require_divisible_by_16(const Tensor &image) {
    if (image.rank() != 3 || image.dim(2) != 3) {
        throw ShapeError("image must be HxWx3, got " + to_string(image.shape()));
    }
    if (image.dim(0) % 16 != 0 || image.dim(1) % 16 != 0 || image.dim(0) == 0 || image.dim(1) == 0) {
        throw ShapeError("image extents must be positive multiples of 16, got " + to_string(image.shape()));
    }
}

namespace {

// Orthonormal columns spanning a random subspace of mirror-symmetric patches.
Tensor symmetric_projection(int radius, std::int64_t channels, std::uint64_t seed) {
    const int side = 2 * radius + 1;
    const int P = side * side * 4;
    const int k = side * (radius + 1) * 4;
    if (channels > k) {
        throw ShapeError("synthetic provider: too many channels for patch radius " + std::to_string(radius));
    }
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(P, k);
    int col = 0;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int a = 0; a <= radius; ++a) {
            for (int c = 0; c < 4; ++c, ++col) {
                const double v = a == 0 ? 1.0 : 1.0 / std::sqrt(2.0);
                for (int dx : {-a, a}) {
                    basis(((dy + radius) * side + dx + radius) * 4 + c, col) = v;
                }
            }
        }
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd G(k, channels);
    for (Eigen::Index i = 0; i < G.size(); ++i) {
        G.data()[i] = n01(rng);
    }
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ() *
                              Eigen::MatrixXd::Identity(k, channels);
    const Eigen::MatrixXd W = basis * Q;
    Tensor out({P, channels});
    for (int r = 0; r < P; ++r) {
        for (std::int64_t c = 0; c < channels; ++c) {
            out[r * channels + c] = static_cast<Real>(W(r, c));
        }
    }
    return out;
}

} // namespace

SyntheticProvider::SyntheticProvider(SyntheticProviderConfig cfg) : cfg_(cfg) {
    if (cfg_.num_scales < 1 || cfg_.channels < 1 || cfg_.mono_channels < 1) {
        throw ShapeError("synthetic provider: scales and channel counts must be positive");
    }
    for (int s = 0; s < cfg_.num_scales; ++s) {
        scales_.push_back({1 + s, symmetric_projection(1 + s, cfg_.channels, cfg_.seed * 1000003ull + static_cast<std::uint64_t>(s))});
    }
    mono_ = {2, symmetric_projection(2, cfg_.mono_channels, cfg_.seed * 1000003ull + 999ull)};
}

Tensor SyntheticProvider::describe(const Tensor &image, const Projection &p, int pool) const {
    const std::int64_t H = image.dim(0), W = image.dim(1);
    const int r = p.radius, side = 2 * r + 1;
    const std::int64_t P = side * side * 4;
    const std::int64_t C = p.weight.dim(1);
    auto clampi = [](std::int64_t v, std::int64_t hi) { return std::clamp<std::int64_t>(v, 0, hi - 1); };
    // Channels: centered RGB and gradient magnitude of the luminance.
    std::vector<double> chan(static_cast<std::size_t>(H * W * 4));
    auto lum = [&](std::int64_t y, std::int64_t x) {
        return (image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2)) / 3.0;
    };
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            double *c = chan.data() + (y * W + x) * 4;
            for (int k = 0; k < 3; ++k) {
                c[k] = image.at(y, x, k) - 0.5;
            }
            const double gx = 0.5 * (lum(y, clampi(x + 1, W)) - lum(y, clampi(x - 1, W)));
            const double gy = 0.5 * (lum(clampi(y + 1, H), x) - lum(clampi(y - 1, H), x));
            c[3] = std::sqrt(gx * gx + gy * gy);
        }
    }
    Eigen::MatrixXd patches(H * W, P);
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double *c = chan.data() + (clampi(y + dy, H) * W + clampi(x + dx, W)) * 4;
                    for (int k = 0; k < 4; ++k) {
                        patches(y * W + x, ((dy + r) * side + dx + r) * 4 + k) = c[k];
                    }
                }
            }
        }
    }
    Eigen::MatrixXd Wm(P, C);
    for (std::int64_t i = 0; i < P * C; ++i) {
        Wm(i / C, i % C) = p.weight[i];
    }
    const Eigen::MatrixXd feat = (cfg_.gain * (patches * Wm)).array().tanh().matrix();
    const std::int64_t h = (H + pool - 1) / pool, w = (W + pool - 1) / pool;
    Tensor out({h, w, C});
    for (std::int64_t by = 0; by < h; ++by) {
        for (std::int64_t bx = 0; bx < w; ++bx) {
            const std::int64_t y1 = std::min(H, (by + 1) * pool), x1 = std::min(W, (bx + 1) * pool);
            const double n = static_cast<double>((y1 - by * pool) * (x1 - bx * pool));
            for (std::int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::int64_t y = by * pool; y < y1; ++y) {
                    for (std::int64_t x = bx * pool; x < x1; ++x) {
                        acc += feat(y * W + x, c);
                    }
                }
                out.at(by, bx, c) = static_cast<Real>(acc / n);
            }
        }
    }
    return out;
}

ProviderOutput SyntheticProvider::extract(int /*view*/, const Tensor &image) const {
    require_divisible_by_16(image);
    image.require_finite("synthetic provider input");
    ProviderOutput out;
    for (int s = 0; s < cfg_.num_scales; ++s) {
        out.scales.push_back(describe(image, scales_[static_cast<std::size_t>(s)], 4 << s));
    }
    out.mono = describe(image, mono_, 4);
    return out;
}

std::string SyntheticProvider::state_hash() const {
    std::ostringstream os;
    os << "synthetic:" << cfg_.num_scales << ":" << cfg_.channels << ":" << cfg_.mono_channels << ":" << cfg_.gain
       << ":" << cfg_.seed;
    for (const auto &p : scales_) {
        os << ":" << sha256_hex(p.weight);
    }
    os << ":" << sha256_hex(mono_.weight);
    const std::string s = os.str();
    return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
}

std::int64_t SyntheticProvider::parameter_count() const {
    std::int64_t n = mono_.weight.size();
    for (const auto &p : scales_) {
        n += p.weight.size();
    }
    return n;
}

FileProvider::FileProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) {
        throw FormatError("feature directory not found: " + dir_.string());
    }
    while (std::filesystem::exists(dir_ / ("view_0_scale_" + std::to_string(num_scales_) + ".mtf"))) {
        ++num_scales_;
    }
    if (num_scales_ == 0) {
        throw FormatError("feature directory has no view_0_scale_0.mtf: " + dir_.string());
    }
}

ProviderOutput FileProvider::extract(int view, const Tensor &image) const {
    require_divisible_by_16(image);
    const std::int64_t H = image.dim(0), W = image.dim(1);
    ProviderOutput out;
    const std::string prefix = "view_" + std::to_string(view);
    std::int64_t channels = -1;
    for (int s = 0; s < num_scales_; ++s) {
        const auto path = dir_ / (prefix + "_scale_" + std::to_string(s) + ".mtf");
        Tensor t = read_mtf(path);
        if (t.rank() != 3 || t.dim(0) != feature_extent(H, s) || t.dim(1) != feature_extent(W, s) ||
            (channels >= 0 && t.dim(2) != channels)) {
            throw ShapeError(path.filename().string() + ": shape " + to_string(t.shape()) +
                             " does not match image " + to_string(image.shape()) + " at scale " + std::to_string(s));
        }
        channels = t.dim(2);
        t.require_finite(path.filename().string());
        out.scales.push_back(std::move(t));
    }
    const auto mono_path = dir_ / (prefix + "_mono.mtf");
    out.mono = read_mtf(mono_path);
    if (out.mono.rank() != 3 || out.mono.dim(0) != H / 4 || out.mono.dim(1) != W / 4) {
        throw ShapeError(mono_path.filename().string() + ": shape " + to_string(out.mono.shape()) +
                         " does not match image " + to_string(image.shape()));
    }
    out.mono.require_finite(mono_path.filename().string());
    return out;
}

std::string FileProvider::state_hash() const {
    std::string acc;
    std::vector<std::filesystem::path> files;
    for (const auto &e : std::filesystem::directory_iterator(dir_)) {
        if (e.path().extension() == ".mtf") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) {
        acc += f.filename().string() + ":" + sha256_file(f) + "\n";
    }
    return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t *>(acc.data()), acc.size()));
}

std::unique_ptr<FeatureProvider> make_provider(const std::string &spec, const SyntheticProviderConfig &cfg) {
    if (spec == "synthetic") {
        return std::make_unique<SyntheticProvider>(cfg);
    }
    if (spec.rfind("dir:", 0) == 0) {
        return std::make_unique<FileProvider>(spec.substr(4));
    }
    throw ShapeError("unknown feature provider '" + spec + "' (expected synthetic or dir:<path>)");
}

} // namespace monosplat
