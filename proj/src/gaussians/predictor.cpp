// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/gaussians/predictor.hpp"

#include <Eigen/Dense>

#include "monosplat/renderer/sh.hpp"

namespace MONOSPLAT_NS {

FeatureRefiner FeatureRefiner::make(ParamStore &store, const std::string &name, const FeatureRefinerConfig &cfg,
                                    std::uint64_t seed) {
    FeatureRefiner r;
    r.cfg_ = cfg;
    UNetConfig u;
    u.in_channels = 1 + (cfg.use_mono ? cfg.mono_channels : 0) + cfg.mv_channels + 3;
    u.out_channels = cfg.out_channels;
    u.base = cfg.base;
    u.multipliers = cfg.multipliers;
    u.attention_level = cfg.attention_level;
    u.heads = cfg.heads;
    r.net_ = UNet::make(store, name, u, seed);
    return r;
}

Var FeatureRefiner::operator()(Tape &t, Var depth, Var mono, Var mv, Var image, const DepthRange &range) const {
    const std::int64_t h = depth.dim(0), w = depth.dim(1);
    const std::int64_t H = image.dim(0), W = image.dim(1);
    if (depth.value().rank() != 2 || image.value().rank() != 3 || image.dim(2) != 3) {
        throw ShapeError("feature refiner: expected depth [h, w] and image [H, W, 3]");
    }
    if (mv.dim(0) != h || mv.dim(1) != w || mv.dim(2) != cfg_.mv_channels ||
        (cfg_.use_mono && (mono.dim(0) != h || mono.dim(1) != w || mono.dim(2) != cfg_.mono_channels))) {
        throw ShapeError("feature refiner: inputs must share the coarse resolution");
    }
    if (H != 4 * h || W != 4 * w) {
        throw ShapeError("feature refiner: image must be four times the feature resolution");
    }
    const Real inv_span = static_cast<Real>(1.0 / (range.far - range.near));
    Var d = ad::add_scalar(ad::scale(depth, inv_span), static_cast<Real>(-range.near / (range.far - range.near)));
    std::vector<Var> parts{ad::resize_bilinear(ad::reshape(d, {h, w, 1}), H, W)};
    if (cfg_.use_mono) {
        parts.push_back(ad::resize_bilinear(mono, H, W));
    }
    parts.push_back(ad::resize_bilinear(mv, H, W));
    parts.push_back(image);
    return net_(t, ad::concat(parts, 2));
}

GaussianSet GaussianVars::materialize() const {
    GaussianSet g;
    g.mu = mu.value();
    g.alpha = alpha.value();
    g.scale = scale.value();
    g.rot = rot.value();
    g.sh = sh.value();
    return g;
}

GaussianVars merge_vars(const std::vector<GaussianVars> &views) {
    if (views.empty()) {
        throw ShapeError("merge: at least one view required");
    }
    if (views.size() == 1) {
        return views.front();
    }
    auto cat = [&](Var GaussianVars::*field) {
        std::vector<Var> xs;
        for (const auto &v : views) {
            xs.push_back(v.*field);
        }
        return ad::concat(xs, 0);
    };
    GaussianVars out;
    out.mu = cat(&GaussianVars::mu);
    out.alpha = cat(&GaussianVars::alpha);
    out.scale = cat(&GaussianVars::scale);
    out.rot = cat(&GaussianVars::rot);
    out.sh = cat(&GaussianVars::sh);
    return out;
}

GaussianHeads GaussianHeads::make(ParamStore &store, const std::string &name, const GaussianHeadConfig &cfg,
                                  std::uint64_t seed) {
    GaussianHeads g;
    g.cfg_ = cfg;
    g.depth_head_ = Conv2d::make(store, name + ".depth", cfg.in_channels, 2, 3, 1, seed, Init::Zero);
    g.raw_head_ = Conv2d::make(store, name + ".raw", cfg.in_channels, 3 + 4 + 3 * cfg.sh_bands, 3, 1, seed, Init::Zero);
    return g;
}

GaussianVars GaussianHeads::operator()(Tape &t, Var features, Var coarse_depth, const Tensor &image,
                                       const Camera &cam, const DepthRange &range) const {
    const std::int64_t H = features.dim(0), W = features.dim(1), N = H * W;
    const int B = cfg_.sh_bands;
    if (image.shape() != Shape{H, W, 3} || cam.width != W || cam.height != H) {
        throw ShapeError("gaussian heads: image, camera and features must share the resolution");
    }
    GaussianVars out;

    Var dh = depth_head_(t, features);
    const double r = cfg_.residual_fraction * (range.far - range.near);
    Var delta = ad::scale(ad::add_scalar(ad::scale(ad::sigmoid(ad::slice(dh, 2, 0, 1)), 2.0f), -1.0f),
                          static_cast<Real>(r));
    Var base = ad::resize_bilinear(ad::reshape(coarse_depth, {coarse_depth.dim(0), coarse_depth.dim(1), 1}), H, W);
    Var depth = ad::clamp(ad::add(base, delta), static_cast<Real>(range.near), static_cast<Real>(range.far));
    out.depth = ad::reshape(depth, {H, W});
    out.alpha = ad::reshape(ad::clamp(ad::sigmoid(ad::slice(dh, 2, 1, 2)), kMinOpacity, kMaxOpacity), {N});

    // mu = depth * (R^T K^-1 [u, v, 1]) + camera center
    Tensor rays({N, 3});
    const Eigen::Matrix3d M = cam.R.transpose() * cam.K.inverse();
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            const Eigen::Vector3d d = M * Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), 1.0);
            for (int k = 0; k < 3; ++k) {
                rays[(y * W + x) * 3 + k] = static_cast<Real>(d[k]);
            }
        }
    }
    const Eigen::Vector3d c = cam.center();
    Tensor center({3}, std::vector<Real>{static_cast<Real>(c.x()), static_cast<Real>(c.y()), static_cast<Real>(c.z())});
    out.mu = ad::add(ad::mul(ad::reshape(depth, {N, 1}), t.constant(std::move(rays))), t.constant(std::move(center)));

    Var raw = ad::reshape(raw_head_(t, features), {N, 3 + 4 + 3 * B});
    out.scale = ad::add_scalar(
        ad::scale(ad::sigmoid(ad::slice(raw, 1, 0, 3)), static_cast<Real>(kMaxGaussianScale - kMinGaussianScale)),
        static_cast<Real>(kMinGaussianScale));
    Tensor identity({4}, std::vector<Real>{1.0f, 0.0f, 0.0f, 0.0f});
    out.rot = ad::normalize(ad::add(ad::slice(raw, 1, 3, 7), t.constant(std::move(identity))));
    Tensor dc({N, 3, B});
    for (std::int64_t p = 0; p < N; ++p) {
        for (int ch = 0; ch < 3; ++ch) {
            dc[(p * 3 + ch) * B] = static_cast<Real>(image[p * 3 + ch] / sh::kC0);
        }
    }
    out.sh = ad::add(ad::reshape(ad::slice(raw, 1, 7, 7 + 3 * B), {N, 3, B}), t.constant(std::move(dc)));
    return out;
}

} // namespace monosplat
