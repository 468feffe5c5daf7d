// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Full-resolution feature refinement and the per-pixel Gaussian heads.
#pragma once

#include "monosplat/gaussians/gaussian_set.hpp"
#include "monosplat/geometry/camera.hpp"
#include "monosplat/numerics/nn.hpp"

namespace MONOSPLAT_NS {

/// Saturated sigmoids are pulled back inside the open unit interval.
inline constexpr Real kMinOpacity = Real(1e-6);
inline constexpr Real kMaxOpacity = Real(1) - Real(1e-6);

struct FeatureRefinerConfig {
    std::int64_t mono_channels = 32;
    std::int64_t mv_channels = 64;
    bool use_mono = true;
    std::int64_t base = 32;
    std::vector<int> multipliers{1, 1, 1, 1, 1};
    int attention_level = 4;
    int heads = 1;
    std::int64_t out_channels = 32;
};

/// Upsamples [normalized depth, mono?, mv] to the image resolution,
/// concatenates the image and runs an encoder-decoder.
class FeatureRefiner {
  public:
    static FeatureRefiner make(ParamStore &store, const std::string &name, const FeatureRefinerConfig &cfg,
                               std::uint64_t seed);
    /// `depth` is [h, w] in scene units; `range` maps it to [0, 1].
    Var operator()(Tape &t, Var depth, Var mono, Var mv, Var image, const DepthRange &range) const;
    const FeatureRefinerConfig &config() const { return cfg_; }

  private:
    FeatureRefinerConfig cfg_;
    UNet net_;
};

/// Per-attribute tape variables of a predicted set, row-major over pixels.
struct GaussianVars {
    Var mu;    // [N, 3]
    Var alpha; // [N]
    Var scale; // [N, 3]
    Var rot;   // [N, 4]
    Var sh;    // [N, 3, B]
    Var depth; // [H, W] final clamped depth

    GaussianSet materialize() const;
};

/// Tape-level counterpart of merge(): concatenates views in order.
GaussianVars merge_vars(const std::vector<GaussianVars> &views);

struct GaussianHeadConfig {
    std::int64_t in_channels = 32;
    int sh_bands = 16;
    /// Depth residual bound as a fraction of (far - near).
    double residual_fraction = 0.1;
};

class GaussianHeads {
  public:
    static GaussianHeads make(ParamStore &store, const std::string &name, const GaussianHeadConfig &cfg,
                              std::uint64_t seed);
    /// `features` [H, W, C]; `coarse_depth` [h, w] is upsampled to H x W.
    GaussianVars operator()(Tape &t, Var features, Var coarse_depth, const Tensor &image, const Camera &cam,
                            const DepthRange &range) const;
    const GaussianHeadConfig &config() const { return cfg_; }

  private:
    GaussianHeadConfig cfg_;
    Conv2d depth_head_;
    Conv2d raw_head_;
};

} // namespace monosplat
