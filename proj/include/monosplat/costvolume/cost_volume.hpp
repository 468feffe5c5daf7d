// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Plane-sweep correlation volume, its refinement network and the soft
// depth expectation.
#pragma once

#include <vector>

#include "monosplat/geometry/camera.hpp"
#include "monosplat/numerics/nn.hpp"

namespace MONOSPLAT_NS {

struct DepthCandidates {
    std::vector<double> values; // ascending
    DepthRange range;
    bool inverse_depth = false;

    Tensor as_tensor() const;
};

/// D >= 2 candidates from near to far inclusive, uniform in depth or (when
/// `inverse_depth`) uniform in 1/depth.
DepthCandidates sample_candidates(const DepthRange &range, int D, bool inverse_depth = false);

struct RawCostVolume {
    Var raw;                        // [h, w, D]; 0 where no neighbor sample is valid
    std::vector<std::uint8_t> valid; // per pixel: at least one valid sample on some plane
};

/// Correlates the reference features with each neighbor's features warped
/// onto every candidate plane, dot(F_ref, F_warp) / C, averaged over the
/// neighbors whose sample is valid. Cameras must be at the feature
/// resolution.
RawCostVolume build_cost_volume(Var ref, const std::vector<Var> &neighbors, const Camera &ref_cam,
                                const std::vector<Camera> &neighbor_cams, const DepthCandidates &cands);

struct CostRefinerConfig {
    int planes = 128;
    std::int64_t mono_channels = 32;
    std::int64_t mv_channels = 64;
    bool use_mono = true;
    std::int64_t base = 128;
    std::vector<int> multipliers{1, 1, 1};
    int attention_level = 2;
    int heads = 1;
};

/// Residual refinement: refined = raw + UNet([raw, mono?, mv]); the last
/// layer starts at zero so refinement begins as the identity.
class CostRefiner {
  public:
    static CostRefiner make(ParamStore &store, const std::string &name, const CostRefinerConfig &cfg,
                            std::uint64_t seed);
    Var operator()(Tape &t, Var raw, Var mono, Var mv) const;
    const CostRefinerConfig &config() const { return cfg_; }

  private:
    CostRefinerConfig cfg_;
    UNet net_;
};

struct DepthEstimate {
    Var prob;  // [h, w, D]
    Var depth; // [h, w]
};
DepthEstimate to_depth(Var refined, const DepthCandidates &cands);

} // namespace monosplat
