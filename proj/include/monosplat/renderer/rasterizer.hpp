// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Tile-based EWA splatting of Gaussian sets, an untiled reference renderer,
// and the analytic backward pass.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "monosplat/gaussians/gaussian_set.hpp"
#include "monosplat/geometry/camera.hpp"
#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

struct RenderSettings {
    int width = 0;
    int height = 0;
    std::array<float, 3> background{0.0f, 0.0f, 0.0f};
    int tile = 16;
    float alpha_cutoff = 1.0f / 255.0f;
    float lowpass = 0.3f; // px^2 added to the 2D covariance diagonal

    static RenderSettings for_camera(const Camera &cam);
    void validate() const;
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kMaxSplatAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kMinCovDeterminant = 1e-12;

/// Per-Gaussian screen-space quantities shared by forward and backward.
struct ProjectedGaussian {
    bool visible = false;
    double mean[2] = {0, 0};  // pixel position
    double conic[3] = {0, 0, 0}; // inverse 2D covariance (xx, xy, yy)
    double depth = 0.0;          // view-space z
    double color[3] = {0, 0, 0};
    double opacity = 0.0;
    int bbox[4] = {0, 0, -1, -1}; // inclusive pixel bounds x0, y0, x1, y1
};

/// Forward state retained for render_backward.
struct RenderState {
    bool valid = false;
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    std::int64_t num_gaussians = 0;
    std::vector<ProjectedGaussian> projected;
    std::vector<std::vector<std::int32_t>> tile_lists; // depth-sorted gaussian ids per tile
    std::vector<std::int32_t> contrib_end;             // per pixel, list position after the last contributor
    Tensor transmittance;                              // [H, W] final T
};

struct RenderOutput {
    Tensor image;         // [H, W, 3]
    Tensor depth;         // [H, W] alpha-weighted view-space z
    Tensor transmittance; // [H, W]
    std::int64_t degenerate = 0; // Gaussians skipped for a singular 2D covariance
    RenderState state;
};

RenderOutput render(const GaussianSet &g, const Camera &cam, const RenderSettings &settings);

/// Reference: every Gaussian at every pixel after one global depth sort, in
/// double precision, without tiles or extent culling.
struct BruteOutput {
    Tensor image;
    Tensor depth;
    Tensor transmittance;
};
BruteOutput render_brute(const GaussianSet &g, const Camera &cam, const RenderSettings &settings);

struct GaussianGrads {
    Tensor mu;    // [N, 3]
    Tensor alpha; // [N]
    Tensor scale; // [N, 3]
    Tensor rot;   // [N, 4], with respect to the stored (possibly unnormalized) quaternion
    Tensor sh;    // [N, 3, B]
};

/// Gradients of a loss with respect to every Gaussian attribute, given the
/// loss gradient on the rendered image (and optionally the depth map).
GaussianGrads render_backward(const GaussianSet &g, const Camera &cam, const RenderSettings &settings,
                              const RenderState &state, const Tensor &dL_dimage, const Tensor *dL_ddepth = nullptr);

} // namespace monosplat
