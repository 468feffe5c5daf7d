// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/renderer/rasterizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "monosplat/numerics/parallel.hpp"
#include "monosplat/renderer/sh.hpp"

namespace MONOSPLAT_NS {

RenderSettings RenderSettings::for_camera(const Camera &cam) {
    RenderSettings s;
    s.width = cam.width;
    s.height = cam.height;
    return s;
}

void RenderSettings::validate() const {
    if (width <= 0 || height <= 0) {
        throw ShapeError("render settings: empty image");
    }
    if (tile < 1) {
        throw ShapeError("render settings: tile must be at least 1");
    }
    if (!(alpha_cutoff > 0.0f && alpha_cutoff < 1.0f)) {
        throw ShapeError("render settings: alpha_cutoff must lie in (0, 1)");
    }
    if (!(lowpass >= 0.0f)) {
        throw ShapeError("render settings: lowpass must be non-negative");
    }
}

namespace {

void check_inputs(const GaussianSet &g, const Camera &cam, const RenderSettings &s) {
    s.validate();
    g.validate(/*check_scale_bounds=*/false);
    if (!(cam.K(0, 0) > 0.0) || !(cam.K(1, 1) > 0.0)) {
        throw GeometryError("render: camera focal lengths must be positive");
    }
}

Eigen::Vector4d quat_of(const GaussianSet &g, std::int64_t i) {
    return {g.rot[i * 4], g.rot[i * 4 + 1], g.rot[i * 4 + 2], g.rot[i * 4 + 3]};
}

Eigen::Vector3d vec3_of(const Tensor &t, std::int64_t i) { return {t[i * 3], t[i * 3 + 1], t[i * 3 + 2]}; }

// Intermediate per-Gaussian quantities needed by both passes.
struct Geometry {
    Eigen::Vector3d tcam;
    Eigen::Matrix<double, 2, 3> J;
    Eigen::Matrix3d Sigma;
    Eigen::Matrix2d cov2;
    Eigen::Vector3d dir;
    double dir_norm = 1.0;
};

Geometry gaussian_geometry(const GaussianSet &g, std::int64_t i, const Camera &cam, double lowpass) {
    Geometry geo;
    const Eigen::Vector3d mu = vec3_of(g.mu, i);
    geo.tcam = cam.R * mu + cam.t;
    const double tx = geo.tcam.x(), ty = geo.tcam.y(), tz = geo.tcam.z();
    const double a = cam.K(0, 0), s = cam.K(0, 1), f = cam.K(1, 1);
    geo.J << a / tz, s / tz, -(a * tx + s * ty) / (tz * tz), 0.0, f / tz, -f * ty / (tz * tz);
    geo.Sigma = covariance(quat_of(g, i), vec3_of(g.scale, i));
    const Eigen::Matrix<double, 2, 3> T = geo.J * cam.R;
    geo.cov2 = T * geo.Sigma * T.transpose();
    geo.cov2(0, 0) += lowpass;
    geo.cov2(1, 1) += lowpass;
    const Eigen::Vector3d v = mu - cam.center();
    geo.dir_norm = v.norm();
    geo.dir = geo.dir_norm > 0.0 ? Eigen::Vector3d(v / geo.dir_norm) : Eigen::Vector3d(0, 0, 1);
    return geo;
}

void eval_color(const GaussianSet &g, std::int64_t i, const Eigen::Vector3d &dir, double out[3]) {
    const int B = g.sh_bands();
    double Y[sh::kMaxBands];
    const double d[3] = {dir.x(), dir.y(), dir.z()};
    sh::eval_basis(B, d, Y);
    for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < B; ++k) {
            acc += g.sh[(i * 3 + c) * B + k] * Y[k];
        }
        out[c] = acc;
    }
}

// Evaluates the splat at pixel (px, py); returns a negative value when the
// splat does not contribute.
inline double splat_alpha(const ProjectedGaussian &p, double px, double py, double cutoff, double *G_out = nullptr,
                          double *dx_out = nullptr, double *dy_out = nullptr) {
    const double dx = px - p.mean[0];
    const double dy = py - p.mean[1];
    const double power = -0.5 * (p.conic[0] * dx * dx + p.conic[2] * dy * dy) - p.conic[1] * dx * dy;
    if (power > 0.0) {
        return -1.0;
    }
    const double G = std::exp(power);
    const double a = std::min(kMaxSplatAlpha, p.opacity * G);
    if (a < cutoff) {
        return -1.0;
    }
    if (G_out != nullptr) {
        *G_out = G;
        *dx_out = dx;
        *dy_out = dy;
    }
    return a;
}

} // namespace

RenderOutput render(const GaussianSet &g, const Camera &cam, const RenderSettings &settings) {
    check_inputs(g, cam, settings);
    const int W = settings.width, H = settings.height, tile = settings.tile;
    const std::int64_t N = g.size();
    const double cutoff = settings.alpha_cutoff;

    RenderOutput out;
    RenderState &st = out.state;
    st.width = W;
    st.height = H;
    st.tiles_x = (W + tile - 1) / tile;
    st.tiles_y = (H + tile - 1) / tile;
    st.num_gaussians = N;
    st.projected.resize(static_cast<std::size_t>(N));

    std::vector<std::uint8_t> degenerate(static_cast<std::size_t>(N), 0);
    parallel_for(N, [&](std::int64_t i) {
        ProjectedGaussian &p = st.projected[static_cast<std::size_t>(i)];
        const Geometry geo = gaussian_geometry(g, i, cam, settings.lowpass);
        if (geo.tcam.z() <= kNearPlane) {
            return;
        }
        const double det = geo.cov2.determinant();
        if (!(det >= kMinCovDeterminant)) {
            degenerate[static_cast<std::size_t>(i)] = 1;
            return;
        }
        p.opacity = g.alpha[i];
        if (p.opacity < cutoff) {
            return;
        }
        const Eigen::Vector3d proj = cam.K * geo.tcam;
        p.mean[0] = proj.x() / proj.z();
        p.mean[1] = proj.y() / proj.z();
        p.conic[0] = geo.cov2(1, 1) / det;
        p.conic[1] = -geo.cov2(0, 1) / det;
        p.conic[2] = geo.cov2(0, 0) / det;
        p.depth = geo.tcam.z();
        eval_color(g, i, geo.dir, p.color);
        // Extent beyond which the splat's alpha falls under the cutoff, never below 3 sigma.
        const double k = std::max(3.0, std::sqrt(2.0 * std::log(p.opacity / cutoff)));
        const double rx = k * std::sqrt(geo.cov2(0, 0));
        const double ry = k * std::sqrt(geo.cov2(1, 1));
        const double x0 = std::max(0.0, std::ceil(p.mean[0] - rx) - 1.0);
        const double y0 = std::max(0.0, std::ceil(p.mean[1] - ry) - 1.0);
        const double x1 = std::min<double>(W - 1, std::floor(p.mean[0] + rx) + 1.0);
        const double y1 = std::min<double>(H - 1, std::floor(p.mean[1] + ry) + 1.0);
        if (!(x0 <= x1 && y0 <= y1)) {
            return;
        }
        p.bbox[0] = static_cast<int>(x0);
        p.bbox[1] = static_cast<int>(y0);
        p.bbox[2] = static_cast<int>(x1);
        p.bbox[3] = static_cast<int>(y1);
        p.visible = true;
    });
    out.degenerate = std::accumulate(degenerate.begin(), degenerate.end(), std::int64_t{0});

    // One global stable sort by depth; binning in that order keeps every tile list sorted.
    std::vector<std::int32_t> order;
    for (std::int64_t i = 0; i < N; ++i) {
        if (st.projected[static_cast<std::size_t>(i)].visible) {
            order.push_back(static_cast<std::int32_t>(i));
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        return st.projected[static_cast<std::size_t>(a)].depth < st.projected[static_cast<std::size_t>(b)].depth;
    });
    st.tile_lists.assign(static_cast<std::size_t>(st.tiles_x * st.tiles_y), {});
    for (auto id : order) {
        const auto &p = st.projected[static_cast<std::size_t>(id)];
        for (int ty = p.bbox[1] / tile; ty <= p.bbox[3] / tile; ++ty) {
            for (int tx = p.bbox[0] / tile; tx <= p.bbox[2] / tile; ++tx) {
                st.tile_lists[static_cast<std::size_t>(ty * st.tiles_x + tx)].push_back(id);
            }
        }
    }

    out.image = Tensor({H, W, 3});
    out.depth = Tensor({H, W});
    out.transmittance = Tensor({H, W});
    st.contrib_end.assign(static_cast<std::size_t>(W * H), 0);
    parallel_for(static_cast<std::int64_t>(st.tile_lists.size()), [&](std::int64_t t) {
        const auto &list = st.tile_lists[static_cast<std::size_t>(t)];
        const int tx = static_cast<int>(t % st.tiles_x), ty = static_cast<int>(t / st.tiles_x);
        for (int py = ty * tile; py < std::min(H, (ty + 1) * tile); ++py) {
            for (int px = tx * tile; px < std::min(W, (tx + 1) * tile); ++px) {
                double T = 1.0, C[3] = {0, 0, 0}, D = 0.0;
                std::int32_t end = 0;
                for (std::size_t j = 0; j < list.size(); ++j) {
                    const auto &p = st.projected[static_cast<std::size_t>(list[j])];
                    const double a = splat_alpha(p, px, py, cutoff);
                    if (a < 0.0) {
                        continue;
                    }
                    const double test_T = T * (1.0 - a);
                    if (test_T < kMinTransmittance) {
                        break;
                    }
                    const double w = a * T;
                    for (int c = 0; c < 3; ++c) {
                        C[c] += p.color[c] * w;
                    }
                    D += p.depth * w;
                    T = test_T;
                    end = static_cast<std::int32_t>(j + 1);
                }
                const std::int64_t pix = static_cast<std::int64_t>(py) * W + px;
                for (int c = 0; c < 3; ++c) {
                    out.image[pix * 3 + c] = static_cast<Real>(C[c] + T * settings.background[static_cast<std::size_t>(c)]);
                }
                out.depth[pix] = static_cast<Real>(D);
                out.transmittance[pix] = static_cast<Real>(T);
                st.contrib_end[static_cast<std::size_t>(pix)] = end;
            }
        }
    });
    out.image.require_finite("render");
    st.transmittance = out.transmittance;
    st.valid = true;
    return out;
}

BruteOutput render_brute(const GaussianSet &g, const Camera &cam, const RenderSettings &settings) {
    check_inputs(g, cam, settings);
    const int W = settings.width, H = settings.height;
    const std::int64_t N = g.size();
    const double cutoff = settings.alpha_cutoff;
    const Eigen::Vector3d campos = -cam.R.transpose() * cam.t;

    struct Splat {
        std::int64_t id;
        double z, u, v, A, B, C, opacity, color[3];
    };
    std::vector<Splat> splats;
    for (std::int64_t i = 0; i < N; ++i) {
        const Eigen::Vector3d mu(g.mu[i * 3], g.mu[i * 3 + 1], g.mu[i * 3 + 2]);
        const Eigen::Vector3d tc = cam.R * mu + cam.t;
        if (tc.z() <= kNearPlane) {
            continue;
        }
        const Eigen::Matrix3d S = covariance(Eigen::Vector4d(g.rot[i * 4], g.rot[i * 4 + 1], g.rot[i * 4 + 2], g.rot[i * 4 + 3]),
                                             Eigen::Vector3d(g.scale[i * 3], g.scale[i * 3 + 1], g.scale[i * 3 + 2]));
        const double z = tc.z();
        Eigen::Matrix<double, 2, 3> J;
        J << cam.K(0, 0) / z, cam.K(0, 1) / z, -(cam.K(0, 0) * tc.x() + cam.K(0, 1) * tc.y()) / (z * z), 0.0,
            cam.K(1, 1) / z, -cam.K(1, 1) * tc.y() / (z * z);
        Eigen::Matrix2d cov = J * cam.R * S * cam.R.transpose() * J.transpose();
        cov(0, 0) += settings.lowpass;
        cov(1, 1) += settings.lowpass;
        const double det = cov.determinant();
        if (!(det >= kMinCovDeterminant)) {
            continue;
        }
        Splat s;
        s.id = i;
        s.z = z;
        s.u = (cam.K(0, 0) * tc.x() + cam.K(0, 1) * tc.y()) / z + cam.K(0, 2);
        s.v = cam.K(1, 1) * tc.y() / z + cam.K(1, 2);
        s.A = cov(1, 1) / det;
        s.B = -cov(0, 1) / det;
        s.C = cov(0, 0) / det;
        s.opacity = g.alpha[i];
        const Eigen::Vector3d dir = (mu - campos).normalized();
        eval_color(g, i, dir, s.color);
        splats.push_back(s);
    }
    std::stable_sort(splats.begin(), splats.end(), [](const Splat &a, const Splat &b) { return a.z < b.z; });

    BruteOutput out{Tensor({H, W, 3}), Tensor({H, W}), Tensor({H, W})};
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            double T = 1.0, C[3] = {0, 0, 0}, D = 0.0;
            for (const auto &s : splats) {
                const double dx = px - s.u, dy = py - s.v;
                const double power = -0.5 * (s.A * dx * dx + s.C * dy * dy) - s.B * dx * dy;
                if (power > 0.0) {
                    continue;
                }
                const double a = std::min(kMaxSplatAlpha, s.opacity * std::exp(power));
                if (a < cutoff) {
                    continue;
                }
                const double next = T * (1.0 - a);
                if (next < kMinTransmittance) {
                    break;
                }
                for (int c = 0; c < 3; ++c) {
                    C[c] += s.color[c] * a * T;
                }
                D += s.z * a * T;
                T = next;
            }
            const std::int64_t pix = static_cast<std::int64_t>(py) * W + px;
            for (int c = 0; c < 3; ++c) {
                out.image[pix * 3 + c] = static_cast<Real>(C[c] + T * settings.background[static_cast<std::size_t>(c)]);
            }
            out.depth[pix] = static_cast<Real>(D);
            out.transmittance[pix] = static_cast<Real>(T);
        }
    }
    return out;
}

namespace {

// Screen-space gradient accumulators for one Gaussian.
struct ScreenGrad {
    double mean[2] = {0, 0};
    double conic[3] = {0, 0, 0};
    double opacity = 0.0;
    double color[3] = {0, 0, 0};
    double depth = 0.0;

    void add(const ScreenGrad &o) {
        for (int k = 0; k < 2; ++k) mean[k] += o.mean[k];
        for (int k = 0; k < 3; ++k) conic[k] += o.conic[k];
        for (int k = 0; k < 3; ++k) color[k] += o.color[k];
        opacity += o.opacity;
        depth += o.depth;
    }
};

// d R(q) / d q_k for a unit quaternion (w, x, y, z).
std::array<Eigen::Matrix3d, 4> rotation_partials(const Eigen::Vector4d &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Eigen::Matrix3d, 4> d;
    d[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    d[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return d;
}

} // namespace

GaussianGrads render_backward(const GaussianSet &g, const Camera &cam, const RenderSettings &settings,
                              const RenderState &st, const Tensor &dL_dimage, const Tensor *dL_ddepth) {
    if (!st.valid) {
        throw ShapeError("render_backward: missing forward state");
    }
    const int W = settings.width, H = settings.height, tile = settings.tile;
    if (st.width != W || st.height != H || st.num_gaussians != g.size() ||
        st.tiles_x != (W + tile - 1) / tile) {
        throw ShapeError("render_backward: forward state does not match the inputs");
    }
    if (dL_dimage.shape() != Shape{H, W, 3}) {
        throw ShapeError("render_backward: image gradient must be HxWx3");
    }
    if (dL_ddepth != nullptr && dL_ddepth->shape() != Shape{H, W}) {
        throw ShapeError("render_backward: depth gradient must be HxW");
    }
    const std::int64_t N = g.size();
    const double cutoff = settings.alpha_cutoff;
    const auto &bg = settings.background;

    // Per-tile partials, reduced afterwards in tile order.
    std::vector<std::vector<ScreenGrad>> partial(st.tile_lists.size());
    parallel_for(static_cast<std::int64_t>(st.tile_lists.size()), [&](std::int64_t t) {
        const auto &list = st.tile_lists[static_cast<std::size_t>(t)];
        auto &acc = partial[static_cast<std::size_t>(t)];
        acc.assign(list.size(), ScreenGrad{});
        const int tx = static_cast<int>(t % st.tiles_x), ty = static_cast<int>(t / st.tiles_x);
        for (int py = ty * tile; py < std::min(H, (ty + 1) * tile); ++py) {
            for (int px = tx * tile; px < std::min(W, (tx + 1) * tile); ++px) {
                const std::int64_t pix = static_cast<std::int64_t>(py) * W + px;
                const double dpix[3] = {dL_dimage[pix * 3], dL_dimage[pix * 3 + 1], dL_dimage[pix * 3 + 2]};
                const double ddep = dL_ddepth != nullptr ? (*dL_ddepth)[pix] : 0.0;
                const double T_final = st.transmittance[pix];
                const double bg_dot = bg[0] * dpix[0] + bg[1] * dpix[1] + bg[2] * dpix[2];
                double T = T_final;
                double accum[3] = {0, 0, 0}, accum_d = 0.0;
                double last_alpha = 0.0, last_color[3] = {0, 0, 0}, last_depth = 0.0;
                for (std::int32_t j = st.contrib_end[static_cast<std::size_t>(pix)]; j-- > 0;) {
                    const auto &p = st.projected[static_cast<std::size_t>(list[static_cast<std::size_t>(j)])];
                    double G = 0.0, dx = 0.0, dy = 0.0;
                    const double a = splat_alpha(p, px, py, cutoff, &G, &dx, &dy);
                    if (a < 0.0) {
                        continue;
                    }
                    T /= (1.0 - a);
                    const double w = a * T;
                    ScreenGrad &sg = acc[static_cast<std::size_t>(j)];
                    double dL_da = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        accum[c] = last_alpha * last_color[c] + (1.0 - last_alpha) * accum[c];
                        last_color[c] = p.color[c];
                        dL_da += (p.color[c] - accum[c]) * dpix[c];
                        sg.color[c] += w * dpix[c];
                    }
                    accum_d = last_alpha * last_depth + (1.0 - last_alpha) * accum_d;
                    last_depth = p.depth;
                    dL_da += (p.depth - accum_d) * ddep;
                    sg.depth += w * ddep;
                    dL_da *= T;
                    last_alpha = a;
                    dL_da += -T_final / (1.0 - a) * bg_dot;

                    if (p.opacity * G >= kMaxSplatAlpha) {
                        continue; // alpha clamp: flat
                    }
                    sg.opacity += G * dL_da;
                    const double dL_dpower = dL_da * p.opacity * G;
                    sg.mean[0] += dL_dpower * (p.conic[0] * dx + p.conic[1] * dy);
                    sg.mean[1] += dL_dpower * (p.conic[2] * dy + p.conic[1] * dx);
                    sg.conic[0] += dL_dpower * (-0.5 * dx * dx);
                    sg.conic[1] += dL_dpower * (-dx * dy);
                    sg.conic[2] += dL_dpower * (-0.5 * dy * dy);
                }
            }
        }
    });

    std::vector<ScreenGrad> screen(static_cast<std::size_t>(N));
    for (std::size_t t = 0; t < st.tile_lists.size(); ++t) {
        const auto &list = st.tile_lists[t];
        for (std::size_t j = 0; j < list.size(); ++j) {
            screen[static_cast<std::size_t>(list[j])].add(partial[t][j]);
        }
    }

    const int B = g.sh_bands();
    GaussianGrads out{Tensor({N, 3}), Tensor({N}), Tensor({N, 3}), Tensor({N, 4}), Tensor({N, 3, B})};
    parallel_for(N, [&](std::int64_t i) {
        const auto &p = st.projected[static_cast<std::size_t>(i)];
        if (!p.visible) {
            return;
        }
        const ScreenGrad &sg = screen[static_cast<std::size_t>(i)];
        const Geometry geo = gaussian_geometry(g, i, cam, settings.lowpass);
        const double tx = geo.tcam.x(), ty = geo.tcam.y(), tz = geo.tcam.z();
        const double a = cam.K(0, 0), s = cam.K(0, 1), f = cam.K(1, 1);

        out.alpha[i] = static_cast<Real>(sg.opacity);

        // SH coefficients and view direction.
        double Y[sh::kMaxBands];
        std::array<double, 3> dY[sh::kMaxBands];
        const double d[3] = {geo.dir.x(), geo.dir.y(), geo.dir.z()};
        sh::eval_basis_grad(B, d, Y, dY);
        Eigen::Vector3d dL_ddir = Eigen::Vector3d::Zero();
        for (int c = 0; c < 3; ++c) {
            for (int k = 0; k < B; ++k) {
                out.sh[(i * 3 + c) * B + k] = static_cast<Real>(sg.color[c] * Y[k]);
                const double coef = g.sh[(i * 3 + c) * B + k];
                for (int e = 0; e < 3; ++e) {
                    dL_ddir[e] += sg.color[c] * coef * dY[k][static_cast<std::size_t>(e)];
                }
            }
        }
        Eigen::Vector3d dL_dmu = Eigen::Vector3d::Zero();
        if (geo.dir_norm > 0.0) {
            dL_dmu += (dL_ddir - geo.dir * geo.dir.dot(dL_ddir)) / geo.dir_norm;
        }

        // Conic -> 2D covariance -> (J, Sigma).
        const double det = geo.cov2.determinant();
        Eigen::Matrix2d Q;
        Q << geo.cov2(1, 1) / det, -geo.cov2(0, 1) / det, -geo.cov2(0, 1) / det, geo.cov2(0, 0) / det;
        Eigen::Matrix2d GQ;
        GQ << sg.conic[0], 0.5 * sg.conic[1], 0.5 * sg.conic[1], sg.conic[2];
        const Eigen::Matrix2d GM = -Q * GQ * Q;
        const Eigen::Matrix<double, 2, 3> T = geo.J * cam.R;
        const Eigen::Matrix3d GSigma = T.transpose() * GM * T;
        const Eigen::Matrix<double, 2, 3> GT = 2.0 * GM * T * geo.Sigma;
        const Eigen::Matrix<double, 2, 3> GJ = GT * cam.R.transpose();

        Eigen::Vector3d dL_dt = Eigen::Vector3d::Zero();
        const double tz2 = tz * tz, tz3 = tz2 * tz;
        dL_dt.x() += -a / tz2 * GJ(0, 2);
        dL_dt.y() += -s / tz2 * GJ(0, 2) - f / tz2 * GJ(1, 2);
        dL_dt.z() += -a / tz2 * GJ(0, 0) - s / tz2 * GJ(0, 1) + 2.0 * (a * tx + s * ty) / tz3 * GJ(0, 2) -
                     f / tz2 * GJ(1, 1) + 2.0 * f * ty / tz3 * GJ(1, 2);
        // Projected mean.
        dL_dt.x() += a / tz * sg.mean[0];
        dL_dt.y() += s / tz * sg.mean[0] + f / tz * sg.mean[1];
        dL_dt.z() += -(a * tx + s * ty) / tz2 * sg.mean[0] - f * ty / tz2 * sg.mean[1];
        dL_dt.z() += sg.depth;
        dL_dmu += cam.R.transpose() * dL_dt;
        for (int e = 0; e < 3; ++e) {
            out.mu[i * 3 + e] = static_cast<Real>(dL_dmu[e]);
        }

        // Sigma = M M^T with M = R(q) diag(s).
        const Eigen::Vector4d qraw = quat_of(g, i);
        const double qnorm = qraw.norm();
        const Eigen::Vector4d qn = qraw / qnorm;
        const Eigen::Matrix3d Rq = quaternion_to_rotation(qn);
        const Eigen::Vector3d sc = vec3_of(g.scale, i);
        const Eigen::Matrix3d M = Rq * sc.asDiagonal();
        const Eigen::Matrix3d GMm = 2.0 * GSigma * M;
        for (int k = 0; k < 3; ++k) {
            out.scale[i * 3 + k] = static_cast<Real>(GMm.col(k).dot(Rq.col(k)));
        }
        const Eigen::Matrix3d GR = GMm * sc.asDiagonal();
        const auto dR = rotation_partials(qn);
        Eigen::Vector4d gq;
        for (int k = 0; k < 4; ++k) {
            gq[k] = (GR.array() * dR[static_cast<std::size_t>(k)].array()).sum();
        }
        const Eigen::Vector4d gq_raw = (gq - qn * qn.dot(gq)) / qnorm;
        for (int k = 0; k < 4; ++k) {
            out.rot[i * 4 + k] = static_cast<Real>(gq_raw[k]);
        }
    });
    return out;
}

} // namespace monosplat
