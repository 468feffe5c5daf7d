// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/synthscene/scene.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "monosplat/numerics/parallel.hpp"

namespace MONOSPLAT_NS {

namespace {

constexpr double kRayEpsilon = 1e-9;
constexpr int kMaxAttempts = 100;

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

SolidTexture random_texture(std::mt19937_64 &rng, double max_freq) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    SolidTexture t;
    for (int c = 0; c < 3; ++c) {
        t.base[static_cast<std::size_t>(c)] = 0.35 + 0.3 * u(rng);
        for (int k = 0; k < 4; ++k) {
            SolidTexture::Wave w;
            const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
            w.omega = dir * (2.0 * std::numbers::pi * max_freq * (0.3 + 0.7 * u(rng)));
            w.phase = 2.0 * std::numbers::pi * u(rng);
            w.amplitude = 0.06 + 0.04 * u(rng);
            t.waves[static_cast<std::size_t>(c)].push_back(w);
        }
    }
    return t;
}

double intersect_plane(const ScenePlane &p, const Eigen::Vector3d &o, const Eigen::Vector3d &d) {
    const double denom = p.normal.dot(d);
    if (std::abs(denom) < 1e-12) {
        return -1.0;
    }
    const double t = p.normal.dot(p.center - o) / denom;
    if (t <= kRayEpsilon) {
        return -1.0;
    }
    if (p.half_extent > 0.0) {
        const Eigen::Vector3d q = o + t * d - p.center;
        const Eigen::Vector3d v = p.normal.cross(p.axis_u);
        if (std::abs(q.dot(p.axis_u)) > p.half_extent || std::abs(q.dot(v)) > p.half_extent) {
            return -1.0;
        }
    }
    return t;
}

double intersect_sphere(const SceneSphere &s, const Eigen::Vector3d &o, const Eigen::Vector3d &d) {
    const Eigen::Vector3d oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) {
        return -1.0;
    }
    const double sq = std::sqrt(disc);
    // numerically stable pair of roots
    const double q = b > 0.0 ? -(b + sq) : -(b - sq);
    double t0 = q, t1 = q != 0.0 ? c / q : -b;
    if (t0 > t1) {
        std::swap(t0, t1);
    }
    if (t0 > kRayEpsilon) {
        return t0;
    }
    return t1 > kRayEpsilon ? t1 : -1.0;
}

} // namespace

void SceneSpec::validate() const {
    range.validate();
    if (width < 1 || height < 1 || views < 1 || !(focal > 0.0)) {
        throw GeometryError("scene spec: width, height, views and focal must be positive");
    }
    if (planes < 0 || spheres < 0 || planes + spheres == 0) {
        throw GeometryError("scene spec: at least one primitive required");
    }
    if (!(depth_min > 0.0 && depth_max > depth_min) || depth_min < range.near || depth_max > range.far) {
        throw GeometryError("scene spec: need near <= depth_min < depth_max <= far");
    }
    if (!(baseline_min >= 0.0 && baseline_max >= baseline_min)) {
        throw GeometryError("scene spec: need 0 <= baseline_min <= baseline_max");
    }
    if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) {
        throw GeometryError("scene spec: min_coverage must lie in [0, 1]");
    }
}

SceneSpec parse_scene_spec(const std::string &text) {
    SceneSpec s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw GeometryError("scene spec line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        std::istringstream value(trim(line.substr(eq + 1)));
        auto read = [&](auto &dst) {
            if (!(value >> dst)) {
                throw GeometryError("scene spec line " + std::to_string(lineno) + ": bad value for '" + key + "'");
            }
        };
        if (key == "width") read(s.width);
        else if (key == "height") read(s.height);
        else if (key == "views") read(s.views);
        else if (key == "focal") read(s.focal);
        else if (key == "planes") read(s.planes);
        else if (key == "spheres") read(s.spheres);
        else if (key == "depth_min") read(s.depth_min);
        else if (key == "depth_max") read(s.depth_max);
        else if (key == "baseline_min") read(s.baseline_min);
        else if (key == "baseline_max") read(s.baseline_max);
        else if (key == "near") read(s.range.near);
        else if (key == "far") read(s.range.far);
        else if (key == "min_coverage") read(s.min_coverage);
        else if (key == "background") {
            read(s.background[0]);
            read(s.background[1]);
            read(s.background[2]);
        } else {
            throw GeometryError("scene spec line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        std::string rest;
        if (value >> rest) {
            throw GeometryError("scene spec line " + std::to_string(lineno) + ": trailing text '" + rest + "'");
        }
    }
    s.validate();
    return s;
}

SceneSpec read_scene_spec(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw GeometryError("cannot open scene spec " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene_spec(ss.str());
}

std::string format_scene_spec(const SceneSpec &s) {
    std::ostringstream o;
    o.precision(17);
    o << "width = " << s.width << "\nheight = " << s.height << "\nviews = " << s.views << "\nfocal = " << s.focal
      << "\nplanes = " << s.planes << "\nspheres = " << s.spheres << "\ndepth_min = " << s.depth_min
      << "\ndepth_max = " << s.depth_max << "\nbaseline_min = " << s.baseline_min
      << "\nbaseline_max = " << s.baseline_max << "\nnear = " << s.range.near << "\nfar = " << s.range.far
      << "\nmin_coverage = " << s.min_coverage << "\nbackground = " << s.background[0] << ' ' << s.background[1]
      << ' ' << s.background[2] << '\n';
    return o.str();
}

Eigen::Vector3d SolidTexture::color(const Eigen::Vector3d &p) const {
    Eigen::Vector3d c;
    for (int k = 0; k < 3; ++k) {
        double v = base[static_cast<std::size_t>(k)];
        for (const auto &w : waves[static_cast<std::size_t>(k)]) {
            v += w.amplitude * std::sin(w.omega.dot(p) + w.phase);
        }
        c[k] = v;
    }
    return c;
}

double SolidTexture::max_frequency() const {
    double m = 0.0;
    for (const auto &ch : waves) {
        for (const auto &w : ch) {
            m = std::max(m, w.omega.norm());
        }
    }
    return m;
}

RayHit cast_ray(const SyntheticScene &scene, const Eigen::Vector3d &origin, const Eigen::Vector3d &dir) {
    RayHit best;
    double best_t = std::numeric_limits<double>::infinity();
    const SolidTexture *tex = nullptr;
    Eigen::Vector3d local_origin;
    for (const auto &p : scene.planes) {
        const double t = intersect_plane(p, origin, dir);
        if (t > 0.0 && t < best_t) {
            best_t = t;
            tex = &p.texture;
            local_origin = p.center;
        }
    }
    for (const auto &s : scene.spheres) {
        const double t = intersect_sphere(s, origin, dir);
        if (t > 0.0 && t < best_t) {
            best_t = t;
            tex = &s.texture;
            local_origin = s.center;
        }
    }
    if (tex != nullptr) {
        best.hit = true;
        best.t = best_t;
        best.point = origin + best_t * dir;
        best.color = tex->color(best.point - local_origin);
    }
    return best;
}

RayHit cast_pixel(const SyntheticScene &scene, const Camera &cam, const Eigen::Vector2d &pixel) {
    const Eigen::Vector3d d_cam = cam.K.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
    const Eigen::Vector3d d = (cam.R.transpose() * d_cam).normalized();
    return cast_ray(scene, cam.center(), d);
}

double RaytraceOutput::coverage() const {
    if (hit.empty()) {
        return 0.0;
    }
    std::size_t n = 0;
    for (auto h : hit) {
        n += h;
    }
    return static_cast<double>(n) / static_cast<double>(hit.size());
}

RaytraceOutput raytrace(const SyntheticScene &scene, const Camera &cam) {
    const std::int64_t H = cam.height, W = cam.width;
    RaytraceOutput out;
    out.image = Tensor({H, W, 3});
    out.depth = Tensor({H, W});
    out.hit.assign(static_cast<std::size_t>(H * W), 0);
    const Eigen::Vector3d view_z = cam.R.row(2).transpose();
    parallel_for(H, [&](std::int64_t y) {
        for (std::int64_t x = 0; x < W; ++x) {
            const std::int64_t p = y * W + x;
            const RayHit h = cast_pixel(scene, cam, Eigen::Vector2d(static_cast<double>(x), static_cast<double>(y)));
            for (int c = 0; c < 3; ++c) {
                out.image[p * 3 + c] =
                    static_cast<Real>(h.hit ? h.color[c] : scene.spec.background[static_cast<std::size_t>(c)]);
            }
            if (h.hit) {
                out.depth[p] = static_cast<Real>(view_z.dot(h.point - cam.center()));
                out.hit[static_cast<std::size_t>(p)] = 1;
            }
        }
    });
    return out;
}

Tensor truth_depth(const SyntheticScene &scene, int view) {
    if (view < 0 || view >= static_cast<int>(scene.cameras.size())) {
        throw GeometryError("truth_depth: no view " + std::to_string(view));
    }
    return raytrace(scene, scene.cameras[static_cast<std::size_t>(view)]).depth;
}

SyntheticScene generate_scene(const SceneSpec &spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // periods of at least six pixels at the far end of the primitive range
    const double max_freq = spec.focal / (6.0 * spec.depth_max);
    const double mid = 0.5 * (spec.depth_min + spec.depth_max);
    const double half_fov = 0.5 * std::min(spec.width, spec.height) / spec.focal;

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        SyntheticScene s;
        s.spec = spec;
        double x = 0.0;
        std::vector<double> xs{0.0};
        for (int v = 1; v < spec.views; ++v) {
            x += spec.baseline_min + (spec.baseline_max - spec.baseline_min) * u(rng);
            xs.push_back(x);
        }
        const double shift = 0.5 * x;
        for (double cx : xs) {
            const Eigen::Vector3d eye(cx - shift, 0.05 * (u(rng) - 0.5) * (spec.baseline_max + 1e-3), 0.0);
            s.cameras.push_back(look_at(spec.focal, spec.width, spec.height, eye, Eigen::Vector3d(0, 0, mid)));
        }
        for (int p = 0; p < spec.planes; ++p) {
            ScenePlane pl;
            if (p == 0) {
                pl.center = Eigen::Vector3d(0, 0, spec.depth_max);
                pl.normal = Eigen::Vector3d(0, 0, -1);
                pl.axis_u = Eigen::Vector3d::UnitX();
                pl.half_extent = 0.0;
            } else {
                const double z = spec.depth_min + (spec.depth_max - spec.depth_min) * u(rng);
                const double r = half_fov * z;
                pl.center = Eigen::Vector3d(r * (u(rng) - 0.5), r * (u(rng) - 0.5), z);
                const Eigen::AngleAxisd tilt(0.6 * (u(rng) - 0.5), Eigen::Vector3d(u(rng) - 0.5, u(rng) - 0.5, 0).normalized());
                pl.normal = tilt * Eigen::Vector3d(0, 0, -1);
                pl.axis_u = (tilt * Eigen::Vector3d::UnitX()).normalized();
                pl.half_extent = r * (0.2 + 0.3 * u(rng));
            }
            pl.texture = random_texture(rng, max_freq);
            s.planes.push_back(pl);
        }
        for (int k = 0; k < spec.spheres; ++k) {
            SceneSphere sp;
            const double z = spec.depth_min + (spec.depth_max - spec.depth_min) * u(rng);
            const double r = half_fov * z;
            sp.radius = std::min(r * (0.15 + 0.25 * u(rng)), 0.45 * (z - spec.range.near));
            sp.center = Eigen::Vector3d(r * 1.2 * (u(rng) - 0.5), r * 1.2 * (u(rng) - 0.5), z);
            sp.texture = random_texture(rng, max_freq);
            s.spheres.push_back(sp);
        }
        bool ok = true;
        for (const auto &cam : s.cameras) {
            const auto rt = raytrace(s, cam);
            bool in_range = true;
            for (std::int64_t i = 0; i < rt.depth.size(); ++i) {
                if (rt.hit[static_cast<std::size_t>(i)] != 0 &&
                    !(rt.depth[i] >= spec.range.near && rt.depth[i] <= spec.range.far)) {
                    in_range = false;
                }
            }
            if (rt.coverage() < spec.min_coverage || !in_range) {
                ok = false;
                break;
            }
        }
        if (ok) {
            return s;
        }
    }
    throw GeometryError("scene generation: coverage below " + std::to_string(spec.min_coverage) + " after " +
                        std::to_string(kMaxAttempts) + " attempts");
}

} // namespace monosplat
