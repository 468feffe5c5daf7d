// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Procedural scenes of textured planes and spheres with analytic depth, and
// a ray caster that renders them independently of the splatting renderer.
#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "monosplat/geometry/camera.hpp"

namespace MONOSPLAT_NS {

struct SceneSpec {
    int width = 64;
    int height = 64;
    int views = 2;
    double focal = 64.0;
    int planes = 1;  // the first plane is an unbounded backdrop
    int spheres = 2;
    double depth_min = 3.0;
    double depth_max = 8.0;
    double baseline_min = 0.2;
    double baseline_max = 0.5;
    DepthRange range{0.5, 100.0};
    std::array<double, 3> background{0.0, 0.0, 0.0};
    double min_coverage = 0.5;

    void validate() const;
};

/// `key = value` lines; `#` starts a comment; unknown keys are errors.
SceneSpec parse_scene_spec(const std::string &text);
SceneSpec read_scene_spec(const std::filesystem::path &path);
std::string format_scene_spec(const SceneSpec &spec);

/// Sum of sinusoids over object-local 3D coordinates, per color channel.
struct SolidTexture {
    struct Wave {
        Eigen::Vector3d omega;
        double phase = 0.0;
        double amplitude = 0.0;
    };
    std::array<double, 3> base{0.5, 0.5, 0.5};
    std::array<std::vector<Wave>, 3> waves;

    Eigen::Vector3d color(const Eigen::Vector3d &p) const;
    /// Largest |omega| over all waves.
    double max_frequency() const;
};

struct ScenePlane {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
    double half_extent = 0.0; // <= 0 for unbounded
    SolidTexture texture;
};

struct SceneSphere {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 1.0;
    SolidTexture texture;
};

struct SyntheticScene {
    SceneSpec spec;
    std::vector<ScenePlane> planes;
    std::vector<SceneSphere> spheres;
    std::vector<Camera> cameras;
};

/// Deterministic for (spec, seed). Retries until every camera has at least
/// spec.min_coverage of its pixels on geometry; throws GeometryError after
/// 100 attempts.
SyntheticScene generate_scene(const SceneSpec &spec, std::uint64_t seed);

struct RayHit {
    bool hit = false;
    double t = 0.0; // ray parameter along the unit direction
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

RayHit cast_ray(const SyntheticScene &scene, const Eigen::Vector3d &origin, const Eigen::Vector3d &dir);
/// Ray through an arbitrary (sub-pixel) image position.
RayHit cast_pixel(const SyntheticScene &scene, const Camera &cam, const Eigen::Vector2d &pixel);

struct RaytraceOutput {
    Tensor image; // [H, W, 3]
    Tensor depth; // [H, W] view-space z, 0 where nothing is hit
    std::vector<std::uint8_t> hit;
    double coverage() const;
};

RaytraceOutput raytrace(const SyntheticScene &scene, const Camera &cam);
Tensor truth_depth(const SyntheticScene &scene, int view);

} // namespace monosplat
