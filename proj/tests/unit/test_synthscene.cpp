// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>

#include "monosplat/synthscene/scene.hpp"

using namespace monosplat;

namespace {

SyntheticScene single_plane(double depth) {
    SyntheticScene s;
    ScenePlane p;
    p.center = Eigen::Vector3d(0, 0, depth);
    p.normal = Eigen::Vector3d(0, 0, -1);
    s.planes.push_back(p);
    s.cameras.push_back(make_camera(20.0, 24, 16));
    return s;
}

} // namespace

TEST(SceneSpec, ParsesAndRoundTrips) {
    const SceneSpec s = parse_scene_spec("# toy\nwidth = 16\nheight=16\nviews = 3 # trailing comment\n"
                                         "focal = 16\nspheres = 1\nbackground = 0.1 0.2 0.3\n");
    EXPECT_EQ(s.width, 16);
    EXPECT_EQ(s.views, 3);
    EXPECT_EQ(s.spheres, 1);
    EXPECT_EQ(s.background[2], 0.3);
    const SceneSpec r = parse_scene_spec(format_scene_spec(s));
    EXPECT_EQ(format_scene_spec(r), format_scene_spec(s));
}

TEST(SceneSpec, RejectsBadInput) {
    EXPECT_THROW(parse_scene_spec("colour = 3\n"), GeometryError);
    EXPECT_THROW(parse_scene_spec("width = abc\n"), GeometryError);
    EXPECT_THROW(parse_scene_spec("width 3\n"), GeometryError);
    EXPECT_THROW(parse_scene_spec("width = 3 4\n"), GeometryError);
    EXPECT_THROW(parse_scene_spec("planes = 0\nspheres = 0\n"), GeometryError);
    EXPECT_THROW(parse_scene_spec("depth_min = 9\ndepth_max = 8\n"), GeometryError);
}

TEST(SceneGenerate, DeterministicForSeed) {
    SceneSpec spec;
    spec.width = spec.height = 32;
    spec.focal = 32;
    spec.planes = 2;
    const auto a = generate_scene(spec, 5), b = generate_scene(spec, 5), c = generate_scene(spec, 6);
    const auto ra = raytrace(a, a.cameras[1]), rb = raytrace(b, b.cameras[1]), rc = raytrace(c, c.cameras[1]);
    EXPECT_TRUE(ra.image == rb.image);
    EXPECT_TRUE(ra.depth == rb.depth);
    EXPECT_FALSE(ra.image == rc.image);
}

TEST(SceneGenerate, CoverageAndDepthRange) {
    SceneSpec spec;
    spec.width = spec.height = 32;
    spec.focal = 32;
    spec.views = 3;
    spec.planes = 0;
    spec.spheres = 4;
    spec.min_coverage = 0.05;
    const auto s = generate_scene(spec, 11);
    ASSERT_EQ(s.cameras.size(), 3u);
    for (std::size_t v = 0; v < s.cameras.size(); ++v) {
        const auto rt = raytrace(s, s.cameras[v]);
        EXPECT_GE(rt.coverage(), 0.05);
        for (std::int64_t i = 0; i < rt.depth.size(); ++i) {
            if (rt.hit[static_cast<std::size_t>(i)]) {
                EXPECT_GE(rt.depth[i], spec.range.near);
                EXPECT_LE(rt.depth[i], spec.range.far);
            }
        }
    }
    const double x01 = (s.cameras[1].center() - s.cameras[0].center()).norm();
    EXPECT_GE(x01, spec.baseline_min - 1e-3);
    EXPECT_LE(x01, spec.baseline_max + 1e-3);
}

TEST(SceneGenerate, UnsatisfiableCoverageThrows) {
    SceneSpec spec;
    spec.width = spec.height = 8;
    spec.focal = 8;
    spec.planes = 0;
    spec.spheres = 1;
    spec.min_coverage = 1.0;
    EXPECT_THROW(generate_scene(spec, 1), GeometryError);
}

TEST(Raytrace, EmptySceneShowsBackground) {
    SyntheticScene s;
    s.spec.background = {0.25, 0.5, 0.75};
    const auto rt = raytrace(s, make_camera(10.0, 6, 5));
    for (std::int64_t p = 0; p < 30; ++p) {
        EXPECT_FLOAT_EQ(rt.image[p * 3], 0.25f);
        EXPECT_FLOAT_EQ(rt.image[p * 3 + 2], 0.75f);
        EXPECT_EQ(rt.depth[p], 0.0);
    }
    EXPECT_EQ(rt.coverage(), 0.0);
}

TEST(Raytrace, FrontoParallelPlaneHasConstantDepth) {
    const auto s = single_plane(3.5);
    const Tensor d = truth_depth(s, 0);
    for (Real v : d.values()) {
        EXPECT_NEAR(v, 3.5, 1e-6);
    }
    EXPECT_THROW(truth_depth(s, 1), GeometryError);
}

TEST(Raytrace, EdgeOnPlaneMissesGrazingRow) {
    SyntheticScene s;
    ScenePlane p;
    p.center = Eigen::Vector3d(0, 1, 0);
    p.normal = Eigen::Vector3d(0, 1, 0);
    s.planes.push_back(p);
    const Camera cam = make_camera(10.0, 9, 9);
    const auto rt = raytrace(s, cam);
    // row 4 runs parallel to the floor, rows above it look away from it
    for (std::int64_t y = 0; y < 9; ++y) {
        for (std::int64_t x = 0; x < 9; ++x) {
            EXPECT_EQ(rt.hit[static_cast<std::size_t>(y * 9 + x)], y > 4 ? 1 : 0) << y << "," << x;
        }
    }
}

TEST(Raytrace, SphereDepthMatchesIntersectionOracle) {
    SyntheticScene s;
    SceneSphere sp;
    sp.center = Eigen::Vector3d(0.3, -0.2, 6.0);
    sp.radius = 1.7;
    s.spheres.push_back(sp);
    const Camera cam = look_at(30.0, 40, 32, Eigen::Vector3d(0.5, 0.1, -0.4), Eigen::Vector3d(0.2, -0.1, 6.0));
    s.cameras.push_back(cam);
    const Tensor d = truth_depth(s, 0);
    // Oracle in the camera frame: depth z = lambda for the ray (u, v, 1) * lambda.
    const Eigen::Vector3d c = cam.R * sp.center + cam.t;
    int hits = 0;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 40; ++x) {
            const Eigen::Vector3d r = cam.K.inverse() * Eigen::Vector3d(x, y, 1.0);
            const double A = r.squaredNorm(), B = -2.0 * r.dot(c), C = c.squaredNorm() - sp.radius * sp.radius;
            const double disc = B * B - 4 * A * C;
            const double got = d[y * 40 + x];
            if (disc < 0) {
                EXPECT_EQ(got, 0.0);
                continue;
            }
            const double z = (-B - std::sqrt(disc)) / (2 * A);
            EXPECT_NEAR(got, z, 1e-6 * z);
            ++hits;
        }
    }
    EXPECT_GT(hits, 100);
}

TEST(Raytrace, TwoViewPhotometricConsistency) {
    SceneSpec spec;
    spec.width = spec.height = 48;
    spec.focal = 48;
    spec.planes = 3;
    spec.spheres = 3;
    const auto s = generate_scene(spec, 21);
    const Camera &A = s.cameras[0], &B = s.cameras[1];
    const auto ra = raytrace(s, A);
    int covisible = 0, consistent = 0;
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            const auto p = static_cast<std::size_t>(y * 48 + x);
            if (!ra.hit[p]) {
                continue;
            }
            const RayHit ha = cast_pixel(s, A, Eigen::Vector2d(x, y));
            const auto proj = project(B, ha.point);
            if (proj.depth <= 0 || proj.pixel.x() < 0 || proj.pixel.y() < 0 || proj.pixel.x() > 47 ||
                proj.pixel.y() > 47) {
                continue;
            }
            const RayHit hb = cast_pixel(s, B, proj.pixel);
            if (!hb.hit || (hb.point - ha.point).norm() > 1e-6 * (1.0 + ha.t)) {
                continue; // occluded in B
            }
            ++covisible;
            consistent += (hb.color - ha.color).cwiseAbs().maxCoeff() <= 2.0 / 255.0 ? 1 : 0;
        }
    }
    ASSERT_GT(covisible, 1000);
    EXPECT_GE(consistent, 0.95 * covisible);
}

TEST(Raytrace, TexturesAreBandLimited) {
    SceneSpec spec;
    spec.width = spec.height = 32;
    spec.focal = 32;
    const auto s = generate_scene(spec, 3);
    const double limit = 2.0 * 3.14159265358979 * spec.focal / (6.0 * spec.depth_max);
    for (const auto &p : s.planes) {
        EXPECT_LE(p.texture.max_frequency(), limit + 1e-9);
    }
    for (const auto &sp : s.spheres) {
        EXPECT_LE(sp.texture.max_frequency(), limit + 1e-9);
    }
}
