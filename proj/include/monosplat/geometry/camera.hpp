// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole cameras with a world->camera pose: x_cam = R * x_world + t.
// Pixel centers sit at integer coordinates.
#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Camera {
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    int width = 0;
    int height = 0;

    /// Throws GeometryError when R is not a rotation or K is not a valid intrinsic matrix.
    void validate() const;
    Eigen::Vector3d center() const { return -R.transpose() * t; }
    /// Intrinsics for a grid downsampled by `factor`, where each coarse pixel
    /// center sits at the center of its factor x factor block.
    Camera scaled(double factor) const;
    /// Rigid transform applied to the scene: returns the camera observing T(x) = Rg*x + tg
    /// exactly as this one observes x.
    Camera transformed(const Eigen::Matrix3d &Rg, const Eigen::Vector3d &tg) const;
};

struct DepthRange {
    double near = 0.5;
    double far = 100.0;

    void validate() const;
};

struct Projection {
    Eigen::Vector2d pixel;
    double depth = 0.0;
};

Projection project(const Camera &cam, const Eigen::Vector3d &x);
Eigen::Vector3d unproject(const Camera &cam, const Eigen::Vector2d &pixel, double depth);

/// Source-view pixel coordinates for every reference-grid pixel back-projected
/// to depth `d`. Points behind the source camera get valid = 0.
struct WarpGrid {
    Tensor coords; // [grid_h, grid_w, 2] as (x, y)
    std::vector<std::uint8_t> valid;
};
WarpGrid plane_sweep_coords(const Camera &ref, const Camera &src, double d, int grid_w, int grid_h);

/// Indices of the `count` cameras whose centers are closest to view `i`;
/// ties go to the lower index.
std::vector<int> nearest_views(const std::vector<Camera> &cams, int i, int count);

/// One JSON object per line: {"K": [9], "R": [9], "t": [3], "width": w, "height": h}.
std::vector<Camera> read_cameras(const std::filesystem::path &path);
void write_cameras(const std::filesystem::path &path, const std::vector<Camera> &cams);
std::vector<Camera> parse_cameras(const std::string &text);
std::string format_cameras(const std::vector<Camera> &cams);

Camera make_camera(double focal, int width, int height, const Eigen::Matrix3d &R = Eigen::Matrix3d::Identity(),
                   const Eigen::Vector3d &t = Eigen::Vector3d::Zero());
/// Camera at world position `eye` looking at `target` (camera y axis points down).
Camera look_at(double focal, int width, int height, const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
               const Eigen::Vector3d &up = Eigen::Vector3d(0, -1, 0));

} // namespace monosplat
