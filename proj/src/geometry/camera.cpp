// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/geometry/camera.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace MONOSPLAT_NS {

void Camera::validate() const {
    const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho >= 1e-5 || std::abs(R.determinant() - 1.0) > 1e-5) {
        throw GeometryError("camera rotation is not orthonormal with det 1");
    }
    if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
        throw GeometryError("camera intrinsics must be upper-triangular with K[2][2] = 1");
    }
    if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
        throw GeometryError("camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw GeometryError("camera resolution must be positive");
    }
    if (!K.allFinite() || !R.allFinite() || !t.allFinite()) {
        throw GeometryError("camera contains non-finite values");
    }
}

Camera Camera::scaled(double factor) const {
    Camera c = *this;
    c.K(0, 0) /= factor;
    c.K(0, 1) /= factor;
    c.K(1, 1) /= factor;
    c.K(0, 2) = (c.K(0, 2) + 0.5) / factor - 0.5;
    c.K(1, 2) = (c.K(1, 2) + 0.5) / factor - 0.5;
    c.width = static_cast<int>(std::lround(width / factor));
    c.height = static_cast<int>(std::lround(height / factor));
    return c;
}

Camera Camera::transformed(const Eigen::Matrix3d &Rg, const Eigen::Vector3d &tg) const {
    // x = Rg^T (y - tg)  =>  R x + t = (R Rg^T) y + (t - R Rg^T tg)
    Camera c = *this;
    c.R = R * Rg.transpose();
    c.t = t - c.R * tg;
    return c;
}

void DepthRange::validate() const {
    if (!(near > 0.0) || !(near < far)) {
        throw GeometryError("depth range requires 0 < near < far");
    }
}

Projection project(const Camera &cam, const Eigen::Vector3d &x) {
    const Eigen::Vector3d xc = cam.R * x + cam.t;
    if (xc.z() <= 1e-8) {
        throw GeometryError("point is behind the camera");
    }
    const Eigen::Vector3d p = cam.K * xc;
    return {Eigen::Vector2d(p.x() / p.z(), p.y() / p.z()), xc.z()};
}

Eigen::Vector3d unproject(const Camera &cam, const Eigen::Vector2d &pixel, double depth) {
    if (!(depth > 0.0)) {
        throw GeometryError("unproject requires a positive depth");
    }
    const Eigen::Vector3d ray = cam.K.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
    return cam.R.transpose() * (ray * depth - cam.t);
}

WarpGrid plane_sweep_coords(const Camera &ref, const Camera &src, double d, int grid_w, int grid_h) {
    if (!(d > 0.0)) {
        throw GeometryError("plane depth must be positive");
    }
    if (grid_w <= 0 || grid_h <= 0) {
        throw GeometryError("warp grid must be non-empty");
    }
    // x_src ~ K_s (R_s R_r^T (d K_r^-1 p - t_r) + t_s) = H p + e
    const Eigen::Matrix3d Rrel = src.R * ref.R.transpose();
    const Eigen::Matrix3d A = src.K * Rrel * ref.K.inverse() * d;
    const Eigen::Vector3d b = src.K * (src.t - Rrel * ref.t);
    WarpGrid g{Tensor({grid_h, grid_w, 2}), std::vector<std::uint8_t>(static_cast<std::size_t>(grid_w * grid_h), 1)};
    for (int y = 0; y < grid_h; ++y) {
        for (int x = 0; x < grid_w; ++x) {
            const Eigen::Vector3d q = A * Eigen::Vector3d(x, y, 1.0) + b;
            const auto idx = static_cast<std::size_t>(y * grid_w + x);
            if (q.z() <= 1e-8) {
                g.valid[idx] = 0;
                g.coords.at(y, x, 0) = -1.0f;
                g.coords.at(y, x, 1) = -1.0f;
                continue;
            }
            g.coords.at(y, x, 0) = static_cast<Real>(q.x() / q.z());
            g.coords.at(y, x, 1) = static_cast<Real>(q.y() / q.z());
        }
    }
    return g;
}

std::vector<int> nearest_views(const std::vector<Camera> &cams, int i, int count) {
    const int n = static_cast<int>(cams.size());
    if (i < 0 || i >= n) {
        throw GeometryError("view index out of range");
    }
    if (count < 0 || count >= n) {
        throw GeometryError("neighbor count must be below the number of views");
    }
    const Eigen::Vector3d c = cams[static_cast<std::size_t>(i)].center();
    std::vector<int> order;
    for (int j = 0; j < n; ++j) {
        if (j != i) {
            order.push_back(j);
        }
    }
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        dist[static_cast<std::size_t>(j)] = (cams[static_cast<std::size_t>(j)].center() - c).norm();
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)]; });
    order.resize(static_cast<std::size_t>(count));
    return order;
}

namespace {

Eigen::Matrix3d mat3(const nlohmann::json &j, const char *key) {
    const auto &a = j.at(key);
    if (!a.is_array() || a.size() != 9) {
        throw GeometryError(std::string("camera field '") + key + "' must hold 9 numbers");
    }
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            m(r, c) = a.at(static_cast<std::size_t>(r * 3 + c)).get<double>();
        }
    }
    return m;
}

Camera camera_from_json(const nlohmann::json &j) {
    Camera cam;
    cam.K = mat3(j, "K");
    cam.R = mat3(j, "R");
    const auto &t = j.at("t");
    if (!t.is_array() || t.size() != 3) {
        throw GeometryError("camera field 't' must hold 3 numbers");
    }
    cam.t = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.validate();
    return cam;
}

nlohmann::json camera_to_json(const Camera &c) {
    nlohmann::json j;
    std::vector<double> K, R;
    for (int r = 0; r < 3; ++r) {
        for (int k = 0; k < 3; ++k) {
            K.push_back(c.K(r, k));
            R.push_back(c.R(r, k));
        }
    }
    j["K"] = K;
    j["R"] = R;
    j["t"] = std::vector<double>{c.t.x(), c.t.y(), c.t.z()};
    j["width"] = c.width;
    j["height"] = c.height;
    return j;
}

} // namespace

std::vector<Camera> parse_cameras(const std::string &text) {
    std::vector<Camera> cams;
    try {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            cams.push_back(camera_from_json(nlohmann::json::parse(line)));
        }
    } catch (const nlohmann::json::exception &e) {
        throw GeometryError(std::string("bad camera file: ") + e.what());
    }
    if (cams.empty()) {
        throw GeometryError("camera file holds no views");
    }
    return cams;
}

std::string format_cameras(const std::vector<Camera> &cams) {
    std::string out;
    for (const auto &c : cams) {
        out += camera_to_json(c).dump();
        out += '\n';
    }
    return out;
}

std::vector<Camera> read_cameras(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw GeometryError("cannot open camera file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_cameras(ss.str());
}

void write_cameras(const std::filesystem::path &path, const std::vector<Camera> &cams) {
    std::ofstream out(path);
    if (!out) {
        throw GeometryError("cannot write camera file " + path.string());
    }
    out << format_cameras(cams);
}

Camera make_camera(double focal, int width, int height, const Eigen::Matrix3d &R, const Eigen::Vector3d &t) {
    Camera c;
    c.K << focal, 0, (width - 1) / 2.0, 0, focal, (height - 1) / 2.0, 0, 0, 1;
    c.R = R;
    c.t = t;
    c.width = width;
    c.height = height;
    return c;
}

Camera look_at(double focal, int width, int height, const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
               const Eigen::Vector3d &up) {
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = z.cross(up);
    if (x.norm() < 1e-9) {
        x = z.cross(Eigen::Vector3d(0, 0, 1));
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d R;
    R.row(0) = x.transpose();
    R.row(1) = y.transpose();
    R.row(2) = z.transpose();
    return make_camera(focal, width, height, R, -R * eye);
}

} // namespace monosplat
