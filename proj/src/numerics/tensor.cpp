// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace MONOSPLAT_NS {

std::int64_t numel(const Shape &shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) {
            throw ShapeError("negative extent in shape " + to_string(shape));
        }
        n *= d;
    }
    return n;
}

std::string to_string(const Shape &shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

std::int64_t Tensor::dim(std::int64_t axis) const {
    if (axis < 0) {
        axis += rank();
    }
    if (axis < 0 || axis >= rank()) {
        throw ShapeError("axis out of range for shape " + to_string(shape_));
    }
    return shape_[static_cast<std::size_t>(axis)];
}

Real Tensor::item() const {
    if (data_.size() != 1) {
        throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
    }
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (numel(shape) != size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

void Tensor::require_finite(const std::string &what) const {
    if (!all_finite()) {
        throw NumericError(what + ": non-finite value");
    }
}

Real max_abs_diff(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    Real m = 0.0f;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace monosplat
