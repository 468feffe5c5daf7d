// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "monosplat/config.hpp"

namespace MONOSPLAT_NS {

using Shape = std::vector<std::int64_t>;

/// Thrown when a tensor or an operation produces NaN/Inf.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown for shape, arity and precondition violations.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

std::int64_t numel(const Shape &shape);
std::string to_string(const Shape &shape);

/// Dense row-major array of 32-bit reals.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = 0.0f);
    Tensor(Shape shape, std::vector<Real> data);

    static Tensor scalar(Real v) { return Tensor(Shape{}, std::vector<Real>{v}); }
    static Tensor zeros_like(const Tensor &t) { return Tensor(t.shape()); }
    /// The single element of a one-element tensor.
    Real item() const;

    const Shape &shape() const { return shape_; }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(std::int64_t axis) const;
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    Real *data() { return data_.data(); }
    const Real *data() const { return data_.data(); }
    std::span<Real> values() { return data_; }
    std::span<const Real> values() const { return data_; }
    std::vector<Real> &storage() { return data_; }
    const std::vector<Real> &storage() const { return data_; }

    Real &operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    Real operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // HWC accessors, valid for rank-3 tensors.
    Real &at(std::int64_t y, std::int64_t x, std::int64_t c) {
        return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }
    Real at(std::int64_t y, std::int64_t x, std::int64_t c) const {
        return data_[static_cast<std::size_t>((y * shape_[1] + x) * shape_[2] + c)];
    }

    Tensor reshaped(Shape shape) const;
    void fill(Real v);
    bool all_finite() const;
    /// Throws NumericError naming `what` when any element is NaN/Inf.
    void require_finite(const std::string &what) const;

    bool operator==(const Tensor &o) const { return shape_ == o.shape_ && data_ == o.data_; }

  private:
    Shape shape_;
    std::vector<Real> data_;
};

/// A model weight. Frozen parameters never receive gradient updates.
struct Parameter {
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(Tensor v, bool is_trainable) : value(std::move(v)), grad(value.shape()), trainable(is_trainable) {}

    void zero_grad() { grad = Tensor(value.shape()); }
};

Real max_abs_diff(const Tensor &a, const Tensor &b);

} // namespace monosplat
