// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a fixed primitive vocabulary. A Tape
// records every primitive applied during a forward pass; backward() replays
// them in reverse creation order and accumulates into trainable Parameters.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "monosplat/numerics/tensor.hpp"

namespace MONOSPLAT_NS {

class Tape;

enum class OpKind {
    Constant,
    Parameter,
    Add,
    Mul,
    MatMul,
    Conv2d,
    BilinearSample,
    SoftmaxLast,
    Concat,
    Slice,
    Reshape,
    Relu,
    Sigmoid,
    Exp,
    Normalize,
    Clamp,
    Sum,
    WeightedSum,
    WeightedSumLast,
    Opaque, // recorded value without a gradient rule
};

const char *op_name(OpKind op);

/// Handle to a node on a Tape.
struct Var {
    Tape *tape = nullptr;
    std::size_t id = 0;

    const Tensor &value() const;
    const Shape &shape() const { return value().shape(); }
    std::int64_t dim(std::int64_t axis) const { return value().dim(axis); }
    bool requires_grad() const;
};

class Tape {
  public:
    using BackwardFn = std::function<void(Tape &, std::size_t self)>;

    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    Var constant(Tensor value);
    /// Frozen parameters enter the graph as constants.
    Var parameter(Parameter &p);
    /// A value produced outside the vocabulary. backward() refuses to
    /// differentiate through it when it depends on trainable inputs.
    Var opaque(Tensor value, const std::vector<Var> &inputs);

    Var push(OpKind op, Tensor value, const std::vector<Var> &inputs, BackwardFn fn);

    /// Reverse pass from a scalar node. Accumulates into Parameter::grad.
    void backward(Var loss);

    const Tensor &value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, allocated on first use.
    Tensor &grad(std::size_t id);
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty() || nodes_[id].value.size() == 0; }
    const std::vector<std::size_t> &inputs(std::size_t id) const { return nodes_[id].inputs; }
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        OpKind op = OpKind::Constant;
        BackwardFn backward;
        Parameter *param = nullptr;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

/// Validity-tagged result of bilinear sampling.
struct Sampled {
    Var value;
    std::vector<std::uint8_t> valid; // one flag per output pixel
};

namespace ad {

// Elementwise with numpy-style broadcasting (right-aligned, extent-1 axes).
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, Real s);
Var add_scalar(Var a, Real s);

/// a[..., k] x b[k, m] -> [..., m]; with transpose_b, b is [m, k].
Var matmul(Var a, Var b, bool transpose_b = false);
/// x[H, W, Ci], weight[k, k, Ci, Co], bias[Co]; zero padding.
Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
/// Bilinear sampling of src[H, W, C] at coords[H', W', 2] = (x, y) in pixels.
/// Differentiable in src only; out-of-range coords clamp to the border.
Sampled bilinear_sample(Var src, const Tensor &coords);
/// Resample src to [out_h, out_w] with pixel centers aligned:
/// x_src = (x_dst + 0.5) * (w / out_w) - 0.5.
Var resize_bilinear(Var src, std::int64_t out_h, std::int64_t out_w);

Var softmax_last(Var x);
Var concat(const std::vector<Var> &xs, std::int64_t axis);
Var slice(Var x, std::int64_t axis, std::int64_t begin, std::int64_t end);
Var reshape(Var x, Shape shape);
Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
/// x * sigmoid(x), composed from primitives.
Var silu(Var x);
/// L2-normalize slices along the last axis.
Var normalize(Var x, Real eps = 1e-12f);
Var clamp(Var x, Real lo, Real hi);

Var sum(Var x);
Var mean(Var x);
/// Sum(w * x) for a constant w of the same shape as x.
Var weighted_sum(Var x, const Tensor &w);
/// Contracts the last axis against constant weights w[D]: [..., D] -> [...].
Var weighted_sum_last(Var x, const Tensor &w);

/// mean((a - b)^2)
Var mse(Var a, Var b);

} // namespace ad

// Non-tape versions of the exported operations.
struct SampleResult {
    Tensor value;
    std::vector<std::uint8_t> valid;
};
SampleResult bilinear_sample(const Tensor &src, const Tensor &coords);
Tensor softmax_last(const Tensor &x);

} // namespace monosplat
