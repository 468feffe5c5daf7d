// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/numerics/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <memory>
#include <cmath>
#include <numeric>

namespace MONOSPLAT_NS {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

Tape &same_tape(std::initializer_list<Var> vars) {
    Tape *t = nullptr;
    for (const auto &v : vars) {
        if (v.tape == nullptr) {
            throw ShapeError("variable is not attached to a tape");
        }
        if (t != nullptr && t != v.tape) {
            throw ShapeError("variables live on different tapes");
        }
        t = v.tape;
    }
    return *t;
}

Tensor checked(Tensor t, OpKind op) {
    if (!t.all_finite()) {
        throw NumericError(std::string(op_name(op)) + ": non-finite output");
    }
    return t;
}

std::int64_t normalize_axis(std::int64_t axis, std::int64_t rank) {
    if (axis < 0) {
        axis += rank;
    }
    if (axis < 0 || axis >= rank) {
        throw ShapeError("axis out of range");
    }
    return axis;
}

// Broadcast bookkeeping for binary elementwise ops.
struct Broadcast {
    Shape out;
    std::vector<std::int64_t> a_index;
    std::vector<std::int64_t> b_index;
    bool same = false;
};

Broadcast make_broadcast(const Shape &a, const Shape &b) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        bc.same = true;
        return bc;
    }
    const std::size_t rank = std::max(a.size(), b.size());
    Shape ap(rank, 1), bp(rank, 1);
    std::copy(a.begin(), a.end(), ap.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
    std::copy(b.begin(), b.end(), bp.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
    bc.out.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (ap[i] != bp[i] && ap[i] != 1 && bp[i] != 1) {
            throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
        }
        bc.out[i] = ap[i] == 1 ? bp[i] : ap[i];
    }
    const std::int64_t n = numel(bc.out);
    std::vector<std::int64_t> as(rank), bs(rank);
    std::int64_t sa = 1, sb = 1;
    for (std::size_t i = rank; i-- > 0;) {
        as[i] = ap[i] == 1 ? 0 : sa;
        bs[i] = bp[i] == 1 ? 0 : sb;
        sa *= ap[i];
        sb *= bp[i];
    }
    bc.a_index.resize(static_cast<std::size_t>(n));
    bc.b_index.resize(static_cast<std::size_t>(n));
    std::vector<std::int64_t> counter(rank, 0);
    std::int64_t ia = 0, ib = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        bc.a_index[static_cast<std::size_t>(i)] = ia;
        bc.b_index[static_cast<std::size_t>(i)] = ib;
        for (std::size_t d = rank; d-- > 0;) {
            ++counter[d];
            ia += as[d];
            ib += bs[d];
            if (counter[d] < bc.out[d]) {
                break;
            }
            ia -= as[d] * counter[d];
            ib -= bs[d] * counter[d];
            counter[d] = 0;
        }
    }
    return bc;
}

void accumulate(Tensor &dst, const Tensor &src) {
    Real *d = dst.data();
    const Real *s = src.data();
    for (std::int64_t i = 0; i < dst.size(); ++i) {
        d[i] += s[i];
    }
}

// Reduces a broadcast gradient back onto an operand of `size` elements.
void scatter_reduce(Tensor &dst, const std::vector<double> &acc) {
    for (std::int64_t i = 0; i < dst.size(); ++i) {
        dst[i] += static_cast<Real>(acc[static_cast<std::size_t>(i)]);
    }
}

struct Im2col {
    std::int64_t H, W, Ci, k, stride, pad, Ho, Wo;

    std::int64_t cols() const { return k * k * Ci; }

    // Fills rows [r0, r1) of the patch matrix.
    void fill(const Real *x, std::int64_t r0, std::int64_t r1, Real *out) const {
        const std::int64_t nc = cols();
        for (std::int64_t r = r0; r < r1; ++r) {
            const std::int64_t oy = r / Wo, ox = r % Wo;
            Real *row = out + (r - r0) * nc;
            for (std::int64_t ky = 0; ky < k; ++ky) {
                const std::int64_t iy = oy * stride - pad + ky;
                for (std::int64_t kx = 0; kx < k; ++kx) {
                    const std::int64_t ix = ox * stride - pad + kx;
                    Real *dst = row + (ky * k + kx) * Ci;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
                        std::fill(dst, dst + Ci, 0.0f);
                    } else {
                        const Real *src = x + (iy * W + ix) * Ci;
                        std::copy(src, src + Ci, dst);
                    }
                }
            }
        }
    }

    void scatter(const Real *cols_grad, std::int64_t r0, std::int64_t r1, Real *dx) const {
        const std::int64_t nc = cols();
        for (std::int64_t r = r0; r < r1; ++r) {
            const std::int64_t oy = r / Wo, ox = r % Wo;
            const Real *row = cols_grad + (r - r0) * nc;
            for (std::int64_t ky = 0; ky < k; ++ky) {
                const std::int64_t iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= H) {
                    continue;
                }
                for (std::int64_t kx = 0; kx < k; ++kx) {
                    const std::int64_t ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) {
                        continue;
                    }
                    const Real *src = row + (ky * k + kx) * Ci;
                    Real *dst = dx + (iy * W + ix) * Ci;
                    for (std::int64_t c = 0; c < Ci; ++c) {
                        dst[c] += src[c];
                    }
                }
            }
        }
    }

    std::int64_t chunk_rows() const { return std::max<std::int64_t>(1, (std::int64_t{1} << 22) / std::max<std::int64_t>(1, cols())); }
};

struct BilinearTap {
    std::int64_t i00, i01, i10, i11;
    Real w00, w01, w10, w11;
};

BilinearTap bilinear_tap(Real x, Real y, std::int64_t H, std::int64_t W, std::uint8_t &valid) {
    constexpr Real eps = 1e-4f;
    valid = (x >= -eps && x <= static_cast<Real>(W - 1) + eps && y >= -eps && y <= static_cast<Real>(H - 1) + eps) ? 1 : 0;
    x = std::clamp(x, Real(0), static_cast<Real>(W - 1));
    y = std::clamp(y, Real(0), static_cast<Real>(H - 1));
    const auto x0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(x)), W - 1);
    const auto y0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(y)), H - 1);
    const auto x1 = std::min<std::int64_t>(x0 + 1, W - 1);
    const auto y1 = std::min<std::int64_t>(y0 + 1, H - 1);
    const Real fx = x - static_cast<Real>(x0);
    const Real fy = y - static_cast<Real>(y0);
    return {y0 * W + x0, y0 * W + x1, y1 * W + x0, y1 * W + x1,
            (1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
}

void check_sample_args(const Tensor &src, const Tensor &coords) {
    if (src.rank() != 3 || src.size() == 0) {
        throw ShapeError("bilinear_sample: src must be a non-empty HxWxC tensor, got " + to_string(src.shape()));
    }
    if (coords.rank() != 3 || coords.dim(2) != 2) {
        throw ShapeError("bilinear_sample: coords must be H'xW'x2, got " + to_string(coords.shape()));
    }
    if (!coords.all_finite()) {
        throw NumericError("bilinear_sample: non-finite coordinates");
    }
}

std::vector<BilinearTap> sample_taps(const Tensor &src, const Tensor &coords, std::vector<std::uint8_t> &valid) {
    const std::int64_t n = coords.dim(0) * coords.dim(1);
    std::vector<BilinearTap> taps(static_cast<std::size_t>(n));
    valid.assign(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        taps[static_cast<std::size_t>(i)] =
            bilinear_tap(coords[2 * i], coords[2 * i + 1], src.dim(0), src.dim(1), valid[static_cast<std::size_t>(i)]);
    }
    return taps;
}

Tensor apply_taps(const Tensor &src, const Tensor &coords, const std::vector<BilinearTap> &taps) {
    const std::int64_t C = src.dim(2);
    Tensor out({coords.dim(0), coords.dim(1), C});
    const Real *s = src.data();
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const auto &t = taps[i];
        Real *o = out.data() + static_cast<std::int64_t>(i) * C;
        for (std::int64_t c = 0; c < C; ++c) {
            o[c] = t.w00 * s[t.i00 * C + c] + t.w01 * s[t.i01 * C + c] + t.w10 * s[t.i10 * C + c] +
                   t.w11 * s[t.i11 * C + c];
        }
    }
    return out;
}

void softmax_rows(const Real *x, Real *y, std::int64_t rows, std::int64_t D) {
    std::vector<double> e(static_cast<std::size_t>(D));
    for (std::int64_t r = 0; r < rows; ++r) {
        const Real *xr = x + r * D;
        Real *yr = y + r * D;
        const Real m = *std::max_element(xr, xr + D);
        double s = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
            e[static_cast<std::size_t>(d)] = std::exp(static_cast<double>(xr[d]) - m);
            s += e[static_cast<std::size_t>(d)];
        }
        for (std::int64_t d = 0; d < D; ++d) {
            yr[d] = static_cast<Real>(e[static_cast<std::size_t>(d)] / s);
        }
    }
}

} // namespace

const char *op_name(OpKind op) {
    switch (op) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::BilinearSample: return "bilinear_sample";
    case OpKind::SoftmaxLast: return "softmax_last";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Reshape: return "reshape";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Normalize: return "normalize";
    case OpKind::Clamp: return "clamp";
    case OpKind::Sum: return "sum";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::WeightedSumLast: return "weighted_sum_last";
    case OpKind::Opaque: return "opaque";
    }
    return "unknown";
}

const Tensor &Var::value() const { return tape->value(id); }

bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.op = OpKind::Constant;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter &p) {
    Node n;
    n.value = p.value;
    n.op = OpKind::Parameter;
    n.param = &p;
    n.requires_grad = p.trainable;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::opaque(Tensor value, const std::vector<Var> &inputs) {
    Node n;
    n.value = std::move(value);
    n.op = OpKind::Opaque;
    for (const auto &v : inputs) {
        n.inputs.push_back(v.id);
        n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::push(OpKind op, Tensor value, const std::vector<Var> &inputs, BackwardFn fn) {
    Node n;
    n.value = checked(std::move(value), op);
    n.op = op;
    for (const auto &v : inputs) {
        if (v.tape != this) {
            throw ShapeError(std::string(op_name(op)) + ": input from another tape");
        }
        n.inputs.push_back(v.id);
        n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    if (n.requires_grad) {
        n.backward = std::move(fn);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Tensor &Tape::grad(std::size_t id) {
    auto &n = nodes_[id];
    if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) {
        throw ShapeError("backward: loss from another tape");
    }
    if (nodes_[loss.id].value.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " + to_string(nodes_[loss.id].value.shape()));
    }
    if (!nodes_[loss.id].requires_grad) {
        return;
    }
    for (auto &n : nodes_) {
        n.grad = Tensor();
    }
    grad(loss.id)[0] = 1.0f;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node &n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) {
            continue;
        }
        if (n.op == OpKind::Parameter) {
            if (n.param->grad.shape() != n.param->value.shape()) {
                n.param->zero_grad();
            }
            accumulate(n.param->grad, n.grad);
            continue;
        }
        if (!n.backward) {
            throw ShapeError(std::string("backward: unsupported primitive '") + op_name(n.op) + "' in graph");
        }
        n.backward(*this, id);
    }
}

namespace ad {

Var add(Var a, Var b) {
    Tape &t = same_tape({a, b});
    const Tensor &av = a.value();
    const Tensor &bv = b.value();
    auto bc = std::make_shared<Broadcast>(make_broadcast(av.shape(), bv.shape()));
    Tensor out(bc->out);
    if (bc->same) {
        for (std::int64_t i = 0; i < out.size(); ++i) {
            out[i] = av[i] + bv[i];
        }
    } else {
        for (std::int64_t i = 0; i < out.size(); ++i) {
            out[i] = av[bc->a_index[i]] + bv[bc->b_index[i]];
        }
    }
    return t.push(OpKind::Add, std::move(out), {a, b}, [bc](Tape &tp, std::size_t self) {
        const Tensor &g = tp.grad(self);
        const auto in = tp.inputs(self);
        for (int k = 0; k < 2; ++k) {
            if (!tp.requires_grad(in[k])) {
                continue;
            }
            Tensor &gi = tp.grad(in[k]);
            if (bc->same) {
                accumulate(gi, g);
            } else {
                const auto &idx = k == 0 ? bc->a_index : bc->b_index;
                std::vector<double> acc(static_cast<std::size_t>(gi.size()), 0.0);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                    acc[static_cast<std::size_t>(idx[i])] += g[i];
                }
                scatter_reduce(gi, acc);
            }
        }
    });
}

Var mul(Var a, Var b) {
    Tape &t = same_tape({a, b});
    const Tensor &av = a.value();
    const Tensor &bv = b.value();
    auto bc = std::make_shared<Broadcast>(make_broadcast(av.shape(), bv.shape()));
    Tensor out(bc->out);
    if (bc->same) {
        for (std::int64_t i = 0; i < out.size(); ++i) {
            out[i] = av[i] * bv[i];
        }
    } else {
        for (std::int64_t i = 0; i < out.size(); ++i) {
            out[i] = av[bc->a_index[i]] * bv[bc->b_index[i]];
        }
    }
    return t.push(OpKind::Mul, std::move(out), {a, b}, [bc](Tape &tp, std::size_t self) {
        const Tensor &g = tp.grad(self);
        const auto in = tp.inputs(self);
        const Tensor &av = tp.value(in[0]);
        const Tensor &bv = tp.value(in[1]);
        for (int k = 0; k < 2; ++k) {
            if (!tp.requires_grad(in[k])) {
                continue;
            }
            Tensor &gi = tp.grad(in[k]);
            const Tensor &other = k == 0 ? bv : av;
            if (bc->same) {
                for (std::int64_t i = 0; i < g.size(); ++i) {
                    gi[i] += g[i] * other[i];
                }
            } else {
                const auto &idx = k == 0 ? bc->a_index : bc->b_index;
                const auto &oidx = k == 0 ? bc->b_index : bc->a_index;
                std::vector<double> acc(static_cast<std::size_t>(gi.size()), 0.0);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                    acc[static_cast<std::size_t>(idx[i])] += static_cast<double>(g[i]) * other[oidx[i]];
                }
                scatter_reduce(gi, acc);
            }
        }
    });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0f)); }

Var scale(Var a, Real s) { return mul(a, a.tape->constant(Tensor::scalar(s))); }

Var add_scalar(Var a, Real s) { return add(a, a.tape->constant(Tensor::scalar(s))); }

Var matmul(Var a, Var b, bool transpose_b) {
    Tape &t = same_tape({a, b});
    const Tensor &av = a.value();
    const Tensor &bv = b.value();
    if (av.rank() < 1 || bv.rank() != 2) {
        throw ShapeError("matmul: expected a[..., k] and rank-2 b, got " + to_string(av.shape()) + " and " +
                         to_string(bv.shape()));
    }
    const std::int64_t k = av.dim(-1);
    const std::int64_t n = av.size() / std::max<std::int64_t>(k, 1);
    const std::int64_t bk = transpose_b ? bv.dim(1) : bv.dim(0);
    const std::int64_t m = transpose_b ? bv.dim(0) : bv.dim(1);
    if (bk != k) {
        throw ShapeError("matmul: inner extents differ, " + to_string(av.shape()) + " vs " + to_string(bv.shape()));
    }
    Shape os = av.shape();
    os.back() = m;
    Tensor out(os);
    ConstRowMap A(av.data(), n, k);
    RowMap C(out.data(), n, m);
    if (transpose_b) {
        ConstRowMap B(bv.data(), m, k);
        C.noalias() = A * B.transpose();
    } else {
        ConstRowMap B(bv.data(), k, m);
        C.noalias() = A * B;
    }
    return t.push(OpKind::MatMul, std::move(out), {a, b}, [n, k, m, transpose_b](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        ConstRowMap G(tp.grad(self).data(), n, m);
        ConstRowMap A(tp.value(in[0]).data(), n, k);
        const Real *bdata = tp.value(in[1]).data();
        if (tp.requires_grad(in[0])) {
            RowMap GA(tp.grad(in[0]).data(), n, k);
            if (transpose_b) {
                GA.noalias() += G * ConstRowMap(bdata, m, k);
            } else {
                GA.noalias() += G * ConstRowMap(bdata, k, m).transpose();
            }
        }
        if (tp.requires_grad(in[1])) {
            if (transpose_b) {
                RowMap GB(tp.grad(in[1]).data(), m, k);
                GB.noalias() += G.transpose() * A;
            } else {
                RowMap GB(tp.grad(in[1]).data(), k, m);
                GB.noalias() += A.transpose() * G;
            }
        }
    });
}

Var conv2d(Var x, Var weight, Var bias, int stride, int pad) {
    Tape &t = same_tape({x, weight, bias});
    const Tensor &xv = x.value();
    const Tensor &wv = weight.value();
    const Tensor &bv = bias.value();
    if (xv.rank() != 3 || wv.rank() != 4 || wv.dim(0) != wv.dim(1) || wv.dim(2) != xv.dim(2) || bv.rank() != 1 ||
        bv.dim(0) != wv.dim(3) || stride < 1 || pad < 0) {
        throw ShapeError("conv2d: incompatible shapes x" + to_string(xv.shape()) + " w" + to_string(wv.shape()) + " b" +
                         to_string(bv.shape()));
    }
    Im2col g{xv.dim(0), xv.dim(1), xv.dim(2), wv.dim(0), stride, pad, 0, 0};
    g.Ho = (g.H + 2 * pad - g.k) / stride + 1;
    g.Wo = (g.W + 2 * pad - g.k) / stride + 1;
    if (g.Ho < 1 || g.Wo < 1) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }
    const std::int64_t Co = wv.dim(3);
    const std::int64_t nc = g.cols();
    Tensor out({g.Ho, g.Wo, Co});
    ConstRowMap Wm(wv.data(), nc, Co);
    const std::int64_t rows = g.Ho * g.Wo;
    const std::int64_t chunk = g.chunk_rows();
    std::vector<Real> cols(static_cast<std::size_t>(std::min(chunk, rows) * nc));
    for (std::int64_t r0 = 0; r0 < rows; r0 += chunk) {
        const std::int64_t r1 = std::min(rows, r0 + chunk);
        g.fill(xv.data(), r0, r1, cols.data());
        ConstRowMap Cm(cols.data(), r1 - r0, nc);
        RowMap O(out.data() + r0 * Co, r1 - r0, Co);
        O.noalias() = Cm * Wm;
        O.rowwise() += Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>>(bv.data(), Co);
    }
    return t.push(OpKind::Conv2d, std::move(out), {x, weight, bias}, [g, Co](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Tensor &gout = tp.grad(self);
        const Tensor &xv = tp.value(in[0]);
        const std::int64_t nc = g.cols();
        const std::int64_t rows = g.Ho * g.Wo;
        const std::int64_t chunk = g.chunk_rows();
        const bool gx = tp.requires_grad(in[0]);
        const bool gw = tp.requires_grad(in[1]);
        const bool gb = tp.requires_grad(in[2]);
        ConstRowMap Wm(tp.value(in[1]).data(), nc, Co);
        std::vector<Real> cols(static_cast<std::size_t>(std::min(chunk, rows) * nc));
        for (std::int64_t r0 = 0; r0 < rows; r0 += chunk) {
            const std::int64_t r1 = std::min(rows, r0 + chunk);
            ConstRowMap G(gout.data() + r0 * Co, r1 - r0, Co);
            if (gw) {
                g.fill(xv.data(), r0, r1, cols.data());
                ConstRowMap Cm(cols.data(), r1 - r0, nc);
                RowMap GW(tp.grad(in[1]).data(), nc, Co);
                GW.noalias() += Cm.transpose() * G;
            }
            if (gb) {
                Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> GB(tp.grad(in[2]).data(), Co);
                GB += G.colwise().sum();
            }
            if (gx) {
                RowMap Cg(cols.data(), r1 - r0, nc);
                Cg.noalias() = G * Wm.transpose();
                g.scatter(cols.data(), r0, r1, tp.grad(in[0]).data());
            }
        }
    });
}

Sampled bilinear_sample(Var src, const Tensor &coords) {
    Tape &t = same_tape({src});
    check_sample_args(src.value(), coords);
    Sampled result;
    auto taps = std::make_shared<std::vector<BilinearTap>>(sample_taps(src.value(), coords, result.valid));
    Tensor out = apply_taps(src.value(), coords, *taps);
    const std::int64_t C = src.value().dim(2);
    result.value = t.push(OpKind::BilinearSample, std::move(out), {src}, [taps, C](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real *g = tp.grad(self).data();
        Real *gs = tp.grad(in[0]).data();
        for (std::size_t i = 0; i < taps->size(); ++i) {
            const auto &tap = (*taps)[i];
            const Real *gi = g + static_cast<std::int64_t>(i) * C;
            for (std::int64_t c = 0; c < C; ++c) {
                gs[tap.i00 * C + c] += tap.w00 * gi[c];
                gs[tap.i01 * C + c] += tap.w01 * gi[c];
                gs[tap.i10 * C + c] += tap.w10 * gi[c];
                gs[tap.i11 * C + c] += tap.w11 * gi[c];
            }
        }
    });
    return result;
}

Var resize_bilinear(Var src, std::int64_t out_h, std::int64_t out_w) {
    const Tensor &v = src.value();
    if (v.rank() != 3) {
        throw ShapeError("resize_bilinear: expected HxWxC");
    }
    if (v.dim(0) == out_h && v.dim(1) == out_w) {
        return src;
    }
    const Real sx = static_cast<Real>(v.dim(1)) / static_cast<Real>(out_w);
    const Real sy = static_cast<Real>(v.dim(0)) / static_cast<Real>(out_h);
    Tensor coords({out_h, out_w, 2});
    for (std::int64_t y = 0; y < out_h; ++y) {
        for (std::int64_t x = 0; x < out_w; ++x) {
            coords.at(y, x, 0) = (static_cast<Real>(x) + Real(0.5)) * sx - Real(0.5);
            coords.at(y, x, 1) = (static_cast<Real>(y) + Real(0.5)) * sy - Real(0.5);
        }
    }
    return bilinear_sample(src, coords).value;
}

Var softmax_last(Var x) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    if (xv.rank() < 1 || xv.dim(-1) < 1) {
        throw ShapeError("softmax_last: empty last axis");
    }
    if (!xv.all_finite()) {
        throw NumericError("softmax_last: non-finite input");
    }
    const std::int64_t D = xv.dim(-1);
    const std::int64_t rows = xv.size() / D;
    Tensor out(xv.shape());
    softmax_rows(xv.data(), out.data(), rows, D);
    return t.push(OpKind::SoftmaxLast, std::move(out), {x}, [rows, D](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real *y = tp.value(self).data();
        const Real *g = tp.grad(self).data();
        Real *gx = tp.grad(in[0]).data();
        for (std::int64_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::int64_t d = 0; d < D; ++d) {
                dot += static_cast<double>(g[r * D + d]) * y[r * D + d];
            }
            for (std::int64_t d = 0; d < D; ++d) {
                gx[r * D + d] += static_cast<Real>(y[r * D + d] * (g[r * D + d] - dot));
            }
        }
    });
}

Var concat(const std::vector<Var> &xs, std::int64_t axis) {
    if (xs.empty()) {
        throw ShapeError("concat: no inputs");
    }
    Tape &t = *xs.front().tape;
    const Shape &first = xs.front().shape();
    axis = normalize_axis(axis, static_cast<std::int64_t>(first.size()));
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t d = 0; d < axis; ++d) {
        outer *= first[static_cast<std::size_t>(d)];
    }
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < first.size(); ++d) {
        inner *= first[d];
    }
    auto extents = std::make_shared<std::vector<std::int64_t>>();
    std::int64_t total = 0;
    for (const auto &v : xs) {
        if (v.tape != &t) {
            throw ShapeError("concat: inputs on different tapes");
        }
        const Shape &s = v.shape();
        if (s.size() != first.size()) {
            throw ShapeError("concat: rank mismatch");
        }
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (static_cast<std::int64_t>(d) != axis && s[d] != first[d]) {
                throw ShapeError("concat: extent mismatch " + to_string(s) + " vs " + to_string(first));
            }
        }
        extents->push_back(s[static_cast<std::size_t>(axis)]);
        total += s[static_cast<std::size_t>(axis)];
    }
    Shape os = first;
    os[static_cast<std::size_t>(axis)] = total;
    Tensor out(os);
    for (std::int64_t o = 0; o < outer; ++o) {
        std::int64_t off = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const std::int64_t block = (*extents)[i] * inner;
            const Real *src = xs[i].value().data() + o * block;
            std::copy(src, src + block, out.data() + o * total * inner + off);
            off += block;
        }
    }
    return t.push(OpKind::Concat, std::move(out), xs, [extents, outer, inner, total](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real *g = tp.grad(self).data();
        std::int64_t off = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const std::int64_t block = (*extents)[i] * inner;
            if (tp.requires_grad(in[i])) {
                Real *gi = tp.grad(in[i]).data();
                for (std::int64_t o = 0; o < outer; ++o) {
                    const Real *src = g + o * total * inner + off;
                    for (std::int64_t j = 0; j < block; ++j) {
                        gi[o * block + j] += src[j];
                    }
                }
            }
            off += block;
        }
    });
}

Var slice(Var x, std::int64_t axis, std::int64_t begin, std::int64_t end) {
    Tape &t = same_tape({x});
    const Shape &s = x.shape();
    axis = normalize_axis(axis, static_cast<std::int64_t>(s.size()));
    const std::int64_t extent = s[static_cast<std::size_t>(axis)];
    if (begin < 0 || end > extent || begin >= end) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for extent " +
                         std::to_string(extent));
    }
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t d = 0; d < axis; ++d) {
        outer *= s[static_cast<std::size_t>(d)];
    }
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < s.size(); ++d) {
        inner *= s[d];
    }
    Shape os = s;
    os[static_cast<std::size_t>(axis)] = end - begin;
    Tensor out(os);
    const std::int64_t block = (end - begin) * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
        const Real *src = x.value().data() + (o * extent + begin) * inner;
        std::copy(src, src + block, out.data() + o * block);
    }
    return t.push(OpKind::Slice, std::move(out), {x}, [outer, inner, extent, begin, block](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real *g = tp.grad(self).data();
        Real *gx = tp.grad(in[0]).data();
        for (std::int64_t o = 0; o < outer; ++o) {
            Real *dst = gx + (o * extent + begin) * inner;
            for (std::int64_t j = 0; j < block; ++j) {
                dst[j] += g[o * block + j];
            }
        }
    });
}

Var reshape(Var x, Shape shape) {
    Tape &t = same_tape({x});
    Tensor out = x.value().reshaped(std::move(shape));
    return t.push(OpKind::Reshape, std::move(out), {x}, [](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Tensor &g = tp.grad(self);
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i];
        }
    });
}

namespace {

template <typename Fwd, typename Deriv> Var unary(Var x, OpKind op, Fwd fwd, Deriv deriv) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        out[i] = fwd(xv[i]);
    }
    return t.push(op, std::move(out), {x}, [deriv](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Tensor &xv = tp.value(in[0]);
        const Tensor &y = tp.value(self);
        const Tensor &g = tp.grad(self);
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * deriv(xv[i], y[i]);
        }
    });
}

Real stable_sigmoid(Real v) {
    if (v >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-v));
    }
    const Real e = std::exp(v);
    return e / (1.0f + e);
}

} // namespace

Var relu(Var x) {
    return unary(x, OpKind::Relu, [](Real v) { return v > 0.0f ? v : 0.0f; },
                 [](Real v, Real) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var sigmoid(Var x) {
    return unary(x, OpKind::Sigmoid, stable_sigmoid, [](Real, Real y) { return y * (1.0f - y); });
}

Var exp(Var x) {
    return unary(x, OpKind::Exp, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

Var silu(Var x) { return mul(x, sigmoid(x)); }

Var clamp(Var x, Real lo, Real hi) {
    if (!(lo < hi)) {
        throw ShapeError("clamp: lo must be below hi");
    }
    return unary(x, OpKind::Clamp, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
                 [lo, hi](Real v, Real) { return (v > lo && v < hi) ? 1.0f : 0.0f; });
}

Var normalize(Var x, Real eps) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    const std::int64_t D = xv.dim(-1);
    const std::int64_t rows = xv.size() / D;
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    Tensor out(xv.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
            s += static_cast<double>(xv[r * D + d]) * xv[r * D + d];
        }
        const double n = std::max(std::sqrt(s), static_cast<double>(eps));
        (*norms)[static_cast<std::size_t>(r)] = n;
        for (std::int64_t d = 0; d < D; ++d) {
            out[r * D + d] = static_cast<Real>(xv[r * D + d] / n);
        }
    }
    return t.push(OpKind::Normalize, std::move(out), {x}, [norms, rows, D, eps](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Tensor &y = tp.value(self);
        const Tensor &g = tp.grad(self);
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t r = 0; r < rows; ++r) {
            const double n = (*norms)[static_cast<std::size_t>(r)];
            if (n <= eps) {
                for (std::int64_t d = 0; d < D; ++d) {
                    gx[r * D + d] += static_cast<Real>(g[r * D + d] / n);
                }
                continue;
            }
            double dot = 0.0;
            for (std::int64_t d = 0; d < D; ++d) {
                dot += static_cast<double>(g[r * D + d]) * y[r * D + d];
            }
            for (std::int64_t d = 0; d < D; ++d) {
                gx[r * D + d] += static_cast<Real>((g[r * D + d] - y[r * D + d] * dot) / n);
            }
        }
    });
}

Var sum(Var x) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        s += xv[i];
    }
    return t.push(OpKind::Sum, Tensor::scalar(static_cast<Real>(s)), {x}, [](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real g = tp.grad(self)[0];
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t i = 0; i < gx.size(); ++i) {
            gx[i] += g;
        }
    });
}

Var mean(Var x) {
    const auto n = x.value().size();
    if (n == 0) {
        throw ShapeError("mean: empty tensor");
    }
    Tensor w(x.shape(), 1.0f / static_cast<Real>(n));
    return weighted_sum(x, w);
}

Var weighted_sum(Var x, const Tensor &w) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    if (w.shape() != xv.shape()) {
        throw ShapeError("weighted_sum: weight shape " + to_string(w.shape()) + " differs from " + to_string(xv.shape()));
    }
    double s = 0.0;
    for (std::int64_t i = 0; i < xv.size(); ++i) {
        s += static_cast<double>(w[i]) * xv[i];
    }
    return t.push(OpKind::WeightedSum, Tensor::scalar(static_cast<Real>(s)), {x}, [w](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Real g = tp.grad(self)[0];
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t i = 0; i < gx.size(); ++i) {
            gx[i] += g * w[i];
        }
    });
}

Var weighted_sum_last(Var x, const Tensor &w) {
    Tape &t = same_tape({x});
    const Tensor &xv = x.value();
    const std::int64_t D = xv.dim(-1);
    if (w.rank() != 1 || w.dim(0) != D) {
        throw ShapeError("weighted_sum_last: weights must have length " + std::to_string(D));
    }
    const std::int64_t rows = xv.size() / D;
    Shape os(xv.shape().begin(), xv.shape().end() - 1);
    Tensor out(os);
    for (std::int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
            s += static_cast<double>(w[d]) * xv[r * D + d];
        }
        out[r] = static_cast<Real>(s);
    }
    return t.push(OpKind::WeightedSumLast, std::move(out), {x}, [w, rows, D](Tape &tp, std::size_t self) {
        const auto in = tp.inputs(self);
        const Tensor &g = tp.grad(self);
        Tensor &gx = tp.grad(in[0]);
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t d = 0; d < D; ++d) {
                gx[r * D + d] += g[r] * w[d];
            }
        }
    });
}

Var mse(Var a, Var b) {
    Var d = sub(a, b);
    return mean(mul(d, d));
}

} // namespace ad

SampleResult bilinear_sample(const Tensor &src, const Tensor &coords) {
    check_sample_args(src, coords);
    SampleResult r;
    const auto taps = sample_taps(src, coords, r.valid);
    r.value = apply_taps(src, coords, taps);
    return r;
}

Tensor softmax_last(const Tensor &x) {
    if (x.rank() < 1 || x.dim(-1) < 1) {
        throw ShapeError("softmax_last: empty last axis");
    }
    if (!x.all_finite()) {
        throw NumericError("softmax_last: non-finite input");
    }
    Tensor out(x.shape());
    softmax_rows(x.data(), out.data(), x.size() / x.dim(-1), x.dim(-1));
    return out;
}

} // namespace monosplat
