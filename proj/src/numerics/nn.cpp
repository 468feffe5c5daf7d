// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/numerics/nn.hpp"

#include <cmath>
#include <random>

namespace MONOSPLAT_NS {

namespace {

std::uint64_t fnv1a(const std::string &s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace

Parameter &ParamStore::create(const std::string &name, Tensor init, bool trainable) {
    if (contains(name)) {
        throw ShapeError("duplicate parameter '" + name + "'");
    }
    index_[name] = params_.size();
    params_.emplace_back(name, Parameter(std::move(init), trainable));
    return params_.back().second;
}

Parameter &ParamStore::get(const std::string &name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ShapeError("unknown parameter '" + name + "'");
    }
    return params_[it->second].second;
}

const Parameter &ParamStore::get(const std::string &name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ShapeError("unknown parameter '" + name + "'");
    }
    return params_[it->second].second;
}

std::vector<std::pair<std::string, Parameter *>> ParamStore::all() {
    std::vector<std::pair<std::string, Parameter *>> out;
    for (auto &[name, p] : params_) {
        out.emplace_back(name, &p);
    }
    return out;
}

std::vector<std::pair<std::string, const Parameter *>> ParamStore::all() const {
    std::vector<std::pair<std::string, const Parameter *>> out;
    for (const auto &[name, p] : params_) {
        out.emplace_back(name, &p);
    }
    return out;
}

std::int64_t ParamStore::count(bool trainable) const {
    std::int64_t n = 0;
    for (const auto &[name, p] : params_) {
        if (p.trainable == trainable) {
            n += p.value.size();
        }
    }
    return n;
}

void ParamStore::zero_grad() {
    for (auto &[name, p] : params_) {
        p.zero_grad();
    }
}

Tensor init_tensor(Shape shape, std::int64_t fan_in, Init init, std::uint64_t seed, const std::string &name) {
    Tensor t(std::move(shape));
    if (init == Init::Zero) {
        return t;
    }
    std::mt19937_64 rng(seed ^ fnv1a(name));
    const float bound = 1.0f / std::sqrt(static_cast<float>(std::max<std::int64_t>(fan_in, 1)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (auto &v : t.storage()) {
        v = dist(rng);
    }
    return t;
}

Conv2d Conv2d::make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co, int k, int stride,
                    std::uint64_t seed, Init init) {
    Conv2d c;
    c.weight = &store.create(name + ".weight", init_tensor({k, k, ci, co}, k * k * ci, init, seed, name + ".weight"));
    c.bias = &store.create(name + ".bias", Tensor({co}));
    c.stride = stride;
    c.pad = k / 2;
    return c;
}

Var Conv2d::operator()(Tape &t, Var x) const {
    return ad::conv2d(x, t.parameter(*weight), t.parameter(*bias), stride, pad);
}

Linear Linear::make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co, std::uint64_t seed,
                    Init init) {
    Linear l;
    l.weight = &store.create(name + ".weight", init_tensor({ci, co}, ci, init, seed, name + ".weight"));
    l.bias = &store.create(name + ".bias", Tensor({co}));
    return l;
}

Var Linear::operator()(Tape &t, Var x) const {
    return ad::add(ad::matmul(x, t.parameter(*weight)), t.parameter(*bias));
}

ResBlock ResBlock::make(ParamStore &store, const std::string &name, std::int64_t ci, std::int64_t co,
                        std::uint64_t seed) {
    ResBlock r;
    r.conv1 = Conv2d::make(store, name + ".conv1", ci, co, 3, 1, seed);
    r.conv2 = Conv2d::make(store, name + ".conv2", co, co, 3, 1, seed);
    if (ci != co) {
        r.skip = Conv2d::make(store, name + ".skip", ci, co, 1, 1, seed);
    }
    return r;
}

Var ResBlock::operator()(Tape &t, Var x) const {
    Var h = conv1(t, ad::silu(x));
    h = conv2(t, ad::silu(h));
    return ad::add(skip ? (*skip)(t, x) : x, h);
}

Attention Attention::make(ParamStore &store, const std::string &name, std::int64_t channels, int heads,
                          std::uint64_t seed) {
    if (heads < 1 || channels % heads != 0) {
        throw ShapeError("attention: channels must be divisible by the head count");
    }
    Attention a;
    a.q = Linear::make(store, name + ".q", channels, channels, seed);
    a.k = Linear::make(store, name + ".k", channels, channels, seed);
    a.v = Linear::make(store, name + ".v", channels, channels, seed);
    a.out = Linear::make(store, name + ".out", channels, channels, seed);
    a.heads = heads;
    return a;
}

Var Attention::operator()(Tape &t, Var queries, Var keys_values, std::vector<Tensor> *weights) const {
    const std::int64_t C = queries.dim(-1);
    const std::int64_t hd = C / heads;
    Var q = this->q(t, queries);
    Var k = this->k(t, keys_values);
    Var v = this->v(t, keys_values);
    const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
    std::vector<Var> outs;
    for (int h = 0; h < heads; ++h) {
        Var qh = heads == 1 ? q : ad::slice(q, -1, h * hd, (h + 1) * hd);
        Var kh = heads == 1 ? k : ad::slice(k, -1, h * hd, (h + 1) * hd);
        Var vh = heads == 1 ? v : ad::slice(v, -1, h * hd, (h + 1) * hd);
        Var p = ad::softmax_last(ad::scale(ad::matmul(qh, kh, /*transpose_b=*/true), inv_sqrt));
        if (weights != nullptr) {
            weights->push_back(p.value());
        }
        outs.push_back(ad::matmul(p, vh));
    }
    Var o = heads == 1 ? outs.front() : ad::concat(outs, -1);
    return out(t, o);
}

UNet UNet::make(ParamStore &store, const std::string &name, const UNetConfig &cfg, std::uint64_t seed) {
    if (cfg.multipliers.empty()) {
        throw ShapeError("unet: at least one level required");
    }
    UNet u;
    u.cfg_ = cfg;
    const auto levels = static_cast<int>(cfg.multipliers.size());
    u.in_ = Conv2d::make(store, name + ".in", cfg.in_channels, cfg.base, 3, 1, seed);
    std::int64_t prev = cfg.base;
    std::vector<std::int64_t> widths;
    for (int l = 0; l < levels; ++l) {
        const std::int64_t c = cfg.base * cfg.multipliers[static_cast<std::size_t>(l)];
        widths.push_back(c);
        u.enc_.push_back(ResBlock::make(store, name + ".enc" + std::to_string(l), prev, c, seed));
        if (l + 1 < levels) {
            u.down_.push_back(Conv2d::make(store, name + ".down" + std::to_string(l), c, c, 3, 2, seed));
        }
        prev = c;
    }
    if (cfg.attention_level >= 0) {
        if (cfg.attention_level >= levels) {
            throw ShapeError("unet: attention level beyond the deepest level");
        }
        u.attn_ = Attention::make(store, name + ".attn", widths[static_cast<std::size_t>(cfg.attention_level)],
                                  cfg.heads, seed);
    }
    u.dec_.resize(static_cast<std::size_t>(levels - 1));
    for (int l = levels - 2; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        u.dec_[lu] = ResBlock::make(store, name + ".dec" + std::to_string(l), widths[lu + 1] + widths[lu], widths[lu], seed);
    }
    u.out_ = Conv2d::make(store, name + ".out", widths.front(), cfg.out_channels, 3, 1, seed,
                          cfg.zero_init_output ? Init::Zero : Init::Uniform);
    return u;
}

Var UNet::operator()(Tape &t, Var x) const {
    if (x.dim(-1) != cfg_.in_channels) {
        throw ShapeError("unet: expected " + std::to_string(cfg_.in_channels) + " input channels, got " +
                         std::to_string(x.dim(-1)));
    }
    const auto levels = static_cast<int>(enc_.size());
    Var h = in_(t, x);
    std::vector<Var> skips;
    for (int l = 0; l < levels; ++l) {
        const auto lu = static_cast<std::size_t>(l);
        h = enc_[lu](t, h);
        if (attn_ && l == cfg_.attention_level) {
            const std::int64_t hh = h.dim(0), ww = h.dim(1);
            Var tokens = to_tokens(h);
            h = ad::add(h, from_tokens((*attn_)(t, tokens, tokens), hh, ww));
        }
        skips.push_back(h);
        if (l + 1 < levels) {
            h = down_[lu](t, h);
        }
    }
    for (int l = levels - 2; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        Var up = ad::resize_bilinear(h, skips[lu].dim(0), skips[lu].dim(1));
        h = dec_[lu](t, ad::concat({up, skips[lu]}, -1));
    }
    return out_(t, ad::silu(h));
}

Var to_tokens(Var x) { return ad::reshape(x, {x.dim(0) * x.dim(1), x.dim(2)}); }

Var from_tokens(Var tokens, std::int64_t h, std::int64_t w) { return ad::reshape(tokens, {h, w, tokens.dim(1)}); }

} // namespace monosplat
