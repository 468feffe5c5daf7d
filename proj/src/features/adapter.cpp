// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/features/adapter.hpp"

namespace MONOSPLAT_NS {

DptFuse DptFuse::make(ParamStore &store, const std::string &name, const DptConfig &cfg, std::uint64_t seed) {
    if (cfg.num_scales < 1) {
        throw ShapeError("dpt: at least one scale required");
    }
    DptFuse d;
    d.cfg_ = cfg;
    for (int s = 0; s < cfg.num_scales; ++s) {
        d.proj_.push_back(
            Conv2d::make(store, name + ".proj" + std::to_string(s), cfg.in_channels, cfg.out_channels, 1, 1, seed));
    }
    for (int s = 0; s + 1 < cfg.num_scales; ++s) {
        d.fuse_.push_back(
            ResBlock::make(store, name + ".fuse" + std::to_string(s), cfg.out_channels, cfg.out_channels, seed));
    }
    return d;
}

void DptFuse::check(const std::vector<Var> &scales) const {
    if (static_cast<int>(scales.size()) != cfg_.num_scales) {
        throw ShapeError("dpt: expected " + std::to_string(cfg_.num_scales) + " scales, got " +
                         std::to_string(scales.size()));
    }
    for (std::size_t s = 0; s < scales.size(); ++s) {
        if (scales[s].value().rank() != 3 || scales[s].dim(2) != cfg_.in_channels) {
            throw ShapeError("dpt: scale " + std::to_string(s) + " has shape " + to_string(scales[s].shape()));
        }
        if (s > 0) {
            const auto h = scales[s - 1].dim(0), w = scales[s - 1].dim(1);
            if (scales[s].dim(0) != (h + 1) / 2 || scales[s].dim(1) != (w + 1) / 2) {
                throw ShapeError("dpt: scale " + std::to_string(s) + " is not half the size of scale " +
                                 std::to_string(s - 1));
            }
        }
    }
}

Var DptFuse::operator()(Tape &t, const std::vector<Var> &scales) const {
    check(scales);
    const int S = cfg_.num_scales;
    Var x = proj_[static_cast<std::size_t>(S - 1)](t, scales.back());
    for (int s = S - 2; s >= 0; --s) {
        const auto su = static_cast<std::size_t>(s);
        Var up = ad::resize_bilinear(x, scales[su].dim(0), scales[su].dim(1));
        x = fuse_[su](t, ad::add(up, proj_[su](t, scales[su])));
    }
    return x;
}

Var DptFuse::coarsest_only(Tape &t, const std::vector<Var> &scales) const {
    check(scales);
    Var x = proj_.back()(t, scales.back());
    return ad::resize_bilinear(x, scales.front().dim(0), scales.front().dim(1));
}

std::vector<std::array<std::int64_t, 4>> attention_windows(std::int64_t h, std::int64_t w, int window) {
    if (window < 1) {
        throw ShapeError("attention window must be positive");
    }
    std::vector<std::array<std::int64_t, 4>> out;
    for (std::int64_t y = 0; y < h; y += window) {
        for (std::int64_t x = 0; x < w; x += window) {
            out.push_back({y, std::min(h, y + window), x, std::min(w, x + window)});
        }
    }
    return out;
}

CrossViewTransformer CrossViewTransformer::make(ParamStore &store, const std::string &name,
                                                const CrossViewConfig &cfg, std::uint64_t seed) {
    if (cfg.blocks < 1 || cfg.max_views < 1) {
        throw ShapeError("cross-view transformer: blocks and max_views must be positive");
    }
    CrossViewTransformer x;
    x.cfg_ = cfg;
    if (cfg.in_channels != cfg.channels) {
        x.in_proj_ = Linear::make(store, name + ".in", cfg.in_channels, cfg.channels, seed);
    }
    x.view_embedding_ = &store.create(name + ".view_embedding", Tensor({cfg.max_views, cfg.channels}));
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string p = name + ".block" + std::to_string(b);
        x.blocks_.push_back({Attention::make(store, p + ".self", cfg.channels, cfg.heads, seed),
                             Attention::make(store, p + ".cross", cfg.channels, cfg.heads, seed),
                             Linear::make(store, p + ".mlp1", cfg.channels, 2 * cfg.channels, seed),
                             Linear::make(store, p + ".mlp2", 2 * cfg.channels, cfg.channels, seed)});
    }
    return x;
}

Var window_attention(Tape &t, const Attention &attn, Var q, Var kv, int window, std::vector<Tensor> *weights) {
    const std::int64_t h = q.dim(0), w = q.dim(1), C = q.dim(2);
    if (kv.dim(0) != h || kv.dim(1) != w) {
        throw ShapeError("window attention: query and key maps must share the spatial shape");
    }
    const auto wins = attention_windows(h, w, window);
    if (wins.size() == 1) {
        return from_tokens(attn(t, to_tokens(q), to_tokens(kv), weights), h, w);
    }
    auto crop = [](Var x, const std::array<std::int64_t, 4> &b) {
        return ad::slice(ad::slice(x, 0, b[0], b[1]), 1, b[2], b[3]);
    };
    std::vector<Var> rows;
    std::vector<Var> row;
    std::int64_t row_y = wins.front()[0];
    for (const auto &b : wins) {
        if (b[0] != row_y) {
            rows.push_back(ad::concat(row, 1));
            row.clear();
            row_y = b[0];
        }
        Var qt = ad::reshape(crop(q, b), {(b[1] - b[0]) * (b[3] - b[2]), C});
        Var kt = ad::reshape(crop(kv, b), {(b[1] - b[0]) * (b[3] - b[2]), C});
        row.push_back(from_tokens(attn(t, qt, kt, weights), b[1] - b[0], b[3] - b[2]));
    }
    rows.push_back(ad::concat(row, 1));
    return rows.size() == 1 ? rows.front() : ad::concat(rows, 0);
}

CrossViewOutput CrossViewTransformer::operator()(Tape &t, const std::vector<Var> &fused,
                                                 const std::vector<std::vector<int>> &neighbors,
                                                 bool cross_attention, bool record_weights) const {
    const std::size_t V = fused.size();
    if (V == 0 || neighbors.size() != V) {
        throw ShapeError("cross-view transformer: one neighbor list per view required");
    }
    if (static_cast<int>(V) > cfg_.max_views) {
        throw ShapeError("cross-view transformer: more views than the view embedding supports");
    }
    CrossViewOutput out;
    std::vector<Tensor> *weights = record_weights ? &out.weights : nullptr;
    bool any_neighbor = false;
    for (std::size_t i = 0; i < V; ++i) {
        if (fused[i].value().rank() != 3 || fused[i].dim(2) != cfg_.in_channels || fused[i].shape() != fused[0].shape()) {
            throw ShapeError("cross-view transformer: view " + std::to_string(i) + " has shape " +
                             to_string(fused[i].shape()));
        }
        for (int j : neighbors[i]) {
            if (j < 0 || static_cast<std::size_t>(j) >= V || static_cast<std::size_t>(j) == i) {
                throw ShapeError("cross-view transformer: bad neighbor index " + std::to_string(j));
            }
            any_neighbor = true;
        }
    }
    const bool cross = cross_attention && any_neighbor;
    out.self_attention_only = !cross;

    Var emb = t.parameter(*view_embedding_);
    std::vector<Var> x(V);
    for (std::size_t i = 0; i < V; ++i) {
        Var h = in_proj_ ? (*in_proj_)(t, fused[i]) : fused[i];
        Var e = ad::reshape(ad::slice(emb, 0, static_cast<std::int64_t>(i), static_cast<std::int64_t>(i) + 1),
                            {cfg_.channels});
        x[i] = ad::add(h, e);
    }
    for (const auto &blk : blocks_) {
        std::vector<Var> s(V);
        for (std::size_t i = 0; i < V; ++i) {
            s[i] = ad::add(x[i], window_attention(t, blk.self_attn, x[i], x[i], cfg_.window, weights));
        }
        std::vector<Var> c(V);
        for (std::size_t i = 0; i < V; ++i) {
            c[i] = s[i];
            if (cross && !neighbors[i].empty()) {
                std::vector<Var> updates;
                for (int j : neighbors[i]) {
                    updates.push_back(window_attention(t, blk.cross_attn, s[i], s[static_cast<std::size_t>(j)], cfg_.window, weights));
                }
                Var sum = updates.front();
                for (std::size_t k = 1; k < updates.size(); ++k) {
                    sum = ad::add(sum, updates[k]);
                }
                c[i] = ad::add(s[i], ad::scale(sum, static_cast<Real>(1.0 / static_cast<double>(updates.size()))));
            }
        }
        for (std::size_t i = 0; i < V; ++i) {
            x[i] = ad::add(c[i], blk.mlp2(t, ad::silu(blk.mlp1(t, c[i]))));
        }
    }
    out.features = std::move(x);
    return out;
}

} // namespace monosplat
