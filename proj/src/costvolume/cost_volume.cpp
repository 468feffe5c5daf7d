// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/costvolume/cost_volume.hpp"

#include <cmath>

namespace MONOSPLAT_NS {

Tensor DepthCandidates::as_tensor() const {
    Tensor t({static_cast<std::int64_t>(values.size())});
    for (std::size_t i = 0; i < values.size(); ++i) {
        t[static_cast<std::int64_t>(i)] = static_cast<Real>(values[i]);
    }
    return t;
}

DepthCandidates sample_candidates(const DepthRange &range, int D, bool inverse_depth) {
    range.validate();
    if (D < 2) {
        throw ShapeError("at least two depth candidates required, got " + std::to_string(D));
    }
    DepthCandidates c;
    c.range = range;
    c.inverse_depth = inverse_depth;
    c.values.resize(static_cast<std::size_t>(D));
    for (int m = 0; m < D; ++m) {
        const double f = static_cast<double>(m) / (D - 1);
        if (inverse_depth) {
            const double inv = 1.0 / range.near + f * (1.0 / range.far - 1.0 / range.near);
            c.values[static_cast<std::size_t>(m)] = 1.0 / inv;
        } else {
            c.values[static_cast<std::size_t>(m)] = range.near + f * (range.far - range.near);
        }
    }
    c.values.front() = range.near;
    c.values.back() = range.far;
    return c;
}

RawCostVolume build_cost_volume(Var ref, const std::vector<Var> &neighbors, const Camera &ref_cam,
                                const std::vector<Camera> &neighbor_cams, const DepthCandidates &cands) {
    if (neighbors.empty() || neighbors.size() != neighbor_cams.size()) {
        throw ShapeError("cost volume: need at least one neighbor and one camera per neighbor");
    }
    if (ref.value().rank() != 3) {
        throw ShapeError("cost volume: reference features must be HxWxC");
    }
    for (const auto &n : neighbors) {
        if (n.shape() != ref.shape()) {
            throw ShapeError("cost volume: neighbor features " + to_string(n.shape()) + " differ from reference " +
                             to_string(ref.shape()));
        }
    }
    Tape &tape = *ref.tape;
    const std::int64_t h = ref.dim(0), w = ref.dim(1), C = ref.dim(2);
    const auto D = static_cast<std::int64_t>(cands.values.size());
    const Tensor inv_c({C}, static_cast<Real>(1.0 / static_cast<double>(C)));

    RawCostVolume out;
    out.valid.assign(static_cast<std::size_t>(h * w), 0);
    std::vector<Var> planes;
    planes.reserve(static_cast<std::size_t>(D));
    for (std::int64_t m = 0; m < D; ++m) {
        std::vector<Var> corr;
        std::vector<double> count(static_cast<std::size_t>(h * w), 0.0);
        std::vector<Tensor> masks;
        for (std::size_t j = 0; j < neighbors.size(); ++j) {
            const auto grid = plane_sweep_coords(ref_cam, neighbor_cams[j], cands.values[static_cast<std::size_t>(m)],
                                                 static_cast<int>(w), static_cast<int>(h));
            const Sampled s = ad::bilinear_sample(neighbors[j], grid.coords);
            Tensor mask({h, w});
            for (std::int64_t p = 0; p < h * w; ++p) {
                const bool ok = grid.valid[static_cast<std::size_t>(p)] != 0 && s.valid[static_cast<std::size_t>(p)] != 0;
                mask[p] = ok ? 1.0f : 0.0f;
                count[static_cast<std::size_t>(p)] += ok ? 1.0 : 0.0;
            }
            corr.push_back(ad::weighted_sum_last(ad::mul(ref, s.value), inv_c));
            masks.push_back(std::move(mask));
        }
        Var acc;
        for (std::size_t j = 0; j < corr.size(); ++j) {
            Tensor wgt = masks[j];
            for (std::int64_t p = 0; p < h * w; ++p) {
                const double n = count[static_cast<std::size_t>(p)];
                wgt[p] = n > 0.0 ? static_cast<Real>(wgt[p] / n) : 0.0f;
            }
            Var term = ad::mul(corr[j], tape.constant(std::move(wgt)));
            acc = j == 0 ? term : ad::add(acc, term);
        }
        for (std::int64_t p = 0; p < h * w; ++p) {
            if (count[static_cast<std::size_t>(p)] > 0.0) {
                out.valid[static_cast<std::size_t>(p)] = 1;
            }
        }
        planes.push_back(ad::reshape(acc, {h, w, 1}));
    }
    out.raw = ad::concat(planes, 2);
    return out;
}

CostRefiner CostRefiner::make(ParamStore &store, const std::string &name, const CostRefinerConfig &cfg,
                              std::uint64_t seed) {
    CostRefiner r;
    r.cfg_ = cfg;
    UNetConfig u;
    u.in_channels = cfg.planes + (cfg.use_mono ? cfg.mono_channels : 0) + cfg.mv_channels;
    u.out_channels = cfg.planes;
    u.base = cfg.base;
    u.multipliers = cfg.multipliers;
    u.attention_level = cfg.attention_level;
    u.heads = cfg.heads;
    u.zero_init_output = true;
    r.net_ = UNet::make(store, name, u, seed);
    return r;
}

Var CostRefiner::operator()(Tape &t, Var raw, Var mono, Var mv) const {
    if (raw.value().rank() != 3 || raw.dim(2) != cfg_.planes) {
        throw ShapeError("cost refiner: expected " + std::to_string(cfg_.planes) + " planes, got " +
                         to_string(raw.shape()));
    }
    std::vector<Var> parts{raw};
    if (cfg_.use_mono) {
        if (mono.tape == nullptr || mono.dim(2) != cfg_.mono_channels) {
            throw ShapeError("cost refiner: mono feature channel mismatch");
        }
        parts.push_back(mono);
    }
    if (mv.dim(2) != cfg_.mv_channels) {
        throw ShapeError("cost refiner: multi-view feature channel mismatch");
    }
    parts.push_back(mv);
    for (const auto &p : parts) {
        if (p.dim(0) != raw.dim(0) || p.dim(1) != raw.dim(1)) {
            throw ShapeError("cost refiner: spatial extents differ");
        }
    }
    return ad::add(raw, net_(t, ad::concat(parts, 2)));
}

DepthEstimate to_depth(Var refined, const DepthCandidates &cands) {
    if (refined.dim(-1) != static_cast<std::int64_t>(cands.values.size())) {
        throw ShapeError("to_depth: plane count differs from the candidate count");
    }
    for (std::size_t m = 1; m < cands.values.size(); ++m) {
        if (!(cands.values[m] > cands.values[m - 1])) {
            throw ShapeError("to_depth: candidates must be ascending");
        }
    }
    DepthEstimate e;
    e.prob = ad::softmax_last(refined);
    e.depth = ad::weighted_sum_last(e.prob, cands.as_tensor());
    return e;
}

} // namespace monosplat
