// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/pipeline/grad_suites.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "monosplat/pipeline/model.hpp"

namespace MONOSPLAT_NS {

namespace {

Tensor random_tensor(const Shape &shape, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto &v : t.values()) {
        v = static_cast<Real>(u(rng));
    }
    return t;
}

std::vector<NamedParameter> trainable_of(ParamStore &store) {
    std::vector<NamedParameter> out;
    for (auto &[name, p] : store.all()) {
        if (p->trainable) {
            out.push_back({name, p});
        }
    }
    return out;
}

void randomize(ParamStore &store, std::mt19937_64 &rng, double amplitude) {
    for (auto &[name, p] : store.all()) {
        p->value = random_tensor(p->value.shape(), rng, -amplitude, amplitude);
    }
}

// Loss = <W, f(params)> for a random W; analytic gradients via the tape.
GradCheckReport check_block(ParamStore &store, const std::function<Var(Tape &)> &f, std::mt19937_64 &rng,
                            const GradCheckOptions &opts) {
    Tensor w;
    {
        Tape t;
        w = random_tensor(f(t).shape(), rng);
    }
    store.zero_grad();
    {
        Tape t;
        t.backward(ad::weighted_sum(f(t), w));
    }
    auto loss = [&] {
        Tape t;
        return static_cast<double>(ad::weighted_sum(f(t), w).value().item());
    };
    return grad_check(loss, trainable_of(store), opts);
}

Camera small_camera(std::mt19937_64 &rng, int size, double focal) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Eigen::Matrix3d R =
        Eigen::AngleAxisd(0.05 * u(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    return make_camera(focal, size, size, R, Eigen::Vector3d(0.3 * u(rng), 0.1 * u(rng), 0.1 * u(rng)));
}

GradCheckReport suite_renderer(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    const int n = 8, bands = 16, size = 32;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GaussianSet gs = GaussianSet::allocate(n, bands);
    for (int i = 0; i < n; ++i) {
        gs.mu[i * 3] = static_cast<Real>(1.5 * u(rng));
        gs.mu[i * 3 + 1] = static_cast<Real>(1.5 * u(rng));
        gs.mu[i * 3 + 2] = static_cast<Real>(5.0 + u(rng));
        gs.alpha[i] = static_cast<Real>(0.4 + 0.3 * u(rng));
        for (int k = 0; k < 3; ++k) {
            gs.scale[i * 3 + k] = static_cast<Real>(0.4 + 0.2 * u(rng));
        }
        Eigen::Vector4d q(u(rng), u(rng), u(rng), u(rng));
        q.normalize();
        for (int k = 0; k < 4; ++k) {
            gs.rot[i * 4 + k] = static_cast<Real>(q[k]);
        }
        for (int k = 0; k < 3 * bands; ++k) {
            gs.sh[i * 3 * bands + k] = static_cast<Real>(0.3 * u(rng));
        }
    }
    const Camera cam = make_camera(32.0, size, size);
    RenderSettings s = RenderSettings::for_camera(cam);
    s.alpha_cutoff = 1e-10f;
    s.background = {0.2f, 0.3f, 0.4f};
    const Tensor w_img = random_tensor({size, size, 3}, rng);
    const Tensor w_depth = random_tensor({size, size}, rng, -0.1, 0.1);

    Parameter pm(gs.mu, true), pa(gs.alpha, true), ps(gs.scale, true), pr(gs.rot, true), ph(gs.sh, true);
    auto current = [&] {
        GaussianSet x = gs;
        x.mu = pm.value;
        x.alpha = pa.value;
        x.scale = ps.value;
        x.rot = pr.value;
        x.sh = ph.value;
        for (std::int64_t i = 0; i < n; ++i) {
            Real *q = x.rot.data() + 4 * i;
            const Real norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
            for (int k = 0; k < 4; ++k) {
                q[k] /= norm;
            }
        }
        return x;
    };
    auto loss = [&] {
        const RenderOutput o = render(current(), cam, s);
        double l = 0.0;
        for (std::int64_t i = 0; i < w_img.size(); ++i) {
            l += static_cast<double>(w_img[i]) * o.image[i];
        }
        for (std::int64_t i = 0; i < w_depth.size(); ++i) {
            l += static_cast<double>(w_depth[i]) * o.depth[i];
        }
        return l;
    };
    const RenderOutput o = render(gs, cam, s);
    const GaussianGrads g = render_backward(gs, cam, s, o.state, w_img, &w_depth);
    pm.grad = g.mu;
    pa.grad = g.alpha;
    ps.grad = g.scale;
    pr.grad = g.rot;
    ph.grad = g.sh;
    return grad_check(loss, {{"mu", &pm}, {"alpha", &pa}, {"scale", &ps}, {"rot", &pr}, {"sh", &ph}}, opts);
}

GradCheckReport suite_dpt(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    ParamStore store;
    const DptConfig cfg{3, 4, 5};
    const DptFuse dpt = DptFuse::make(store, "dpt", cfg, rng());
    randomize(store, rng, 0.4);
    std::vector<Tensor> scales;
    for (std::int64_t e : {8, 4, 2, 1}) {
        scales.push_back(random_tensor({e, e, 3}, rng));
    }
    auto f = [&](Tape &t) {
        std::vector<Var> vs;
        for (const auto &s : scales) {
            vs.push_back(t.constant(s));
        }
        return dpt(t, vs);
    };
    return check_block(store, f, rng, opts);
}

GradCheckReport suite_cross_view(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    ParamStore store;
    CrossViewConfig cfg;
    cfg.in_channels = 5;
    cfg.channels = 4;
    cfg.blocks = 2;
    cfg.window = 2;
    cfg.heads = 2;
    cfg.max_views = 3;
    const auto net = CrossViewTransformer::make(store, "cross", cfg, rng());
    randomize(store, rng, 0.5);
    std::vector<Tensor> views;
    for (int v = 0; v < 3; ++v) {
        views.push_back(random_tensor({4, 4, 5}, rng));
    }
    const std::vector<std::vector<int>> nbrs{{1, 2}, {0, 2}, {1}};
    auto f = [&](Tape &t) {
        std::vector<Var> vs;
        for (const auto &x : views) {
            vs.push_back(t.constant(x));
        }
        return ad::concat(net(t, vs, nbrs).features, -1);
    };
    return check_block(store, f, rng, opts);
}

GradCheckReport suite_cost_refiner(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    ParamStore store;
    CostRefinerConfig cfg;
    cfg.planes = 6;
    cfg.mono_channels = 3;
    cfg.mv_channels = 4;
    cfg.base = 4;
    cfg.multipliers = {1, 2};
    cfg.attention_level = 1;
    const auto net = CostRefiner::make(store, "cost", cfg, rng());
    randomize(store, rng, 0.4);
    const Tensor raw = random_tensor({4, 4, 6}, rng);
    const Tensor mono = random_tensor({4, 4, 3}, rng);
    const Tensor mv = random_tensor({4, 4, 4}, rng);
    const DepthCandidates cands = sample_candidates(DepthRange{1.0, 4.0}, 6);
    auto f = [&](Tape &t) {
        Var refined = net(t, t.constant(raw), t.constant(mono), t.constant(mv));
        return to_depth(refined, cands).depth;
    };
    return check_block(store, f, rng, opts);
}

GradCheckReport suite_feature_refiner(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    ParamStore store;
    FeatureRefinerConfig cfg;
    cfg.mono_channels = 3;
    cfg.mv_channels = 4;
    cfg.base = 4;
    cfg.multipliers = {1, 1, 1};
    cfg.attention_level = 2;
    cfg.out_channels = 5;
    const auto net = FeatureRefiner::make(store, "refine", cfg, rng());
    randomize(store, rng, 0.4);
    const DepthRange range{1.0, 4.0};
    const Tensor depth = random_tensor({2, 2}, rng, 1.5, 3.5);
    const Tensor mono = random_tensor({2, 2, 3}, rng);
    const Tensor mv = random_tensor({2, 2, 4}, rng);
    const Tensor image = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
    auto f = [&](Tape &t) {
        return net(t, t.constant(depth), t.constant(mono), t.constant(mv), t.constant(image), range);
    };
    return check_block(store, f, rng, opts);
}

GradCheckReport suite_heads(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    ParamStore store;
    const auto heads = GaussianHeads::make(store, "heads", GaussianHeadConfig{4, 4, 0.1}, rng());
    randomize(store, rng, 0.2);
    const DepthRange range{2.0, 10.0};
    const Camera cam = small_camera(rng, 8, 9.0);
    const Tensor features = random_tensor({8, 8, 4}, rng);
    const Tensor coarse = random_tensor({2, 2}, rng, 4.0, 8.0);
    const Tensor image = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
    auto f = [&](Tape &t) {
        const GaussianVars g = heads(t, t.constant(features), t.constant(coarse), image, cam, range);
        auto flat = [](Var v) { return ad::reshape(v, {v.value().size()}); };
        return ad::concat({flat(g.mu), g.alpha, flat(g.scale), flat(g.rot), flat(g.sh)}, 0);
    };
    return check_block(store, f, rng, opts);
}

GradCheckReport suite_full_chain(std::mt19937_64 &rng, const GradCheckOptions &opts) {
    PipelineConfig cfg;
    cfg.planes = 6;
    cfg.near = 2.0;
    cfg.far = 12.0;
    cfg.channels = 4;
    cfg.mv_channels = 4;
    cfg.window = 2;
    cfg.neighbors = 1;
    cfg.blocks = 1;
    cfg.sh_bands = 1;
    cfg.cost_base = 4;
    cfg.refine_base = 4;
    cfg.refine_channels = 4;
    cfg.provider.channels = 3;
    cfg.provider.mono_channels = 3;
    cfg.seed = rng();
    cfg.provider.seed = cfg.seed;
    MonoSplatModel model(cfg);
    // zero-initialized heads would hide most of the chain
    for (auto &[name, p] : model.params().all()) {
        if (p->trainable && name.rfind("heads", 0) == 0) {
            p->value = random_tensor(p->value.shape(), rng, -0.05, 0.05);
        }
    }
    const SyntheticProvider provider(cfg.provider);
    std::vector<Tensor> images;
    std::vector<Camera> cams;
    for (int v = 0; v < 2; ++v) {
        images.push_back(random_tensor({16, 16, 3}, rng, 0.0, 1.0));
        cams.push_back(make_camera(16.0, 16, 16, Eigen::Matrix3d::Identity(), Eigen::Vector3d(0.4 * v - 0.2, 0, 0)));
    }
    const auto inputs = prepare_views(provider, images, cams);
    const Camera target = make_camera(16.0, 16, 16);
    RenderSettings s = target_settings(cfg, target);
    s.alpha_cutoff = 1e-10f;
    const Tensor w = random_tensor({16, 16, 3}, rng);

    model.params().zero_grad();
    {
        Tape t;
        const ForwardOutput out = model.forward(t, inputs);
        const GaussianSet g = out.merged.materialize();
        const RenderOutput img = render(g, target, s);
        t.backward(gradient_surrogate(out.merged, render_backward(g, target, s, img.state, w)));
    }
    auto loss = [&] {
        Tape t;
        const RenderOutput img = render(model.forward(t, inputs).merged.materialize(), target, s);
        double l = 0.0;
        for (std::int64_t i = 0; i < w.size(); ++i) {
            l += static_cast<double>(w[i]) * img.image[i];
        }
        return l;
    };
    return grad_check(loss, trainable_of(model.params()), opts);
}

using SuiteFn = GradCheckReport (*)(std::mt19937_64 &, const GradCheckOptions &);

struct SuiteDef {
    std::string name;
    SuiteFn fn;
    std::int64_t samples; // per parameter tensor
    double step;
    // Roundoff in the central difference is about 1e-9 |loss| at these steps.
    double floor;
};

const std::vector<SuiteDef> &suites() {
    static const std::vector<SuiteDef> s{
        {"renderer", suite_renderer, 256, 1e-4, 1e-6},
        {"dpt", suite_dpt, 24, 1e-5, 1e-5},
        {"cross_view", suite_cross_view, 12, 1e-5, 1e-5},
        {"cost_refiner", suite_cost_refiner, 16, 1e-5, 1e-5},
        {"feature_refiner", suite_feature_refiner, 16, 1e-5, 1e-5},
        {"heads", suite_heads, 128, 1e-5, 1e-5},
        {"full_chain", suite_full_chain, 3, 1e-5, 1e-5},
    };
    return s;
}

} // namespace

const std::vector<std::string> &grad_suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto &s : suites()) {
            n.push_back(s.name);
        }
        return n;
    }();
    return names;
}

GradSuiteResult run_grad_suite(const std::string &name, std::uint64_t seed, const GradCheckOptions &base) {
    const auto &all = suites();
    for (std::size_t k = 0; k < all.size(); ++k) {
        const SuiteDef &s = all[k];
        if (s.name != name) {
            continue;
        }
        GradCheckOptions opts = base;
        opts.h = s.step;
        opts.floor = std::max(base.floor, s.floor);
        opts.max_samples = s.samples;
        opts.seed = seed;
        std::mt19937_64 rng(seed * 7919 + k);
        const auto t0 = std::chrono::steady_clock::now();
        GradSuiteResult r;
        r.name = name;
        r.report = s.fn(rng, opts);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }
    throw std::invalid_argument("unknown gradient suite '" + name + "'");
}

} // namespace monosplat
