// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/pipeline/model.hpp"

#include <cstring>

#include "monosplat/numerics/hash.hpp"
#include "monosplat/numerics/mtf.hpp"
#include "monosplat/optim/metrics.hpp"

namespace MONOSPLAT_NS {

namespace {

constexpr char kWeightsMagic[4] = {'M', 'S', 'W', 'T'};
constexpr std::uint32_t kWeightsVersion = 1;

template <typename T> void put(std::vector<std::uint8_t> &out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
}

template <typename T> T take(std::span<const std::uint8_t> bytes, std::size_t &pos) {
    if (pos + sizeof(T) > bytes.size()) {
        throw FormatError("weights: truncated file");
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    }
    pos += sizeof(T);
    return static_cast<T>(v);
}

DptConfig dpt_config(const PipelineConfig &c) {
    return DptConfig{c.provider.channels, c.provider.num_scales, c.channels};
}

CrossViewConfig cross_config(const PipelineConfig &c) {
    CrossViewConfig x;
    x.in_channels = c.channels;
    x.channels = c.mv_channels;
    x.blocks = c.blocks;
    x.window = c.window;
    x.heads = c.heads;
    x.max_views = 8;
    return x;
}

CostRefinerConfig cost_config(const PipelineConfig &c) {
    CostRefinerConfig r;
    r.planes = c.planes;
    r.mono_channels = c.provider.mono_channels;
    r.mv_channels = c.mv_channels;
    r.use_mono = c.mono_in_cost;
    r.base = c.cost_base;
    r.heads = c.heads;
    return r;
}

FeatureRefinerConfig refine_config(const PipelineConfig &c) {
    FeatureRefinerConfig r;
    r.mono_channels = c.provider.mono_channels;
    r.mv_channels = c.mv_channels;
    r.use_mono = c.mono_in_refine;
    r.base = c.refine_base;
    r.heads = c.heads;
    r.out_channels = c.refine_channels;
    return r;
}

const PipelineConfig &checked(const PipelineConfig &c) {
    c.validate();
    return c;
}

} // namespace

std::vector<ViewInput> prepare_views(const FeatureProvider &provider, const std::vector<Tensor> &images,
                                     const std::vector<Camera> &cams) {
    if (images.size() != cams.size()) {
        throw ShapeError("prepare_views: one camera per image required");
    }
    std::vector<ViewInput> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Camera &c = cams[i];
        c.validate();
        if (images[i].rank() != 3 || images[i].dim(0) != c.height || images[i].dim(1) != c.width) {
            throw ShapeError("view " + std::to_string(i) + ": image " + to_string(images[i].shape()) +
                             " does not match its camera " + std::to_string(c.width) + "x" +
                             std::to_string(c.height));
        }
        out.push_back({images[i], c, provider.extract(static_cast<int>(i), images[i])});
    }
    return out;
}

MonoSplatModel::MonoSplatModel(PipelineConfig cfg)
    : cfg_(std::move(cfg)),
      dpt_(DptFuse::make(store_, "dpt", dpt_config(checked(cfg_)), cfg_.seed)),
      cross_(CrossViewTransformer::make(store_, "cross", cross_config(cfg_), cfg_.seed)),
      cost_(CostRefiner::make(store_, "cost", cost_config(cfg_), cfg_.seed)),
      refine_(FeatureRefiner::make(store_, "refine", refine_config(cfg_), cfg_.seed)),
      heads_(GaussianHeads::make(store_, "heads",
                                 GaussianHeadConfig{cfg_.refine_channels, cfg_.sh_bands, cfg_.residual_fraction},
                                 cfg_.seed)) {}

std::vector<Parameter *> MonoSplatModel::trainable() {
    std::vector<Parameter *> out;
    for (auto &[name, p] : store_.all()) {
        if (p->trainable) {
            out.push_back(p);
        }
    }
    return out;
}

DepthCandidates MonoSplatModel::candidates() const {
    return sample_candidates(DepthRange{cfg_.near, cfg_.far}, cfg_.planes, cfg_.inverse_depth);
}

ForwardOutput MonoSplatModel::forward(Tape &t, const std::vector<ViewInput> &views) const {
    const auto V = static_cast<int>(views.size());
    if (V < 1) {
        throw ShapeError("forward: at least one view required");
    }
    for (const auto &v : views) {
        require_divisible_by_16(v.image);
        if (v.image.shape() != views.front().image.shape()) {
            throw ShapeError("forward: all views must share the resolution");
        }
        if (v.cam.width != v.image.dim(1) || v.cam.height != v.image.dim(0)) {
            throw ShapeError("forward: camera resolution differs from its image");
        }
    }
    const DepthRange range{cfg_.near, cfg_.far};
    const DepthCandidates cands = candidates();

    std::vector<Camera> cams, feature_cams;
    std::vector<Var> fused;
    for (const auto &v : views) {
        std::vector<Var> scales;
        for (const auto &s : v.features.scales) {
            scales.push_back(t.constant(s));
        }
        fused.push_back(cfg_.dpt ? dpt_(t, scales) : dpt_.coarsest_only(t, scales));
        cams.push_back(v.cam);
        feature_cams.push_back(v.cam.scaled(4.0));
    }
    const int M = std::min(cfg_.neighbors, V - 1);
    std::vector<std::vector<int>> nbrs;
    for (int i = 0; i < V; ++i) {
        nbrs.push_back(nearest_views(cams, i, M));
    }
    const CrossViewOutput mv = cross_(t, fused, nbrs, cfg_.cross_aggregation);

    ForwardOutput out;
    out.self_attention_only = mv.self_attention_only;
    std::vector<GaussianVars> per_view;
    for (int i = 0; i < V; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const ViewInput &v = views[iu];
        ViewPrediction pred;
        pred.neighbors = nbrs[iu];
        Var ref = mv.features[iu];
        if (M > 0) {
            std::vector<Var> nf;
            std::vector<Camera> nc;
            for (int j : nbrs[iu]) {
                nf.push_back(mv.features[static_cast<std::size_t>(j)]);
                nc.push_back(feature_cams[static_cast<std::size_t>(j)]);
            }
            pred.cost = build_cost_volume(ref, nf, feature_cams[iu], nc, cands);
        } else {
            pred.cost.raw = t.constant(Tensor({ref.dim(0), ref.dim(1), cfg_.planes}));
            pred.cost.valid.assign(static_cast<std::size_t>(ref.dim(0) * ref.dim(1)), 0);
        }
        Var mono = t.constant(v.features.mono);
        pred.coarse = to_depth(cost_(t, pred.cost.raw, mono, ref), cands);
        Var features = refine_(t, pred.coarse.depth, mono, ref, t.constant(v.image), range);
        pred.gaussians = heads_(t, features, pred.coarse.depth, v.image, v.cam, range);
        per_view.push_back(pred.gaussians);
        out.views.push_back(std::move(pred));
    }
    out.merged = merge_vars(per_view);
    return out;
}

void MonoSplatModel::save_weights(const std::filesystem::path &path) const {
    std::vector<std::uint8_t> bytes(std::begin(kWeightsMagic), std::end(kWeightsMagic));
    const auto all = store_.all();
    put<std::uint32_t>(bytes, kWeightsVersion);
    put<std::uint32_t>(bytes, static_cast<std::uint32_t>(all.size()));
    for (const auto &[name, p] : all) {
        put<std::uint32_t>(bytes, static_cast<std::uint32_t>(name.size()));
        bytes.insert(bytes.end(), name.begin(), name.end());
        const auto mtf = encode_mtf(p->value);
        put<std::uint64_t>(bytes, mtf.size());
        bytes.insert(bytes.end(), mtf.begin(), mtf.end());
    }
    write_file_bytes(path, bytes);
}

void MonoSplatModel::load_weights(const std::filesystem::path &path) {
    const auto data = read_file_bytes(path);
    const std::span<const std::uint8_t> bytes(data);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightsMagic, 4) != 0) {
        throw FormatError("weights: bad magic in " + path.string());
    }
    std::size_t pos = 4;
    if (take<std::uint32_t>(bytes, pos) != kWeightsVersion) {
        throw FormatError("weights: unsupported version");
    }
    const auto all = store_.all();
    if (take<std::uint32_t>(bytes, pos) != all.size()) {
        throw FormatError("weights: parameter count differs from the model configuration");
    }
    std::vector<Tensor> values;
    for (const auto &[name, p] : all) {
        const auto len = take<std::uint32_t>(bytes, pos);
        if (pos + len > bytes.size()) {
            throw FormatError("weights: truncated file");
        }
        const std::string got(reinterpret_cast<const char *>(bytes.data() + pos), len);
        pos += len;
        if (got != name) {
            throw FormatError("weights: expected parameter '" + name + "', found '" + got + "'");
        }
        const auto n = take<std::uint64_t>(bytes, pos);
        if (pos + n > bytes.size()) {
            throw FormatError("weights: truncated file");
        }
        Tensor v = decode_mtf(bytes.subspan(pos, n));
        pos += n;
        if (v.shape() != p->value.shape()) {
            throw FormatError("weights: '" + name + "' has shape " + to_string(v.shape()) + ", model expects " +
                              to_string(p->value.shape()));
        }
        values.push_back(std::move(v));
    }
    if (pos != bytes.size()) {
        throw FormatError("weights: trailing bytes");
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i].second->value = std::move(values[i]);
    }
}

std::string MonoSplatModel::weights_hash() const {
    std::vector<std::uint8_t> bytes;
    for (const auto &[name, p] : store_.all()) {
        bytes.insert(bytes.end(), name.begin(), name.end());
        bytes.push_back(0);
        const auto mtf = encode_mtf(p->value);
        bytes.insert(bytes.end(), mtf.begin(), mtf.end());
    }
    return sha256_hex(bytes);
}

RenderSettings target_settings(const PipelineConfig &cfg, const Camera &cam) {
    RenderSettings s = RenderSettings::for_camera(cam);
    s.background = cfg.background;
    s.tile = cfg.tile;
    return s;
}

Var gradient_surrogate(const GaussianVars &g, const GaussianGrads &grads) {
    Var s = ad::weighted_sum(g.mu, grads.mu);
    s = ad::add(s, ad::weighted_sum(g.alpha, grads.alpha));
    s = ad::add(s, ad::weighted_sum(g.scale, grads.scale));
    s = ad::add(s, ad::weighted_sum(g.rot, grads.rot));
    return ad::add(s, ad::weighted_sum(g.sh, grads.sh));
}

StepResult train_step(MonoSplatModel &model, const TrainingScene &scene, const LossConfig &loss) {
    if (scene.targets.empty()) {
        throw ShapeError("train_step: at least one target view required");
    }
    Tape t;
    const ForwardOutput out = model.forward(t, scene.inputs);
    const GaussianSet g = out.merged.materialize();
    const double inv = 1.0 / static_cast<double>(scene.targets.size());
    GaussianGrads total{Tensor(g.mu.shape()), Tensor(g.alpha.shape()), Tensor(g.scale.shape()),
                        Tensor(g.rot.shape()), Tensor(g.sh.shape())};
    StepResult r;
    for (const auto &target : scene.targets) {
        const RenderSettings s = target_settings(model.config(), target.cam);
        const RenderOutput img = render(g, target.cam, s);
        LossValue l = photometric_loss(img.image, target.image, loss);
        for (auto &v : l.grad.values()) {
            v = static_cast<Real>(v * inv);
        }
        const GaussianGrads gr = render_backward(g, target.cam, s, img.state, l.grad);
        auto acc = [](Tensor &dst, const Tensor &src) {
            for (std::int64_t i = 0; i < dst.size(); ++i) {
                dst[i] += src[i];
            }
        };
        acc(total.mu, gr.mu);
        acc(total.alpha, gr.alpha);
        acc(total.scale, gr.scale);
        acc(total.rot, gr.rot);
        acc(total.sh, gr.sh);
        r.loss += inv * l.total;
        r.psnr += inv * psnr(img.image, target.image);
    }
    t.backward(gradient_surrogate(out.merged, total));
    return r;
}

double evaluate_psnr(const MonoSplatModel &model, const std::vector<ViewInput> &inputs, const TargetView &target) {
    Tape t;
    const GaussianSet g = model.forward(t, inputs).merged.materialize();
    return psnr(render(g, target.cam, target_settings(model.config(), target.cam)).image, target.image);
}

} // namespace monosplat
