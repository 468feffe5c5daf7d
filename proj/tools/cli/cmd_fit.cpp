// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// fit: optimizes raw Gaussians against target views, or trains the
// network on the synthetic toy task.
#include <algorithm>
#include <cmath>
#include <iostream>

#include "common.hpp"
#include "monosplat/gaussians/predictor.hpp"
#include "monosplat/io/image_io.hpp"
#include "monosplat/io/ply.hpp"
#include "monosplat/optim/metrics.hpp"
#include "monosplat/pipeline/toy.hpp"

namespace monosplat::cli {

namespace {

struct FitArgs {
    CommonOptions common;
    std::string mode = "gaussians";
    int steps = 100;
    std::optional<double> lr;
    double momentum = 0.9;
    std::string schedule = "constant";
    std::string perceptual_cmd;
    // gaussians
    std::filesystem::path ply;
    std::vector<std::filesystem::path> images;
    std::filesystem::path cameras;
    std::string background = "0,0,0";
    // network
    int train_scenes = 8;
    int eval_scenes = 4;
    std::filesystem::path weights;
};

FitConfig fit_config(const FitArgs &a, double default_lr, const std::filesystem::path &log) {
    FitConfig f;
    f.steps = a.steps;
    f.lr = a.lr.value_or(default_lr);
    f.momentum = a.momentum;
    f.schedule = a.schedule == "cosine" ? Schedule::Cosine : Schedule::Constant;
    f.report = log;
    f.validate();
    return f;
}

LossConfig loss_config(const FitArgs &a, double lambda) {
    LossConfig l;
    l.lambda_lpips = lambda;
    if (!a.perceptual_cmd.empty()) {
        l.perceptual = Perceptual::Plugin;
        l.scorer = command_scorer(a.perceptual_cmd);
    }
    l.validate();
    return l;
}

nlohmann::json history_summary(const FitReport &r) {
    return {{"steps", r.history.size()}, {"initial_loss", r.initial_loss()}, {"final_loss", r.final_loss()},
            {"final_psnr", r.history.empty() ? 0.0 : r.history.back().psnr}};
}

// Keeps optimized attributes inside the renderer's domain.
void project(GaussianSet &g) {
    for (std::int64_t i = 0; i < g.size(); ++i) {
        g.alpha[i] = std::clamp(g.alpha[i], kMinOpacity, kMaxOpacity);
        for (int k = 0; k < 3; ++k) {
            g.scale[i * 3 + k] = std::max(g.scale[i * 3 + k], Real(1e-6));
        }
        Real *q = g.rot.data() + 4 * i;
        const Real n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (!(n > 0)) {
            throw NumericError("fit: degenerate quaternion at " + std::to_string(i));
        }
        for (int k = 0; k < 4; ++k) {
            q[k] /= n;
        }
    }
}

int run_fit_gaussians(const FitArgs &a, int threads) {
    if (a.ply.empty() || a.images.empty() || a.cameras.empty()) {
        throw std::invalid_argument("fit --mode gaussians needs --ply, --images and --cameras");
    }
    const PipelineConfig cfg = resolve_config(a.common);
    GaussianSet init = read_ply(a.ply);
    const std::vector<Camera> cams = read_cameras(a.cameras);
    if (cams.size() != a.images.size()) {
        throw std::invalid_argument("one camera per target image required");
    }
    std::vector<Tensor> targets;
    nlohmann::json inputs{{"ply", file_entry(a.ply)}, {"cameras", file_entry(a.cameras)}};
    for (const auto &p : a.images) {
        targets.push_back(read_png(p));
        inputs["images"].push_back(file_entry(p));
    }
    const auto bg = parse_triplet(a.background, "--background");

    Parameter mu(init.mu, true), alpha(init.alpha, true), scale(init.scale, true), rot(init.rot, true),
        sh(init.sh, true);
    const LossConfig loss = loss_config(a, cfg.lambda_lpips);
    auto current = [&] {
        GaussianSet g = init;
        g.mu = mu.value;
        g.alpha = alpha.value;
        g.scale = scale.value;
        g.rot = rot.value;
        g.sh = sh.value;
        project(g);
        return g;
    };
    auto step = [&](int) {
        const GaussianSet g = current();
        StepResult r;
        const double inv = 1.0 / static_cast<double>(targets.size());
        for (std::size_t v = 0; v < targets.size(); ++v) {
            RenderSettings s = RenderSettings::for_camera(cams[v]);
            s.background = {static_cast<float>(bg[0]), static_cast<float>(bg[1]), static_cast<float>(bg[2])};
            s.tile = cfg.tile;
            const RenderOutput o = render(g, cams[v], s);
            LossValue l = photometric_loss(o.image, targets[v], loss);
            for (auto &x : l.grad.values()) {
                x = static_cast<Real>(x * inv);
            }
            const GaussianGrads gr = render_backward(g, cams[v], s, o.state, l.grad);
            for (auto [p, d] : {std::pair{&mu, &gr.mu}, {&alpha, &gr.alpha}, {&scale, &gr.scale}, {&rot, &gr.rot},
                                {&sh, &gr.sh}}) {
                for (std::int64_t k = 0; k < d->size(); ++k) {
                    p->grad[k] += (*d)[k];
                }
            }
            r.loss += l.total * inv;
            r.psnr += psnr(o.image, targets[v]) * inv;
        }
        return r;
    };
    std::filesystem::create_directories(a.common.out);
    const auto log = a.common.out / "fit.ndjson";
    Stopwatch clock;
    const FitReport report = fit({&mu, &alpha, &scale, &rot, &sh}, step, fit_config(a, 1e-3, log));
    const double fit_s = clock.lap();
    const auto out_ply = a.common.out / "fitted.ply";
    write_ply(out_ply, current());

    nlohmann::json r;
    r["command"] = "fit";
    r["mode"] = "gaussians";
    r["config"] = to_json(cfg);
    r["inputs"] = inputs;
    r["fit"] = history_summary(report);
    r["parameters"] = {{"trainable", mu.value.size() + alpha.value.size() + scale.value.size() + rot.value.size() +
                                         sh.value.size()},
                       {"frozen", 0}};
    r["outputs"] = {{"ply", file_entry(out_ply)}, {"log", file_entry(log)}};
    r["threads"] = threads;
    r["timings"] = {{"fit_s", fit_s}};
    write_json(a.common.out / "report.json", r);
    std::cout << "loss " << report.initial_loss() << " -> " << report.final_loss() << "\n";
    return kExitOk;
}

int run_fit_network(const FitArgs &a, int threads) {
    const PipelineConfig cfg = resolve_config(a.common);
    MonoSplatModel model(cfg);
    nlohmann::json inputs = nlohmann::json::object();
    if (!a.weights.empty()) {
        model.load_weights(a.weights);
        inputs["weights"] = file_entry(a.weights);
    }
    const auto provider = make_provider(a.common.provider, cfg.provider);
    const std::string provider_before = provider->state_hash();
    Stopwatch clock;
    const ToyTask task = make_toy_task(*provider, a.train_scenes, a.eval_scenes, cfg.seed);
    const double data_s = clock.lap();
    std::filesystem::create_directories(a.common.out);
    const auto log = a.common.out / "fit.ndjson";
    const ToyRun run = run_toy_training(model, task, fit_config(a, 0.3, log), loss_config(a, cfg.lambda_lpips));
    const double fit_s = clock.lap();
    const auto weights = a.common.out / "weights.bin";
    model.save_weights(weights);

    nlohmann::json r;
    r["command"] = "fit";
    r["mode"] = "network";
    r["config"] = to_json(cfg);
    r["inputs"] = inputs;
    r["task"] = {{"train_scenes", a.train_scenes}, {"eval_scenes", a.eval_scenes}, {"scene", format_scene_spec(toy_scene_spec())}};
    r["provider"] = {{"name", provider->name()}, {"state_hash", provider_before},
                     {"unchanged", provider->state_hash() == provider_before}};
    r["fit"] = history_summary(run.report);
    if (static_cast<int>(run.report.history.size()) >= a.train_scenes) {
        r["fit"]["cycle_loss_ratio"] = cycle_loss_ratio(run.report, a.train_scenes);
    }
    r["heldout_psnr"] = run.heldout_psnr;
    r["parameters"] = {{"trainable", model.params().count(true)},
                       {"frozen", model.params().count(false) + provider->parameter_count()}};
    r["outputs"] = {{"weights", file_entry(weights)}, {"log", file_entry(log)}};
    r["threads"] = threads;
    r["timings"] = {{"data_s", data_s}, {"fit_s", fit_s}};
    write_json(a.common.out / "report.json", r);
    std::cout << "loss " << run.report.initial_loss() << " -> " << run.report.final_loss() << ", held-out PSNR "
              << run.heldout_psnr << " dB\n";
    return kExitOk;
}

} // namespace

void register_fit(CLI::App &app, int &status) {
    auto a = std::make_shared<FitArgs>();
    auto *cmd = app.add_subcommand("fit", "Optimize raw Gaussians against target views, or train on the toy task");
    add_common_options(*cmd, a->common);
    cmd->add_option("--mode", a->mode, "gaussians or network")->check(CLI::IsMember({"gaussians", "network"}));
    cmd->add_option("--steps", a->steps, "Optimizer steps")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lr", a->lr, "Learning rate (default 1e-3 for gaussians, 0.3 for network)");
    cmd->add_option("--momentum", a->momentum, "SGD momentum");
    cmd->add_option("--schedule", a->schedule, "constant or cosine")->check(CLI::IsMember({"constant", "cosine"}));
    cmd->add_option("--perceptual-cmd", a->perceptual_cmd,
                    "Perceptual scorer: command invoked with <pred.mtf> <gt.mtf>, printing a distance");
    cmd->add_option("--ply", a->ply, "Initial Gaussians (gaussians mode)")->check(CLI::ExistingFile);
    cmd->add_option("--images", a->images, "Target PNGs (gaussians mode)")->check(CLI::ExistingFile);
    cmd->add_option("--cameras", a->cameras, "Target cameras (gaussians mode)")->check(CLI::ExistingFile);
    cmd->add_option("--background", a->background, "Background color r,g,b (gaussians mode)");
    cmd->add_option("--train-scenes", a->train_scenes, "Training scenes (network mode)")->check(CLI::PositiveNumber);
    cmd->add_option("--eval-scenes", a->eval_scenes, "Held-out scenes (network mode)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--weights", a->weights, "Initial weights (network mode)")->check(CLI::ExistingFile);
    cmd->callback([a, &status] {
        const int threads = apply_threads(a->common);
        status = a->mode == "network" ? run_fit_network(*a, threads) : run_fit_gaussians(*a, threads);
    });
}

} // namespace monosplat::cli
