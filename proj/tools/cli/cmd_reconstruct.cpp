// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// reconstruct and depth.
#include <iostream>

#include "common.hpp"
#include "monosplat/io/image_io.hpp"
#include "monosplat/io/ply.hpp"
#include "monosplat/numerics/hash.hpp"
#include "monosplat/pipeline/model.hpp"

namespace monosplat::cli {

namespace {

struct ViewArgs {
    CommonOptions common;
    std::vector<std::filesystem::path> images;
    std::filesystem::path cameras;
    std::filesystem::path weights;
};

void add_view_options(CLI::App &cmd, ViewArgs &a) {
    add_common_options(cmd, a.common);
    cmd.add_option("--images", a.images, "Input PNGs, one per view")->required()->check(CLI::ExistingFile);
    cmd.add_option("--cameras", a.cameras, "Camera file, one JSON object per line")
        ->required()
        ->check(CLI::ExistingFile);
    cmd.add_option("--weights", a.weights, "Trained weights (default: seeded initialization)")
        ->check(CLI::ExistingFile);
}

struct Loaded {
    PipelineConfig cfg;
    std::unique_ptr<FeatureProvider> provider;
    std::unique_ptr<MonoSplatModel> model;
    std::vector<ViewInput> views;
    nlohmann::json inputs;
    double features_s = 0.0;
};

Loaded load(const ViewArgs &a, Stopwatch &clock) {
    Loaded l;
    l.cfg = resolve_config(a.common);
    std::vector<Camera> cams = read_cameras(a.cameras);
    if (cams.size() != a.images.size()) {
        throw std::invalid_argument("camera file has " + std::to_string(cams.size()) + " views but " +
                                    std::to_string(a.images.size()) + " images were given");
    }
    std::vector<Tensor> images;
    l.inputs["images"] = nlohmann::json::array();
    for (const auto &p : a.images) {
        images.push_back(read_png(p));
        l.inputs["images"].push_back(file_entry(p));
    }
    l.inputs["cameras"] = file_entry(a.cameras);
    l.model = std::make_unique<MonoSplatModel>(l.cfg);
    if (!a.weights.empty()) {
        l.model->load_weights(a.weights);
        l.inputs["weights"] = file_entry(a.weights);
    }
    l.provider = make_provider(a.common.provider, l.cfg.provider);
    clock.lap();
    l.views = prepare_views(*l.provider, images, cams);
    l.features_s = clock.lap();
    return l;
}

nlohmann::json base_report(const std::string &command, const Loaded &l, int threads) {
    nlohmann::json r;
    r["command"] = command;
    r["config"] = to_json(l.cfg);
    r["inputs"] = l.inputs;
    r["provider"] = {{"name", l.provider->name()}, {"state_hash", l.provider->state_hash()}};
    r["parameters"] = {{"trainable", l.model->params().count(true)},
                       {"frozen", l.model->params().count(false) + l.provider->parameter_count()},
                       {"weights_sha256", l.model->weights_hash()}};
    r["threads"] = threads;
    return r;
}

int run_reconstruct(const ViewArgs &a) {
    Stopwatch clock;
    const int threads = apply_threads(a.common);
    if (a.images.size() < 2) {
        throw std::invalid_argument("reconstruct needs at least two views");
    }
    Loaded l = load(a, clock);
    Tape t;
    const ForwardOutput out = l.model->forward(t, l.views);
    const GaussianSet g = out.merged.materialize();
    g.mu.require_finite("gaussian centers");
    const double forward_s = clock.lap();

    std::filesystem::create_directories(a.common.out);
    const auto ply = a.common.out / "gaussians.ply";
    write_ply(ply, g);
    nlohmann::json depths = nlohmann::json::array();
    for (std::size_t i = 0; i < out.views.size(); ++i) {
        const auto path = a.common.out / ("depth_" + std::to_string(i) + ".pfm");
        write_pfm(path, out.views[i].gaussians.depth.value());
        depths.push_back(file_entry(path));
    }
    const double write_s = clock.lap();

    nlohmann::json r = base_report("reconstruct", l, threads);
    r["outputs"] = {{"ply", file_entry(ply)}, {"depth", depths}, {"gaussians", g.size()}};
    r["self_attention_only"] = out.self_attention_only;
    r["timings"] = {{"features_s", l.features_s}, {"forward_s", forward_s}, {"write_s", write_s}};
    write_json(a.common.out / "report.json", r);
    std::cout << "wrote " << g.size() << " Gaussians to " << ply.string() << "\n";
    return kExitOk;
}

int run_depth(const ViewArgs &a) {
    Stopwatch clock;
    const int threads = apply_threads(a.common);
    Loaded l = load(a, clock);
    Tape t;
    const ForwardOutput out = l.model->forward(t, l.views);
    const double forward_s = clock.lap();
    std::filesystem::create_directories(a.common.out);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < out.views.size(); ++i) {
        const Tensor &d = out.views[i].coarse.depth.value();
        d.require_finite("cost-volume depth");
        const auto path = a.common.out / ("cost_depth_" + std::to_string(i) + ".pfm");
        write_pfm(path, d);
        files.push_back(file_entry(path));
    }
    nlohmann::json r = base_report("depth", l, threads);
    r["outputs"] = {{"depth", files}};
    r["candidates"] = l.model->candidates().values;
    r["timings"] = {{"features_s", l.features_s}, {"forward_s", forward_s}};
    write_json(a.common.out / "report.json", r);
    std::cout << "wrote " << files.size() << " cost-volume depth maps to " << a.common.out.string() << "\n";
    return kExitOk;
}

} // namespace

void register_reconstruct(CLI::App &app, int &status) {
    auto args = std::make_shared<ViewArgs>();
    auto *cmd = app.add_subcommand("reconstruct", "Predict Gaussians from posed views; writes PLY, depth PFMs and a report");
    add_view_options(*cmd, *args);
    cmd->callback([args, &status] { status = run_reconstruct(*args); });
}

void register_depth(CLI::App &app, int &status) {
    auto args = std::make_shared<ViewArgs>();
    auto *cmd = app.add_subcommand("depth", "Write the softmax-weighted cost-volume depth of every view (H/4)");
    add_view_options(*cmd, *args);
    cmd->callback([args, &status] { status = run_depth(*args); });
}

} // namespace monosplat::cli
