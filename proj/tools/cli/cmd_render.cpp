// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// render, synth and bench.
#include <fstream>
#include <iostream>

#include "common.hpp"
#include "monosplat/io/image_io.hpp"
#include "monosplat/io/ply.hpp"
#include "monosplat/numerics/parallel.hpp"
#include "monosplat/pipeline/model.hpp"
#include "monosplat/pipeline/toy.hpp"
#include "monosplat/synthscene/scene.hpp"

namespace monosplat::cli {

namespace {

struct RenderArgs {
    std::filesystem::path ply;
    std::filesystem::path cameras;
    std::vector<int> views;
    std::string background = "0,0,0";
    int tile = 16;
    std::filesystem::path out = ".";
    std::optional<int> threads;
};

int run_render(const RenderArgs &a) {
    CommonOptions threads_only;
    threads_only.threads = a.threads;
    const int threads = apply_threads(threads_only);
    const GaussianSet g = read_ply(a.ply);
    const std::vector<Camera> cams = read_cameras(a.cameras);
    std::vector<int> views = a.views;
    if (views.empty()) {
        for (int i = 0; i < static_cast<int>(cams.size()); ++i) {
            views.push_back(i);
        }
    }
    const auto bg = parse_triplet(a.background, "--background");
    std::filesystem::create_directories(a.out);
    nlohmann::json outputs = nlohmann::json::array();
    Stopwatch clock;
    double render_s = 0.0;
    for (int v : views) {
        if (v < 0 || v >= static_cast<int>(cams.size())) {
            throw std::invalid_argument("view " + std::to_string(v) + " not in the camera file");
        }
        RenderSettings s = RenderSettings::for_camera(cams[static_cast<std::size_t>(v)]);
        s.background = {static_cast<float>(bg[0]), static_cast<float>(bg[1]), static_cast<float>(bg[2])};
        s.tile = a.tile;
        clock.lap();
        const RenderOutput o = render(g, cams[static_cast<std::size_t>(v)], s);
        render_s += clock.lap();
        o.image.require_finite("rendered image");
        const auto png = a.out / ("render_" + std::to_string(v) + ".png");
        const auto pfm = a.out / ("render_depth_" + std::to_string(v) + ".pfm");
        write_png(png, o.image);
        write_pfm(pfm, o.depth);
        outputs.push_back({{"view", v}, {"image", file_entry(png)}, {"depth", file_entry(pfm)},
                           {"degenerate", o.degenerate}});
    }
    nlohmann::json r;
    r["command"] = "render";
    r["inputs"] = {{"ply", file_entry(a.ply)}, {"cameras", file_entry(a.cameras)}};
    r["settings"] = {{"background", bg}, {"tile", a.tile}};
    r["gaussians"] = g.size();
    r["outputs"] = outputs;
    r["threads"] = threads;
    r["timings"] = {{"render_s", render_s}};
    write_json(a.out / "report.json", r);
    std::cout << "rendered " << views.size() << " views of " << g.size() << " Gaussians\n";
    return kExitOk;
}

struct SynthArgs {
    std::filesystem::path spec;
    bool toy = false;
    std::uint64_t seed = 0;
    std::filesystem::path out = ".";
    std::optional<int> threads;
};

int run_synth(const SynthArgs &a) {
    CommonOptions threads_only;
    threads_only.threads = a.threads;
    apply_threads(threads_only);
    if (a.toy && !a.spec.empty()) {
        throw std::invalid_argument("--toy and --spec are exclusive");
    }
    const SceneSpec spec = a.toy ? toy_scene_spec() : a.spec.empty() ? SceneSpec{} : read_scene_spec(a.spec);
    const SyntheticScene scene = generate_scene(spec, a.seed);
    std::filesystem::create_directories(a.out);
    nlohmann::json views = nlohmann::json::array();
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
        const RaytraceOutput rt = raytrace(scene, scene.cameras[i]);
        const auto png = a.out / ("view_" + std::to_string(i) + ".png");
        const auto pfm = a.out / ("depth_" + std::to_string(i) + ".pfm");
        write_png(png, rt.image);
        write_pfm(pfm, rt.depth);
        views.push_back({{"image", file_entry(png)}, {"depth", file_entry(pfm)}, {"coverage", rt.coverage()}});
    }
    const auto cams = a.out / "cameras.jsonl";
    write_cameras(cams, scene.cameras);
    const auto spec_path = a.out / "scene.txt";
    {
        std::ofstream s(spec_path);
        s << format_scene_spec(spec);
    }
    nlohmann::json r;
    r["command"] = "synth";
    r["seed"] = a.seed;
    r["spec"] = file_entry(spec_path);
    r["cameras"] = file_entry(cams);
    r["views"] = views;
    write_json(a.out / "report.json", r);
    std::cout << "wrote " << scene.cameras.size() << " views to " << a.out.string() << "\n";
    return kExitOk;
}

struct BenchArgs {
    CommonOptions common;
    std::vector<int> sizes{16, 32, 64};
    int repeats = 3;
    int views = 2;
};

int run_bench(const BenchArgs &a) {
    const int threads = apply_threads(a.common);
    const PipelineConfig cfg = resolve_config(a.common);
    MonoSplatModel model(cfg);
    const auto provider = make_provider(a.common.provider, cfg.provider);
    std::filesystem::create_directories(a.common.out);
    const auto csv_path = a.common.out / "bench.csv";
    std::ofstream csv(csv_path);
    if (!csv) {
        throw std::invalid_argument("cannot write " + csv_path.string());
    }
    csv << "stage,size,views,gaussians,threads,repeat,seconds\n";
    for (int size : a.sizes) {
        SceneSpec spec;
        spec.width = size;
        spec.height = size;
        spec.focal = size;
        spec.views = a.views;
        const SyntheticScene scene = generate_scene(spec, cfg.seed);
        std::vector<Tensor> images;
        for (const auto &cam : scene.cameras) {
            images.push_back(raytrace(scene, cam).image);
        }
        const RenderSettings rs = target_settings(cfg, scene.cameras.front());
        for (int rep = 0; rep < a.repeats; ++rep) {
            Stopwatch clock;
            const auto inputs = prepare_views(*provider, images, scene.cameras);
            const double features_s = clock.lap();
            Tape t;
            const GaussianSet g = model.forward(t, inputs).merged.materialize();
            const double build_s = clock.lap();
            const RenderOutput o = render(g, scene.cameras.front(), rs);
            const double render_s = clock.lap();
            for (auto [stage, s] : {std::pair<const char *, double>{"features", features_s}, {"build", build_s},
                                    {"render", render_s}}) {
                csv << stage << "," << size << "," << a.views << "," << g.size() << "," << threads << "," << rep
                    << "," << s << "\n";
            }
            std::cout << "size " << size << " rep " << rep << ": build " << build_s << " s, render " << render_s
                      << " s\n";
        }
    }
    return kExitOk;
}

} // namespace

void register_render(CLI::App &app, int &status) {
    auto a = std::make_shared<RenderArgs>();
    auto *cmd = app.add_subcommand("render", "Render a PLY from cameras in a camera file");
    cmd->add_option("--ply", a->ply, "Gaussian PLY")->required()->check(CLI::ExistingFile);
    cmd->add_option("--cameras", a->cameras, "Camera file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--view", a->views, "Camera indices to render (default: all)");
    cmd->add_option("--background", a->background, "Background color r,g,b");
    cmd->add_option("--tile", a->tile, "Tile size in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--out", a->out, "Output directory");
    cmd->add_option("--threads", a->threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->callback([a, &status] { status = run_render(*a); });
}

void register_synth(CLI::App &app, int &status) {
    auto a = std::make_shared<SynthArgs>();
    auto *cmd = app.add_subcommand("synth", "Generate a textured synthetic scene with cameras and truth depth");
    cmd->add_option("--spec", a->spec, "Scene description (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_flag("--toy", a->toy, "Use the 16x16 training-task scene layout");
    cmd->add_option("--seed", a->seed, "Scene seed");
    cmd->add_option("--out", a->out, "Output directory");
    cmd->add_option("--threads", a->threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->callback([a, &status] { status = run_synth(*a); });
}

void register_bench(CLI::App &app, int &status) {
    auto a = std::make_shared<BenchArgs>();
    auto *cmd = app.add_subcommand("bench", "Time feature extraction, Gaussian prediction and rendering; writes bench.csv");
    add_common_options(*cmd, a->common);
    cmd->add_option("--sizes", a->sizes, "Square image sizes (multiples of 16)")->delimiter(',');
    cmd->add_option("--repeats", a->repeats, "Repetitions per size")->check(CLI::PositiveNumber);
    cmd->add_option("--views", a->views, "Views per scene")->check(CLI::PositiveNumber);
    cmd->callback([a, &status] { status = run_bench(*a); });
}

} // namespace monosplat::cli
