// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/pipeline/toy.hpp"

namespace MONOSPLAT_NS {

PipelineConfig toy_config(std::uint64_t seed) {
    PipelineConfig c;
    c.planes = 32;
    c.channels = 16;
    c.mv_channels = 16;
    c.window = 4;
    c.neighbors = 1;
    c.sh_bands = 4;
    c.cost_base = 16;
    c.refine_base = 8;
    c.refine_channels = 8;
    c.provider.channels = 8;
    c.provider.mono_channels = 8;
    c.seed = seed;
    c.provider.seed = seed;
    return c;
}

SceneSpec toy_scene_spec() {
    SceneSpec s;
    s.width = 16;
    s.height = 16;
    s.views = 3;
    s.focal = 16.0;
    s.planes = 1;
    s.spheres = 2;
    s.depth_min = 30.0;
    s.depth_max = 75.0;
    // 1 to 2 px of disparity at the feature resolution around mid depth
    s.baseline_min = 15.0;
    s.baseline_max = 30.0;
    return s;
}

ToyTask make_toy_task(const FeatureProvider &provider, int train_scenes, int eval_scenes, std::uint64_t seed) {
    const SceneSpec spec = toy_scene_spec();
    ToyTask task;
    auto views_of = [&](std::uint64_t s) {
        const SyntheticScene scene = generate_scene(spec, s);
        std::vector<TargetView> views;
        for (const auto &cam : scene.cameras) {
            views.push_back({raytrace(scene, cam).image, cam});
        }
        return views;
    };
    for (int k = 0; k < train_scenes; ++k) {
        const auto views = views_of(seed * 1000 + static_cast<std::uint64_t>(k));
        TrainingScene ts;
        ts.inputs = prepare_views(provider, {views[0].image, views[2].image}, {views[0].cam, views[2].cam});
        ts.targets = views;
        task.train.push_back(std::move(ts));
    }
    for (int k = 0; k < eval_scenes; ++k) {
        const auto held = views_of(seed * 1000 + 500 + static_cast<std::uint64_t>(k));
        task.eval.push_back(
            {prepare_views(provider, {held[0].image, held[2].image}, {held[0].cam, held[2].cam}), held[1]});
    }
    return task;
}

double cycle_loss_ratio(const FitReport &report, int cycle) {
    const auto n = static_cast<int>(report.history.size());
    if (cycle < 1 || n < cycle) {
        throw ShapeError("cycle_loss_ratio: need at least one full cycle of history");
    }
    double first = 0.0, last = 0.0;
    for (int i = 0; i < cycle; ++i) {
        first += report.history[static_cast<std::size_t>(i)].loss;
        last += report.history[static_cast<std::size_t>(n - cycle + i)].loss;
    }
    return last / first;
}

ToyRun run_toy_training(MonoSplatModel &model, const ToyTask &task, const FitConfig &fit_cfg,
                        const LossConfig &loss) {
    ToyRun run;
    const auto n = task.train.size();
    run.report = fit(
        model.trainable(),
        [&](int step) { return train_step(model, task.train[static_cast<std::size_t>(step) % n], loss); }, fit_cfg);
    for (const auto &h : task.eval) {
        run.heldout_psnr += evaluate_psnr(model, h.inputs, h.target) / static_cast<double>(task.eval.size());
    }
    return run;
}

} // namespace monosplat
