// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale training task on 16x16 synthetic scenes: two input views per
// scene with a third, novel view between them.
#pragma once

#include "monosplat/pipeline/model.hpp"
#include "monosplat/synthscene/scene.hpp"

namespace MONOSPLAT_NS {

PipelineConfig toy_config(std::uint64_t seed);
SceneSpec toy_scene_spec();

struct HeldOutView {
    std::vector<ViewInput> inputs;
    TargetView target;
};

struct ToyTask {
    std::vector<TrainingScene> train;
    std::vector<HeldOutView> eval;
};

/// `train_scenes` scenes for training (targets: both inputs and the novel
/// view) plus `eval_scenes` further scenes whose novel views are held out.
ToyTask make_toy_task(const FeatureProvider &provider, int train_scenes, int eval_scenes, std::uint64_t seed);

struct ToyRun {
    FitReport report;
    double heldout_psnr = 0.0; // mean over the held-out scenes
};

/// Mean loss over the last `cycle` steps divided by the mean over the first
/// `cycle`; training cycles through the scenes, so single steps are not
/// comparable.
double cycle_loss_ratio(const FitReport &report, int cycle);

ToyRun run_toy_training(MonoSplatModel &model, const ToyTask &task, const FitConfig &fit_cfg,
                        const LossConfig &loss = {});

} // namespace monosplat
