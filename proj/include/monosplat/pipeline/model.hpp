// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// The feed-forward model: adapter, integrated cost volume, feature
// refinement and Gaussian heads, with weight persistence and a training step.
#pragma once

#include <filesystem>
#include <memory>

#include "monosplat/costvolume/cost_volume.hpp"
#include "monosplat/features/adapter.hpp"
#include "monosplat/gaussians/predictor.hpp"
#include "monosplat/optim/fit.hpp"
#include "monosplat/optim/loss.hpp"
#include "monosplat/pipeline/config.hpp"
#include "monosplat/renderer/rasterizer.hpp"

namespace MONOSPLAT_NS {

struct ViewInput {
    Tensor image; // [H, W, 3]
    Camera cam;
    ProviderOutput features;
};

/// Runs the frozen provider on every image.
std::vector<ViewInput> prepare_views(const FeatureProvider &provider, const std::vector<Tensor> &images,
                                     const std::vector<Camera> &cams);

struct ViewPrediction {
    GaussianVars gaussians;
    RawCostVolume cost;
    DepthEstimate coarse; // at H/4
    std::vector<int> neighbors;
};

struct ForwardOutput {
    std::vector<ViewPrediction> views;
    GaussianVars merged;
    bool self_attention_only = false;
};

class MonoSplatModel {
  public:
    explicit MonoSplatModel(PipelineConfig cfg);
    MonoSplatModel(const MonoSplatModel &) = delete;
    MonoSplatModel &operator=(const MonoSplatModel &) = delete;

    ForwardOutput forward(Tape &t, const std::vector<ViewInput> &views) const;

    const PipelineConfig &config() const { return cfg_; }
    ParamStore &params() { return store_; }
    const ParamStore &params() const { return store_; }
    std::vector<Parameter *> trainable();
    DepthCandidates candidates() const;

    void save_weights(const std::filesystem::path &path) const;
    /// Names and shapes must match this model exactly.
    void load_weights(const std::filesystem::path &path);
    /// SHA-256 over parameter names and float32 values.
    std::string weights_hash() const;

  private:
    PipelineConfig cfg_;
    ParamStore store_;
    DptFuse dpt_;
    CrossViewTransformer cross_;
    CostRefiner cost_;
    FeatureRefiner refine_;
    GaussianHeads heads_;
};

/// Render settings for a target camera under the pipeline configuration.
RenderSettings target_settings(const PipelineConfig &cfg, const Camera &cam);

/// Folds renderer gradients back onto the tape: the returned scalar has
/// the given gradients with respect to each Gaussian attribute.
Var gradient_surrogate(const GaussianVars &g, const GaussianGrads &grads);

struct TargetView {
    Tensor image;
    Camera cam;
};

struct TrainingScene {
    std::vector<ViewInput> inputs;
    std::vector<TargetView> targets;
};

/// Forward, render every target, and accumulate the gradient of the mean
/// target loss into the model parameters.
StepResult train_step(MonoSplatModel &model, const TrainingScene &scene, const LossConfig &loss);

/// Reconstructs from `inputs` and reports the PSNR of the render of `target`.
double evaluate_psnr(const MonoSplatModel &model, const std::vector<ViewInput> &inputs, const TargetView &target);

} // namespace monosplat
