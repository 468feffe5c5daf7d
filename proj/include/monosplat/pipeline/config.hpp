// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline configuration, ablation toggles and their JSON form.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "monosplat/features/provider.hpp"

namespace MONOSPLAT_NS {

struct PipelineConfig {
    int planes = 128; // D
    double near = 0.5;
    double far = 100.0;
    bool inverse_depth = false;
    std::int64_t channels = 64;    // C
    std::int64_t mv_channels = 64; // C_mv
    int window = 8;
    int neighbors = 2; // M, capped at views - 1
    int blocks = 3;
    int heads = 1;
    int sh_bands = 16;
    int tile = 16;
    double lambda_lpips = 0.05;
    std::array<float, 3> background{0.0f, 0.0f, 0.0f};
    std::int64_t cost_base = 128;
    std::int64_t refine_base = 32;
    std::int64_t refine_channels = 32;
    double residual_fraction = 0.1;
    SyntheticProviderConfig provider;

    bool mono_in_cost = true;
    bool mono_in_refine = true;
    bool cross_aggregation = true;
    bool dpt = true;

    std::uint64_t seed = 0;

    void validate() const;
    /// One of no-mf, mf-in-cost, mf-in-refine, no-cross, no-dpt.
    void apply_ablation(const std::string &name);
    static const std::vector<std::string> &ablation_names();
};

nlohmann::json to_json(const PipelineConfig &cfg);
/// Missing keys keep the values already in `base`; unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json &j, PipelineConfig base = {});

} // namespace monosplat
