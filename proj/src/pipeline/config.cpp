// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/pipeline/config.hpp"

#include <stdexcept>

namespace MONOSPLAT_NS {

void PipelineConfig::validate() const {
    auto fail = [](const std::string &m) { throw std::invalid_argument("config: " + m); };
    if (planes < 2) fail("planes must be at least 2");
    if (!(near > 0.0 && far > near)) fail("need 0 < near < far");
    if (channels < 1 || mv_channels < 1) fail("channel widths must be positive");
    if (window < 1) fail("window must be positive");
    if (neighbors < 0) fail("neighbors must be non-negative");
    if (blocks < 1 || heads < 1) fail("blocks and heads must be positive");
    if (mv_channels % heads != 0 || refine_base % heads != 0 || cost_base % heads != 0) {
        fail("attention widths must be divisible by heads");
    }
    if (sh_bands != 1 && sh_bands != 4 && sh_bands != 9 && sh_bands != 16) fail("sh_bands must be 1, 4, 9 or 16");
    if (tile < 1) fail("tile must be positive");
    if (!(lambda_lpips >= 0.0)) fail("lambda_lpips must be non-negative");
    if (cost_base < 1 || refine_base < 1 || refine_channels < 1) fail("network widths must be positive");
    if (!(residual_fraction > 0.0)) fail("residual_fraction must be positive");
    if (provider.num_scales < 1 || provider.channels < 1 || provider.mono_channels < 1) {
        fail("provider scales and channels must be positive");
    }
}

const std::vector<std::string> &PipelineConfig::ablation_names() {
    static const std::vector<std::string> names{"no-mf", "mf-in-cost", "mf-in-refine", "no-cross", "no-dpt"};
    return names;
}

void PipelineConfig::apply_ablation(const std::string &name) {
    if (name == "no-mf") {
        mono_in_cost = false;
        mono_in_refine = false;
    } else if (name == "mf-in-cost") {
        mono_in_refine = false;
    } else if (name == "mf-in-refine") {
        mono_in_cost = false;
    } else if (name == "no-cross") {
        cross_aggregation = false;
    } else if (name == "no-dpt") {
        dpt = false;
    } else {
        throw std::invalid_argument("unknown ablation '" + name + "'");
    }
}

nlohmann::json to_json(const PipelineConfig &c) {
    return {
        {"planes", c.planes},
        {"near", c.near},
        {"far", c.far},
        {"inverse_depth", c.inverse_depth},
        {"channels", c.channels},
        {"mv_channels", c.mv_channels},
        {"window", c.window},
        {"neighbors", c.neighbors},
        {"blocks", c.blocks},
        {"heads", c.heads},
        {"sh_bands", c.sh_bands},
        {"tile", c.tile},
        {"lambda_lpips", c.lambda_lpips},
        {"background", c.background},
        {"cost_base", c.cost_base},
        {"refine_base", c.refine_base},
        {"refine_channels", c.refine_channels},
        {"residual_fraction", c.residual_fraction},
        {"provider_scales", c.provider.num_scales},
        {"provider_channels", c.provider.channels},
        {"provider_mono_channels", c.provider.mono_channels},
        {"provider_gain", c.provider.gain},
        {"mono_in_cost", c.mono_in_cost},
        {"mono_in_refine", c.mono_in_refine},
        {"cross_aggregation", c.cross_aggregation},
        {"dpt", c.dpt},
        {"seed", c.seed},
    };
}

PipelineConfig config_from_json(const nlohmann::json &j, PipelineConfig c) {
    if (!j.is_object()) {
        throw std::invalid_argument("config: expected a JSON object");
    }
    const nlohmann::json known = to_json(c);
    for (const auto &[key, value] : j.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    auto get = [&](const char *key, auto &dst) {
        if (j.contains(key)) {
            j.at(key).get_to(dst);
        }
    };
    get("planes", c.planes);
    get("near", c.near);
    get("far", c.far);
    get("inverse_depth", c.inverse_depth);
    get("channels", c.channels);
    get("mv_channels", c.mv_channels);
    get("window", c.window);
    get("neighbors", c.neighbors);
    get("blocks", c.blocks);
    get("heads", c.heads);
    get("sh_bands", c.sh_bands);
    get("tile", c.tile);
    get("lambda_lpips", c.lambda_lpips);
    get("background", c.background);
    get("cost_base", c.cost_base);
    get("refine_base", c.refine_base);
    get("refine_channels", c.refine_channels);
    get("residual_fraction", c.residual_fraction);
    get("provider_scales", c.provider.num_scales);
    get("provider_channels", c.provider.channels);
    get("provider_mono_channels", c.provider.mono_channels);
    get("provider_gain", c.provider.gain);
    get("mono_in_cost", c.mono_in_cost);
    get("mono_in_refine", c.mono_in_refine);
    get("cross_aggregation", c.cross_aggregation);
    get("dpt", c.dpt);
    get("seed", c.seed);
    c.provider.seed = c.seed;
    c.validate();
    return c;
}

} // namespace monosplat
