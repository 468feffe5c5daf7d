// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "common.hpp"

#include <fstream>
#include <sstream>

#include "monosplat/numerics/hash.hpp"
#include "monosplat/numerics/parallel.hpp"
#include "monosplat/pipeline/toy.hpp"

namespace monosplat::cli {

void add_common_options(CLI::App &cmd, CommonOptions &o) {
    cmd.add_option("--planes", o.planes, "Depth candidates D");
    cmd.add_option("--near", o.near, "Nearest depth candidate");
    cmd.add_option("--far", o.far, "Farthest depth candidate");
    cmd.add_option("--provider", o.provider, "Feature provider: synthetic or dir:<path>");
    cmd.add_option("--ablate", o.ablate, "Ablation toggle (repeatable)")
        ->check(CLI::IsMember(PipelineConfig::ablation_names()));
    cmd.add_option("--seed", o.seed, "Seed for weights and synthetic data");
    cmd.add_option("--out", o.out, "Output directory");
    cmd.add_option("--threads", o.threads, "Worker threads (default: MONOSPLAT_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--config", o.config, "JSON pipeline configuration; flags override it")->check(CLI::ExistingFile);
    cmd.add_option("--preset", o.preset, "Base configuration before --config")
        ->check(CLI::IsMember({"default", "toy"}));
}

PipelineConfig resolve_config(const CommonOptions &o) {
    PipelineConfig cfg = o.preset == "toy" ? toy_config(0) : PipelineConfig{};
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) {
            throw std::invalid_argument("cannot read config " + o.config.string());
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception &e) {
            throw std::invalid_argument("config " + o.config.string() + ": " + e.what());
        }
        cfg = config_from_json(j, cfg);
    }
    if (o.planes) {
        cfg.planes = *o.planes;
    }
    if (o.near) {
        cfg.near = *o.near;
    }
    if (o.far) {
        cfg.far = *o.far;
    }
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.provider.seed = *o.seed;
    }
    for (const auto &a : o.ablate) {
        cfg.apply_ablation(a);
    }
    cfg.validate();
    return cfg;
}

int apply_threads(const CommonOptions &o) {
    if (o.threads) {
        set_num_threads(*o.threads);
    }
    return num_threads();
}

nlohmann::json file_entry(const std::filesystem::path &path) {
    return {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void write_json(const std::filesystem::path &path, const nlohmann::json &j) {
    std::ofstream out(path);
    if (!out) {
        throw std::invalid_argument("cannot write " + path.string());
    }
    out << j.dump(2) << "\n";
}

std::vector<double> parse_triplet(const std::string &text, const std::string &what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception &) {
            throw std::invalid_argument(what + ": not a number '" + item + "'");
        }
    }
    if (v.size() != 3) {
        throw std::invalid_argument(what + ": expected three comma-separated values");
    }
    return v;
}

} // namespace monosplat::cli
