// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// Options shared by the monosplat subcommands.
#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "monosplat/pipeline/config.hpp"

namespace monosplat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

struct CommonOptions {
    std::optional<int> planes;
    std::optional<double> near;
    std::optional<double> far;
    std::string provider = "synthetic";
    std::vector<std::string> ablate;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = ".";
    std::optional<int> threads;
    std::filesystem::path config;
    std::string preset = "default";
};

void add_common_options(CLI::App &cmd, CommonOptions &o);

/// Preset, then the --config file, then explicit flags, then ablations.
PipelineConfig resolve_config(const CommonOptions &o);

/// Applies --threads and returns the worker count in effect.
int apply_threads(const CommonOptions &o);

nlohmann::json file_entry(const std::filesystem::path &path);
void write_json(const std::filesystem::path &path, const nlohmann::json &j);
std::vector<double> parse_triplet(const std::string &text, const std::string &what);

class Stopwatch {
  public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

  private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void register_reconstruct(CLI::App &app, int &status);
void register_depth(CLI::App &app, int &status);
void register_render(CLI::App &app, int &status);
void register_synth(CLI::App &app, int &status);
void register_bench(CLI::App &app, int &status);
void register_fit(CLI::App &app, int &status);
void register_gradcheck(CLI::App &app, int &status);

} // namespace monosplat::cli
