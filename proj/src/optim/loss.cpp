// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/optim/loss.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>

#include "monosplat/numerics/mtf.hpp"
#include "monosplat/optim/metrics.hpp"

namespace MONOSPLAT_NS {

void LossConfig::validate() const {
    if (!(lambda_lpips >= 0.0)) {
        throw std::invalid_argument("lambda_lpips must be non-negative");
    }
    if (perceptual == Perceptual::Plugin && !scorer) {
        throw std::invalid_argument("perceptual plugin enabled without a scorer");
    }
}

PerceptualScorer command_scorer(std::string command) {
    return [command = std::move(command)](const Tensor &pred, const Tensor &gt) {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / ("monosplat_lpips_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
        const fs::path a = dir / "pred.mtf", b = dir / "gt.mtf";
        write_mtf(a, pred);
        write_mtf(b, gt);
        const std::string cmd = command + " '" + a.string() + "' '" + b.string() + "'";
        std::unique_ptr<FILE, int (*)(FILE *)> pipe(popen(cmd.c_str(), "r"), pclose);
        std::string out;
        if (pipe) {
            char buf[256];
            while (std::fgets(buf, sizeof(buf), pipe.get()) != nullptr) {
                out += buf;
            }
        }
        const int status = pipe ? pclose(pipe.release()) : -1;
        fs::remove_all(dir);
        if (status != 0) {
            throw std::runtime_error("perceptual scorer failed: " + command);
        }
        try {
            return std::stod(out);
        } catch (const std::exception &) {
            throw NumericError("perceptual scorer printed no number: '" + out + "'");
        }
    };
}

LossValue photometric_loss(const Tensor &pred, const Tensor &gt, const LossConfig &cfg) {
    cfg.validate();
    LossValue v;
    v.mse = mse(pred, gt);
    v.grad = Tensor(pred.shape());
    const double k = 2.0 / static_cast<double>(pred.size());
    for (std::int64_t i = 0; i < pred.size(); ++i) {
        v.grad[i] = static_cast<Real>(k * (static_cast<double>(pred[i]) - gt[i]));
    }
    if (cfg.perceptual == Perceptual::Plugin && cfg.lambda_lpips > 0.0) {
        v.perceptual = cfg.scorer(pred, gt);
    }
    v.total = v.mse + cfg.lambda_lpips * v.perceptual;
    if (!std::isfinite(v.total)) {
        throw NumericError("non-finite loss");
    }
    return v;
}

} // namespace monosplat
