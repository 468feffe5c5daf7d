// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/optim/fit.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace MONOSPLAT_NS {

void FitConfig::validate() const {
    if (steps < 0 || !(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || divergence_patience < 1) {
        throw std::invalid_argument("fit: steps >= 0, lr >= 0, momentum in [0, 1), patience >= 1 required");
    }
}

double FitConfig::lr_at(int step) const {
    if (schedule == Schedule::Cosine && steps > 0) {
        return 0.5 * lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / steps));
    }
    return lr;
}

FitReport fit(const std::vector<Parameter *> &params, const StepFn &step, const FitConfig &cfg) {
    cfg.validate();
    std::vector<Parameter *> trainable;
    for (Parameter *p : params) {
        if (p->trainable) {
            trainable.push_back(p);
        }
    }
    std::vector<Tensor> velocity;
    for (Parameter *p : trainable) {
        velocity.emplace_back(p->value.shape());
    }
    std::ofstream log;
    if (cfg.report) {
        log.open(*cfg.report);
        if (!log) {
            throw std::runtime_error("fit: cannot write " + cfg.report->string());
        }
    }
    FitReport report;
    int above = 0;
    for (int s = 0; s < cfg.steps; ++s) {
        for (Parameter *p : trainable) {
            p->zero_grad();
        }
        const StepResult r = step(s);
        if (!std::isfinite(r.loss)) {
            throw NumericError("fit: non-finite loss at step " + std::to_string(s));
        }
        report.history.push_back({s, r.loss, r.psnr});
        if (log) {
            log << nlohmann::json{{"step", s}, {"loss", r.loss}, {"psnr", r.psnr}}.dump() << '\n';
        }
        if (r.loss > cfg.divergence_factor * report.initial_loss()) {
            if (++above >= cfg.divergence_patience) {
                report.diverged = true;
                throw DivergenceError("fit: loss above " + std::to_string(cfg.divergence_factor) +
                                      "x the initial loss for " + std::to_string(above) + " steps");
            }
        } else {
            above = 0;
        }
        const double lr = cfg.lr_at(s);
        if (lr == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < trainable.size(); ++i) {
            Tensor &v = velocity[i];
            Tensor &w = trainable[i]->value;
            const Tensor &g = trainable[i]->grad;
            for (std::int64_t k = 0; k < w.size(); ++k) {
                v[k] = static_cast<Real>(cfg.momentum * v[k] + g[k]);
                w[k] = static_cast<Real>(w[k] - lr * v[k]);
            }
        }
    }
    return report;
}

} // namespace monosplat
