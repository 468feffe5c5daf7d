// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/optim/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace MONOSPLAT_NS {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()> &loss, const std::vector<NamedParameter> &params,
                           const GradCheckOptions &opts) {
    GradCheckReport report;
    std::mt19937_64 rng(opts.seed);
    for (const auto &np : params) {
        Parameter &p = *np.param;
        if (p.grad.shape() != p.value.shape()) {
            throw ShapeError("grad_check: gradient shape differs from value shape for " + np.name);
        }
        std::vector<std::int64_t> idx(static_cast<std::size_t>(p.value.size()));
        std::iota(idx.begin(), idx.end(), 0);
        if (opts.max_samples > 0 && p.value.size() > opts.max_samples) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(static_cast<std::size_t>(opts.max_samples));
            std::sort(idx.begin(), idx.end());
        }
        for (auto i : idx) {
            const Real orig = p.value[i];
            const Real up = static_cast<Real>(orig + opts.h);
            const Real dn = static_cast<Real>(orig - opts.h);
            p.value[i] = up;
            const double lu = loss();
            p.value[i] = dn;
            const double ld = loss();
            p.value[i] = orig;
            GradCheckEntry e;
            e.param = np.name;
            e.index = i;
            e.analytic = p.grad[i];
            e.numeric = (lu - ld) / (static_cast<double>(up) - static_cast<double>(dn));
            e.rel_err = relative_error(e.analytic, e.numeric, opts.floor);
            ++report.checked;
            if (report.checked == 1 || e.rel_err > report.max_rel_err) {
                report.max_rel_err = e.rel_err;
                report.worst = e;
            }
            if (!(e.rel_err < opts.tol)) {
                report.failures.push_back(e);
            }
        }
    }
    return report;
}

} // namespace monosplat
