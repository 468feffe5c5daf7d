// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
// gradcheck. Compiled against the 64-bit library.
#include <cstdio>
#include <memory>

#include <CLI11.hpp>

#include "monosplat/pipeline/grad_suites.hpp"

namespace monosplat::cli {

namespace {

struct GradArgs {
    std::vector<std::string> suites;
    std::uint64_t seed = 0;
    double tol = 1e-3;
};

int run_gradcheck(const GradArgs &a) {
    GradCheckOptions base;
    base.tol = a.tol;
    const auto &names = a.suites.empty() ? grad_suite_names() : a.suites;
    bool ok = true;
    double total = 0.0;
    for (const auto &n : names) {
        const GradSuiteResult r = run_grad_suite(n, a.seed, base);
        total += r.seconds;
        const bool pass = r.report.passed() && r.report.checked >= 200;
        ok = ok && pass;
        std::printf("%-16s %s  checked %5lld  max rel err %.3e  (%.2f s)\n", n.c_str(), pass ? "ok  " : "FAIL",
                    static_cast<long long>(r.report.checked), r.report.max_rel_err, r.seconds);
        if (!r.report.passed()) {
            const auto &w = r.report.worst;
            std::printf("  worst %s[%lld]: analytic %.9e numeric %.9e\n", w.param.c_str(),
                        static_cast<long long>(w.index), w.analytic, w.numeric);
        }
    }
    std::printf("total %.2f s\n", total);
    return ok ? 0 : 3;
}

} // namespace

void register_gradcheck(CLI::App &app, int &status) {
    auto a = std::make_shared<GradArgs>();
    auto *cmd = app.add_subcommand("gradcheck", "Finite-difference checks of the renderer and every trainable block");
    cmd->add_option("--suite", a->suites, "Suite to run (repeatable; default: all)")
        ->check(CLI::IsMember(grad_suite_names()));
    cmd->add_option("--seed", a->seed, "Instance seed");
    cmd->add_option("--tol", a->tol, "Relative error tolerance")->check(CLI::PositiveNumber);
    cmd->callback([a, &status] { status = run_gradcheck(*a); });
}

} // namespace monosplat::cli
