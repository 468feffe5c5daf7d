// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include <gtest/gtest.h>

#include "monosplat/pipeline/grad_suites.hpp"

using namespace monosplat;

namespace {

class GradSuite : public ::testing::TestWithParam<std::string> {};

} // namespace

TEST_P(GradSuite, MatchesFiniteDifferences) {
    const GradSuiteResult r = run_grad_suite(GetParam());
    EXPECT_GE(r.report.checked, 200);
    EXPECT_TRUE(r.report.passed()) << r.report.failures.size() << " failures, worst " << r.report.worst.param << "["
                                   << r.report.worst.index << "] analytic " << r.report.worst.analytic
                                   << " numeric " << r.report.worst.numeric;
    EXPECT_LT(r.report.max_rel_err, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(All, GradSuite, ::testing::ValuesIn(grad_suite_names()),
                         [](const auto &info) { return info.param; });

TEST(GradSuiteRegistry, UnknownNameThrows) { EXPECT_THROW(run_grad_suite("decoder"), std::invalid_argument); }

TEST(GradSuiteRegistry, SecondSeedAlsoPasses) {
    for (const char *name : {"renderer", "heads"}) {
        EXPECT_TRUE(run_grad_suite(name, 1).report.passed()) << name;
    }
}
