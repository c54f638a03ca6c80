#include "qmarg/verify.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace qmarg;

namespace {

nlohmann::json without_timestamp(nlohmann::json j) {
    j.erase("timestamp");
    return j;
}

}  // namespace

TEST(CoefficientSampler, NormalizedWithModulusFloor) {
    CoefficientSampler s(5);
    for (int t = 0; t < 20; ++t) {
        GWCoefficients c = s.gw(6);
        double norm = 0;
        for (cd x : c.c) norm += std::norm(x);
        EXPECT_NEAR(norm, 1, 1e-12);
        for (size_t k = 1; k < c.c.size(); ++k) EXPECT_GE(std::abs(c.c[k]), 0.05);

        GWCoefficients w = s.w_only(4);
        EXPECT_EQ(w.c.size(), 5u);
        EXPECT_EQ(w.c[0], cd(0));

        auto [a, b] = s.gghz();
        EXPECT_NEAR(std::norm(a) + std::norm(b), 1, 1e-12);
        EXPECT_GE(std::min(std::abs(a), std::abs(b)), 0.05);
    }
    DickeCoefficients d = s.dicke(6, 3);
    EXPECT_EQ(d.c.size(), 20u);
    GGCoefficients g = s.gg(7);
    EXPECT_EQ(g.a.size(), 7u);
    EXPECT_EQ(g.b.size(), 7u);
}

TEST(CoefficientSampler, StreamsAreReproducibleAndDistinct) {
    CoefficientSampler a(9, 1), b(9, 1), c(9, 2);
    std::vector<cd> x = a.gw(5).c, y = b.gw(5).c, z = c.gw(5).c;
    EXPECT_EQ(x, y);
    EXPECT_NE(x, z);
}

TEST(RunVerification, FactsPass) {
    VerifyOptions o;
    o.theorem = "facts";
    VerificationReport r = run_verification(o);
    EXPECT_TRUE(r.passed());
    for (const auto &c : r.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.detail.dump();
    EXPECT_GE(r.checks.size(), 9u);
}

TEST(RunVerification, SmallTheoremsPass) {
    for (const char *theorem : {"1", "2", "3", "4"}) {
        VerifyOptions o;
        o.theorem = theorem;
        o.n = std::string(theorem) == "4" ? 6 : (std::string(theorem) == "3" ? 5 : 3);
        o.trials = 2;
        o.search_seeds = 16;
        VerificationReport r = run_verification(o);
        EXPECT_TRUE(r.passed()) << theorem;
        for (const auto &name : r.failures()) ADD_FAILURE() << theorem << ": " << name;
    }
}

TEST(RunVerification, ReportIsDeterministicApartFromTimestamp) {
    VerifyOptions o;
    o.theorem = "2";
    o.n = 4;
    o.trials = 3;
    o.seed = 42;
    nlohmann::json a = report_to_json(run_verification(o));
    nlohmann::json b = report_to_json(run_verification(o));
    ASSERT_TRUE(a.contains("timestamp"));
    EXPECT_TRUE(a["timestamp"].contains("runtimes_s"));
    EXPECT_EQ(without_timestamp(a), without_timestamp(b));
    EXPECT_EQ(a["parameters"]["seed"], 42);
    EXPECT_EQ(a["version"], kToolVersion);
}

TEST(RunVerification, RejectsBadArguments) {
    VerifyOptions o;
    o.theorem = "5";
    o.n = 4;
    EXPECT_THROW(run_verification(o), std::invalid_argument);
    o.theorem = "1";
    o.n = 2;
    EXPECT_THROW(run_verification(o), std::invalid_argument);
    o.n = 9;
    EXPECT_THROW(run_verification(o), std::invalid_argument);
    o.theorem = "4";
    o.n = 5;
    EXPECT_THROW(run_verification(o), std::invalid_argument);
    o.theorem = "3";
    o.n = 6;
    o.l = 4;
    EXPECT_THROW(run_verification(o), std::invalid_argument);
}

TEST(GghzMixture, SharesMarginalsAtClosedFormDistance) {
    CoefficientSampler s(21);
    for (size_t n = 3; n <= 6; ++n) {
        auto [a, b] = s.gghz();
        DensityMatrix pure(make_gghz(n, a, b));
        DensityMatrix mix = gghz_mixture(n, a, b);
        EXPECT_TRUE(marginals_match(pure, mix, SubsetSpec::all_k(n - 1), 1e-12).match);
        EXPECT_NEAR(trace_distance(pure, mix), gghz_mixture_distance(a, b), 1e-9);
    }
    double h = std::numbers::sqrt2 / 2;
    EXPECT_NEAR(trace_distance(DensityMatrix(make_gghz(3, h, h)), gghz_mixture(3, h, h)), 0.5, 1e-12);
}

TEST(GDisplay, MatchesMarginalAndSpectrum) {
    // The display form needs a GHZ_{N-2} tail that shares no terms with W_{N-2}, so N >= 5.
    for (size_t n = 5; n <= 8; ++n) {
        DensityMatrix r = partial_trace(DensityMatrix(make_g(n)), {1, 2});
        EXPECT_LE(max_abs_diff(r.matrix().matrix(), g_bipartite_display(n).matrix()), 1e-12) << n;
        std::vector<double> e = eigh(g_bipartite_display(n)).eigenvalues;
        double nn = static_cast<double>(n);
        std::vector<double> expected{0, (nn - 2) / (2 * nn), (nn - 2) / (2 * nn), 2 / nn};
        std::sort(e.begin(), e.end());
        std::sort(expected.begin(), expected.end());
        for (size_t k = 0; k < 4; ++k) EXPECT_NEAR(e[k], expected[k], 1e-12) << n;
    }
}

TEST(UnitPathMatrix, PsdOnlyAtAllOnes) {
    EXPECT_TRUE(is_psd(unit_path_matrix(1, 1, 1), 1e-9));
    EXPECT_FALSE(is_psd(unit_path_matrix(1, 1, 0.9), 1e-9));
    EXPECT_FALSE(is_psd(unit_path_matrix(cd(0, 1), 1, 1), 1e-9));
    EXPECT_NEAR(min_eigenvalue(unit_path_matrix(1, 1, 1)), 0, 1e-12);
}

TEST(GThreeOperator, MapsToGhz) {
    AppliedState out = apply_local(g3_to_ghz_operator(), make_g(3));
    double h = std::numbers::sqrt2 / 2;
    EXPECT_NEAR(fidelity(out.state, make_gghz(3, h, h)), 1, 1e-9);
    for (const auto &f : g3_to_ghz_operator().factors()) EXPECT_GT(std::abs(f.det()), 0.1);
}
