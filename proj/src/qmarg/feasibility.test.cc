#include "qmarg/feasibility.h"

#include <gtest/gtest.h>

#include <numbers>

#include "qmarg/forcing.h"
#include "qmarg/verify.h"
#include "support.h"

using namespace qmarg;

namespace {

void expect_valid_witness(const FeasibilityWitness &w, const DensityMatrix &ref, const SubsetSpec &spec) {
    EXPECT_LE(w.residual, 1e-8);
    EXPECT_TRUE(marginals_match(ref, w.state, spec, 1e-8).match);
    EXPECT_TRUE(is_psd(w.state.matrix(), 1e-9));
    EXPECT_NEAR(w.state.matrix().trace(), 1, 1e-9);
    EXPECT_GT(w.trace_distance, 1e-6);
    EXPECT_NEAR(w.trace_distance, trace_distance(w.state, ref), 1e-12);
}

DensityMatrix ghz3() { return DensityMatrix(make_gghz(3, std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2)); }

}  // namespace

TEST(MarginalProjector, ProjectsOntoConstraints) {
    std::mt19937_64 rng(1);
    DensityMatrix ref = qmarg::testing::random_density(rng, 3, 2);
    MarginalSet target = marginal_set(ref, SubsetSpec::all_k(2));
    MarginalProjector p(target);
    EXPECT_TRUE(p.consistent());
    EXPECT_GT(p.constraint_rank(), 0u);

    HermitianMatrix x = qmarg::testing::random_hermitian(rng, 8);
    HermitianMatrix px = p.project(x);
    EXPECT_LE(marginal_residual(DensityMatrix(3, px), target), 1e-12);
    EXPECT_LE(max_abs_diff(p.project(px).matrix(), px.matrix()), 1e-12);
    EXPECT_LE(max_abs_diff(p.project(ref.matrix()).matrix(), ref.matrix().matrix()), 1e-12);

    // Orthogonality: x - P(x) is orthogonal to every difference of feasible points.
    HermitianMatrix py = p.project(qmarg::testing::random_hermitian(rng, 8));
    cd inner = 0;
    ComplexMatrix d1 = (x - px).matrix(), d2 = (py - px).matrix();
    for (size_t i = 0; i < 64; ++i) inner += std::conj(d1.data()[i]) * d2.data()[i];
    EXPECT_LE(std::abs(inner), 1e-10);
}

TEST(MarginalProjector, DetectsInconsistentMarginals) {
    DensityMatrix a(make_w(3)), b(make_gghz(3, 0.6, 0.8));
    MarginalSet ms = marginal_set(a, SubsetSpec::parse("1,2;2,3"));
    ms.reduced[1] = partial_trace(b, {2, 3});
    MarginalProjector p(ms);
    EXPECT_FALSE(p.consistent());
    EXPECT_GT(p.inconsistency(), 0.1);
}

TEST(MarginalProjector, LowRankRefinementRecoversUniqueState) {
    std::mt19937_64 rng(2);
    DensityMatrix ref(make_gw({{0.3, 0.5, 0.6, std::sqrt(1 - 0.09 - 0.25 - 0.36)}}));
    MarginalProjector p(marginal_set(ref, SubsetSpec::star()));
    HermitianMatrix start = psd_project(ref.matrix() + qmarg::testing::random_hermitian(rng, 8) * 0.01);
    std::optional<HermitianMatrix> x = p.refine_low_rank(start, 1);
    ASSERT_TRUE(x.has_value());
    for (double r : p.residuals(x->matrix())) EXPECT_LE(std::abs(r), 1e-12);
    EXPECT_LE(trace_distance(*x, ref.matrix()), 1e-6);
}

TEST(SearchWitness, GhzThreeAllPairs) {
    DensityMatrix ref = ghz3();
    SearchOptions o;
    o.seeds = 8;
    SearchResult r = search_witness(ref, SubsetSpec::all_k(2), o);
    ASSERT_EQ(r.status, SearchStatus::WitnessFound) << r.message;
    for (const auto &w : r.witnesses) expect_valid_witness(w, ref, SubsetSpec::all_k(2));

    HermitianMatrix mix(8);
    mix.set(0, 0, 0.5);
    mix.set(7, 7, 0.5);
    AnalyticWitnessReport a = verify_analytic_witness(ref, DensityMatrix(3, mix), SubsetSpec::all_k(2));
    EXPECT_TRUE(a.match);
    EXPECT_GE(a.trace_distance, 0.5 - 1e-6);
}

TEST(SearchWitness, Reproducible) {
    DensityMatrix ref = ghz3();
    SearchOptions o;
    o.seeds = 3;
    o.seed = 17;
    SearchResult a = search_witness(ref, SubsetSpec::all_k(2), o);
    SearchResult b = search_witness(ref, SubsetSpec::all_k(2), o);
    ASSERT_EQ(a.witnesses.size(), b.witnesses.size());
    ASSERT_FALSE(a.witnesses.empty());
    for (size_t k = 0; k < a.witnesses.size(); ++k) {
        EXPECT_EQ(a.witnesses[k].seed, b.witnesses[k].seed);
        EXPECT_LE(max_abs_diff(a.witnesses[k].state.matrix().matrix(), b.witnesses[k].state.matrix().matrix()),
                  1e-12);
    }
}

TEST(SearchWitness, WFourPairOfMarginals) {
    std::mt19937_64 rng(3);
    std::vector<cd> w = qmarg::testing::random_unit(rng, 4);
    DensityMatrix ref(make_gw({{0, w[0], w[1], w[2], w[3]}}));
    SubsetSpec spec = SubsetSpec::parse("1,2;3,4");
    SearchOptions o;
    o.seeds = 16;
    o.stop_after = 1;
    SearchResult r = search_witness(ref, spec, o);
    ASSERT_EQ(r.status, SearchStatus::WitnessFound);
    expect_valid_witness(r.witnesses.front(), ref, spec);
    EXPECT_GE(r.witnesses.front().trace_distance, 1e-4);
}

TEST(SearchWitness, GwFiveStarHasNoWitness) {
    CoefficientSampler sampler(11);
    DensityMatrix ref(make_gw(sampler.gw(5)));
    SearchResult r = search_witness(ref, SubsetSpec::star());
    EXPECT_EQ(r.status, SearchStatus::NoWitness);
    EXPECT_TRUE(r.witnesses.empty());
    EXPECT_EQ(r.seeds_run, 64u);
    EXPECT_NE(r.message.find("not a proof"), std::string::npos) << r.message;
}

TEST(SearchWitness, AgreesWithForcing) {
    CoefficientSampler sampler(12);
    for (const SubsetSpec &spec : {SubsetSpec::star(), SubsetSpec::chain()}) {
        DensityMatrix ref(make_gw(sampler.gw(4)));
        ForcingOutcome f = force(marginal_set(ref, spec));
        ASSERT_EQ(f.status, ForcingStatus::FullyForced);
        SearchOptions o;
        o.seeds = 32;
        SearchResult r = search_witness(*f.matrix, spec, o);
        EXPECT_TRUE(r.witnesses.empty()) << spec.name();
    }
}

TEST(SearchWitness, GgSixAllTriples) {
    CoefficientSampler sampler(13);
    GGCoefficients g = sampler.gg(6);
    DensityMatrix ref(make_gg(g));
    SubsetSpec spec = SubsetSpec::all_k(3);
    SearchOptions o;
    o.seeds = 8;
    o.stop_after = 1;
    SearchResult r = search_witness(ref, spec, o);
    ASSERT_EQ(r.status, SearchStatus::WitnessFound);
    expect_valid_witness(r.witnesses.front(), ref, spec);

    auto [difference, mixture] = gg_analytic_witnesses(g);
    EXPECT_TRUE(marginals_match(ref, difference, spec, 1e-10).match);
    EXPECT_TRUE(marginals_match(ref, mixture, spec, 1e-10).match);
}

TEST(SearchWitness, InconsistentTargetIsReportedSeparately) {
    DensityMatrix a(make_w(3)), b(make_gghz(3, 0.6, 0.8));
    MarginalSet ms = marginal_set(a, SubsetSpec::parse("1,2;2,3"));
    ms.reduced[1] = partial_trace(b, {2, 3});
    SearchResult r = search_witness(ms, std::nullopt);
    EXPECT_EQ(r.status, SearchStatus::Inconsistent);
    EXPECT_EQ(r.seeds_run, 0u);

    HermitianMatrix bad(4);
    bad.set(0, 0, 1.5);
    bad.set(3, 3, -0.5);
    MarginalSet neg = marginal_set(a, SubsetSpec::parse("1,2"));
    neg.reduced[0] = DensityMatrix(2, bad);
    EXPECT_EQ(search_witness(neg, std::nullopt).status, SearchStatus::Inconsistent);
}

TEST(SearchWitness, WithoutReferenceStartsFromLeastSquares) {
    SearchOptions o;
    o.seeds = 4;
    SearchResult r = search_witness(marginal_set(ghz3(), SubsetSpec::all_k(2)), std::nullopt, o);
    ASSERT_EQ(r.status, SearchStatus::WitnessFound) << r.message;
    MarginalSet target = marginal_set(ghz3(), SubsetSpec::all_k(2));
    for (const auto &w : r.witnesses) {
        EXPECT_LE(marginal_residual(w.state, target), 1e-8);
        EXPECT_GT(w.trace_distance, 1e-6);
    }
}

TEST(SearchWitness, WithoutReferenceUniqueTargetHasNoWitness) {
    DensityMatrix ref(make_gw({{0.3, 0.5, 0.6, std::sqrt(1 - 0.09 - 0.25 - 0.36)}}));
    SearchOptions o;
    o.seeds = 8;
    SearchResult r = search_witness(marginal_set(ref, SubsetSpec::star()), std::nullopt, o);
    EXPECT_EQ(r.status, SearchStatus::NoWitness) << r.message;
    EXPECT_TRUE(r.witnesses.empty());
}

TEST(SearchWitness, RejectsTooManyQubits) {
    MarginalSet ms;
    ms.n_qubits = 9;
    EXPECT_THROW(search_witness(ms, std::nullopt), std::invalid_argument);
}

TEST(VerifyAnalyticWitness, GgSevenCandidates) {
    CoefficientSampler sampler(14);
    GGCoefficients g = sampler.gg(7);
    DensityMatrix ref(make_gg(g));
    auto [difference, mixture] = gg_analytic_witnesses(g);
    for (const DensityMatrix *w : {&difference, &mixture}) {
        AnalyticWitnessReport a = verify_analytic_witness(ref, *w, SubsetSpec::all_k(4), 1e-10);
        EXPECT_TRUE(a.match);
        EXPECT_TRUE(a.witness_is_state);
        EXPECT_LE(a.max_deviation, 1e-10);
        EXPECT_GT(a.trace_distance, 1e-3);
        EXPECT_FALSE(verify_analytic_witness(ref, *w, SubsetSpec::parse("1,2,3,4,5;3,4,5,6,7")).match);
    }
}

TEST(VerifyAnalyticWitness, GghzMixture) {
    DensityMatrix ref(make_gghz(4, 0.6, 0.8));
    HermitianMatrix mix(16);
    mix.set(0, 0, 0.36);
    mix.set(15, 15, 0.64);
    AnalyticWitnessReport a = verify_analytic_witness(ref, DensityMatrix(4, mix), SubsetSpec::all_k(3));
    EXPECT_TRUE(a.match);
    EXPECT_NEAR(a.trace_distance, 0.6 * 0.8, 1e-12);
    EXPECT_NEAR(a.trace_distance, gghz_mixture_distance(0.6, 0.8), 1e-12);
}

TEST(WitnessJson, Shape) {
    SearchOptions o;
    o.seeds = 2;
    SearchResult r = search_witness(ghz3(), SubsetSpec::all_k(2), o);
    ASSERT_FALSE(r.witnesses.empty());
    nlohmann::json j = witness_to_json(r.witnesses.front());
    for (const char *key : {"seed", "trace_distance", "residual", "state"}) EXPECT_TRUE(j.contains(key)) << key;
    nlohmann::json s = search_to_json(r);
    EXPECT_EQ(s["status"], "WitnessFound");
}
