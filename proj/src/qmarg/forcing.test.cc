#include "qmarg/forcing.h"

#include <gtest/gtest.h>

#include <numbers>

#include "support.h"

using namespace qmarg;

namespace {

RuleSet only(std::initializer_list<Rule> rules) {
    RuleSet r{false, false, false, false, false, false, false, false};
    for (Rule x : rules) {
        switch (x) {
            case Rule::R1: r.r1 = true; break;
            case Rule::R2: r.r2 = true; break;
            case Rule::R3: r.r3 = true; break;
            case Rule::R4: r.r4 = true; break;
            case Rule::R5: r.r5 = true; break;
            case Rule::R6: r.r6 = true; break;
            case Rule::R7: r.r7 = true; break;
            case Rule::R8: r.r8 = true; break;
        }
    }
    return r;
}

size_t count_rule(const ForcingOutcome &out, Rule r) {
    size_t n = 0;
    for (const auto &e : out.log)
        if (e.rule == r) ++n;
    return n;
}

GWCoefficients random_gw(std::mt19937_64 &rng, size_t n) {
    for (;;) {
        std::vector<cd> c = qmarg::testing::random_unit(rng, n + 1);
        bool ok = true;
        for (size_t k = 1; k <= n; ++k)
            if (std::abs(c[k]) < 0.05) ok = false;
        if (ok) return {c};
    }
}

// Three rows J, K, 1 and a fourth row that is identically zero; only (J, K) is unknown.
CompletionState minor_pattern(cd cj, cd ck, cd c1) {
    CompletionState st(2, {});
    st.set(0, 0, std::norm(cj));
    st.set(1, 1, std::norm(ck));
    st.set(2, 2, std::norm(c1));
    st.set(0, 2, cj * std::conj(c1));
    st.set(1, 2, ck * std::conj(c1));
    for (size_t i = 0; i < 4; ++i) st.set(i, 3, 0);
    return st;
}

// det of [[|cj|^2, r, cj c1*], [r*, |ck|^2, ck c1*], [c1 cj*, c1 ck*, |c1|^2]].
cd minor_det(cd cj, cd ck, cd c1, cd r) {
    ComplexMatrix m(3);
    m(0, 0) = std::norm(cj);
    m(1, 1) = std::norm(ck);
    m(2, 2) = std::norm(c1);
    m(0, 1) = r;
    m(1, 0) = std::conj(r);
    m(0, 2) = cj * std::conj(c1);
    m(2, 0) = std::conj(m(0, 2));
    m(1, 2) = ck * std::conj(c1);
    m(2, 1) = std::conj(m(1, 2));
    return determinant(m);
}

}  // namespace

TEST(RuleR5, DeterminantFormula) {
    cd cj(0, 0.5), ck = 0.5, c1 = 0.5;
    for (cd r : {cd(0), cd(0.3, -0.1), cd(0, 0.25), cd(-1, 2)}) {
        double formula =
            -std::norm(cj) * std::norm(ck) * std::norm(c1) * std::norm(1.0 - r / (cj * std::conj(ck)));
        EXPECT_NEAR(std::abs(minor_det(cj, ck, c1, r) - formula), 0, 1e-14);
    }
}

TEST(RuleR5, RealPattern) {
    ForcingOptions o;
    o.rules = only({Rule::R5});
    ForcingOutcome out = complete(minor_pattern(0.5, 0.5, 0.5), o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_NEAR(std::abs((*out.matrix)(0, 1) - 0.25), 0, 1e-12);
    ASSERT_EQ(out.log.size(), 1u);
    EXPECT_EQ(out.log[0].rule, Rule::R5);
    EXPECT_EQ(out.log[0].rows.size(), 3u);
    EXPECT_NEAR(std::abs(minor_det(0.5, 0.5, 0.5, (*out.matrix)(0, 1))), 0, 1e-15);
}

TEST(RuleR5, ComplexPattern) {
    ForcingOptions o;
    o.rules = only({Rule::R5});
    ForcingOutcome out = complete(minor_pattern(cd(0, 0.5), 0.5, 0.5), o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_NEAR(std::abs((*out.matrix)(0, 1) - cd(0, 0.25)), 0, 1e-12);
}

TEST(RuleR5, ZeroProductIsLeftToR2) {
    // c_K = 0: the K diagonal is zero, so R2 clears the entry and R5 never fires.
    ForcingOptions o;
    ForcingOutcome out = complete(minor_pattern(0.5, 0, 0.5), o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced);
    EXPECT_EQ((*out.matrix)(0, 1), cd(0));
    EXPECT_EQ(count_rule(out, Rule::R5), 0u);
    EXPECT_GE(count_rule(out, Rule::R2), 1u);
}

TEST(RuleR6, UnitPathCompletion) {
    // Diagonal-normalized path 1-2-3-4 of ones; the chords a, b, c are unknown.
    CompletionState st(2, {});
    for (size_t i = 0; i < 4; ++i) st.set(i, i, 1);
    st.set(0, 1, 1);
    st.set(1, 2, 1);
    st.set(2, 3, 1);
    ForcingOptions o;
    o.rules = only({Rule::R6});
    ForcingOutcome out = complete(st, o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_EQ(count_rule(out, Rule::R6), 3u);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) EXPECT_NEAR(std::abs((*out.matrix)(i, j) - 1.0), 0, 1e-12);
}

TEST(RuleR6, RescaledCompletion) {
    // D M D^dagger with D = diag(d_k e^{i phi_k}); the completion must be the rank-one matrix v v^dagger.
    std::vector<cd> v{cd(0.7, 0.2), cd(-0.3, 0.5), cd(0.1, -0.9), cd(1.2, 0)};
    CompletionState st(2, {});
    for (size_t i = 0; i < 4; ++i) st.set(i, i, std::norm(v[i]));
    for (size_t i = 0; i + 1 < 4; ++i) st.set(i, i + 1, v[i] * std::conj(v[i + 1]));
    ForcingOptions o;
    o.rules = only({Rule::R6});
    ForcingOutcome out = complete(st, o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j)
            EXPECT_NEAR(std::abs((*out.matrix)(i, j) - v[i] * std::conj(v[j])), 0, 1e-12);
}

TEST(RuleR6, NotFiredWithoutTightPath) {
    CompletionState st(2, {});
    for (size_t i = 0; i < 4; ++i) st.set(i, i, 1);
    st.set(0, 1, 0.9);
    st.set(1, 2, 1);
    st.set(2, 3, 1);
    ForcingOptions o;
    o.rules = only({Rule::R6});
    ForcingOutcome out = complete(st, o);
    EXPECT_EQ(out.status, ForcingStatus::Underdetermined);
    EXPECT_EQ(out.free_entries.size(), 3u);
}

TEST(RuleR1R2, SingleQubitMarginalsOfProductState) {
    std::vector<cd> amps(16, 0);
    amps[0] = 1;
    DensityMatrix rho(PureState(4, amps));
    MarginalSet ms = marginal_set(rho, SubsetSpec::all_k(1));
    ForcingOutcome out = force(ms);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_LE(trace_distance(*out.matrix, rho), 1e-12);
    EXPECT_GE(count_rule(out, Rule::R2), 1u);
    EXPECT_TRUE(replay_log(out, ms).all_passed);
}

TEST(RuleR3, FullMarginalIsCopied) {
    std::mt19937_64 rng(1);
    DensityMatrix rho = qmarg::testing::random_density(rng, 3, 3);
    MarginalSet ms = marginal_set(rho, SubsetSpec::all_k(3));
    ForcingOptions o;
    o.rules = only({Rule::R3});
    ForcingOutcome out = force(ms, o);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced);
    EXPECT_LE(max_abs_diff(out.matrix->matrix().matrix(), rho.matrix().matrix()), 1e-14);
    EXPECT_EQ(count_rule(out, Rule::R3), out.log.size());
}

TEST(Force, GwStarUniformCoefficients) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOutcome out = force(ms);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_LE(max_abs_diff(out.matrix->matrix().matrix(), rho.matrix().matrix()), 1e-9);
    EXPECT_GE(count_rule(out, Rule::R4), 1u);
    EXPECT_TRUE(replay_log(out, ms).all_passed);
}

TEST(Force, GwStarRandom) {
    std::mt19937_64 rng(2);
    for (size_t n = 3; n <= 6; ++n) {
        for (int trial = 0; trial < 3; ++trial) {
            DensityMatrix rho(make_gw(random_gw(rng, n)));
            MarginalSet ms = marginal_set(rho, SubsetSpec::star());
            ForcingOutcome out = force(ms);
            ASSERT_EQ(out.status, ForcingStatus::FullyForced) << n << " " << out.message;
            EXPECT_LE(trace_distance(*out.matrix, rho), 1e-8);
            EXPECT_TRUE(replay_log(out, ms).all_passed);
        }
    }
}

TEST(Force, WFourAnyTwoBipartiteMarginals) {
    std::mt19937_64 rng(3);
    std::vector<cd> w = qmarg::testing::random_unit(rng, 4);
    DensityMatrix rho(make_gw({{0, w[0], w[1], w[2], w[3]}}));
    std::vector<QubitSet> pairs = SubsetSpec::all_k(2).subsets(4);
    for (size_t i = 0; i < pairs.size(); ++i)
        for (size_t j = i + 1; j < pairs.size(); ++j) {
            MarginalSet ms = marginal_set(rho, SubsetSpec::of({pairs[i], pairs[j]}));
            ForcingOutcome out = force(ms);
            EXPECT_EQ(out.status, ForcingStatus::Underdetermined) << i << "," << j;
            EXPECT_FALSE(out.free_entries.empty());
            EXPECT_TRUE(replay_log(out, ms).all_passed);
        }
}

TEST(Force, GenericDickeFromStarMarginals) {
    std::mt19937_64 rng(4);
    std::vector<cd> c = qmarg::testing::random_unit(rng, 10);
    DensityMatrix rho(make_dicke({5, 2, c}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star_k(3));
    ForcingOutcome out = force(ms);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_LE(trace_distance(*out.matrix, rho), 1e-8);
    EXPECT_TRUE(replay_log(out, ms).all_passed);
}

TEST(Force, GgSixFromTwoMarginals) {
    std::mt19937_64 rng(5);
    std::vector<cd> v = qmarg::testing::random_unit(rng, 12);
    DensityMatrix rho(make_gg({{v.begin(), v.begin() + 6}, {v.begin() + 6, v.end()}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::parse("1,2,3,4;3,4,5,6"));
    ForcingOutcome out = force(ms);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_LE(trace_distance(*out.matrix, rho), 1e-8);
    EXPECT_GE(count_rule(out, Rule::R8), 1u);
    EXPECT_TRUE(replay_log(out, ms).all_passed);

    ForcingOptions o;
    o.rules.r8 = false;
    EXPECT_NE(force(ms, o).status, ForcingStatus::FullyForced);
}

TEST(Force, PerturbedMarginalIsNeverWronglyForced) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int trial = 0; trial < 20; ++trial) {
        DensityMatrix rho(make_gw(random_gw(rng, 4)));
        MarginalSet ms = marginal_set(rho, SubsetSpec::star());
        size_t m = trial % 3;
        size_t i = pick(rng), j = pick(rng);
        HermitianMatrix h = ms.reduced[m].matrix();
        h.set(i, j, h(i, j) + 1e-3);
        if (trial % 2) h = h * (1.0 / h.trace());
        ms.reduced[m] = DensityMatrix(2, h);
        ForcingOutcome out = force(ms);
        if (out.status == ForcingStatus::FullyForced) {
            EXPECT_TRUE(marginals_match(*out.matrix, ms, 1e-9).match);
            EXPECT_TRUE(is_psd(out.matrix->matrix(), 1e-9));
        }
    }
}

TEST(Force, PerturbedDiagonalIsContradiction) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    HermitianMatrix h = ms.reduced[0].matrix();
    h.set(1, 1, h(1, 1) + 1e-3);
    ms.reduced[0] = DensityMatrix(2, h);
    EXPECT_EQ(force(ms).status, ForcingStatus::Contradiction);
}

TEST(Force, BudgetExhausted) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOptions o;
    o.budget = 3;
    ForcingOutcome out = force(ms, o);
    EXPECT_EQ(out.status, ForcingStatus::Underdetermined);
    EXPECT_NE(out.message.find("budget"), std::string::npos);
    EXPECT_LE(out.iterations, 3u);
    EXPECT_FALSE(out.log.empty());
    EXPECT_TRUE(replay_log(out, ms).all_passed);
}

TEST(Force, RejectsTooManyQubits) {
    MarginalSet ms;
    ms.n_qubits = 9;
    EXPECT_THROW(force(ms), std::invalid_argument);
}

TEST(Force, Deterministic) {
    std::mt19937_64 rng(7);
    DensityMatrix rho(make_gw(random_gw(rng, 5)));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    EXPECT_EQ(outcome_to_json(force(ms)).dump(), outcome_to_json(force(ms)).dump());
}

TEST(ForceChain, GenericFiveQubits) {
    std::mt19937_64 rng(8);
    DensityMatrix rho(make_gw(random_gw(rng, 5)));
    MarginalSet ms = marginal_set(rho, SubsetSpec::chain());
    ForcingOutcome out = force_chain(ms);
    ASSERT_EQ(out.status, ForcingStatus::FullyForced) << out.message;
    EXPECT_LE(trace_distance(*out.matrix, rho), 1e-8);
    EXPECT_TRUE(replay_log(out, ms).all_passed);
}

TEST(ForceChain, ThreeQubitsAgreesWithForce) {
    std::mt19937_64 rng(9);
    DensityMatrix rho(make_gw(random_gw(rng, 3)));
    MarginalSet ms = marginal_set(rho, SubsetSpec::chain());
    ForcingOutcome a = force_chain(ms), b = force(ms);
    ASSERT_EQ(a.status, ForcingStatus::FullyForced);
    ASSERT_EQ(b.status, ForcingStatus::FullyForced);
    EXPECT_LE(max_abs_diff(a.matrix->matrix().matrix(), b.matrix->matrix().matrix()), 1e-12);
    EXPECT_LE(max_abs_diff(a.matrix->matrix().matrix(), rho.matrix().matrix()), 1e-9);
}

TEST(ForceChain, VanishingEndCoefficient) {
    for (size_t n : {3u, 4u}) {
        std::vector<cd> c(n + 1, 0);
        c[0] = 0.4;
        for (size_t k = 1; k < n; ++k) c[k] = std::sqrt((1 - 0.16) / double(n - 1));
        DensityMatrix rho(make_gw({c}));
        MarginalSet ms = marginal_set(rho, SubsetSpec::chain());
        ForcingOutcome out = force_chain(ms);
        ASSERT_EQ(out.status, ForcingStatus::FullyForced) << n << " " << out.message;
        EXPECT_LE(trace_distance(*out.matrix, rho), 1e-8);
        size_t e = excitation_index(n, n);
        for (size_t j = 0; j < rho.dim(); ++j) EXPECT_EQ((*out.matrix)(e, j), cd(0));
    }
}

TEST(ForceChain, VanishingInteriorCoefficientCutsTheChain) {
    // With c_3 = 0 qubit 3 is |0>, and rho^{12} (x) |0><0| (x) rho^{4} shares every chain marginal.
    GWCoefficients c{{0.4, 0.5, 0.5, 0, std::sqrt(1 - 0.16 - 0.5)}};
    DensityMatrix rho(make_gw(c));
    MarginalSet ms = marginal_set(rho, SubsetSpec::chain());
    EXPECT_EQ(force_chain(ms).status, ForcingStatus::Underdetermined);

    std::vector<double> zero{1, 0};
    ComplexMatrix product = kron(kron(partial_trace(rho, {1, 2}).matrix().matrix(), ComplexMatrix::diagonal(zero)),
                                 partial_trace(rho, {4}).matrix().matrix());
    DensityMatrix witness(4, HermitianMatrix(product));
    EXPECT_TRUE(marginals_match(rho, witness, SubsetSpec::chain(), 1e-12).match);
    EXPECT_GT(trace_distance(rho, witness), 0.1);
}

TEST(ForceChain, RejectsOtherDescriptors) {
    DensityMatrix rho(make_w(4));
    EXPECT_THROW(force_chain(marginal_set(rho, SubsetSpec::star())), std::invalid_argument);
}

TEST(Replay, TamperedValueFails) {
    std::mt19937_64 rng(10);
    DensityMatrix rho(make_gw(random_gw(rng, 4)));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOutcome out = force(ms);
    ASSERT_TRUE(replay_log(out, ms).all_passed);
    for (size_t k = 0; k < out.log.size(); ++k) {
        if (out.log[k].rule != Rule::R5 && out.log[k].rule != Rule::R3) continue;
        ForcingOutcome bad = out;
        bad.log[k].value += cd(1e-3, 0);
        ReplayReport r = replay_log(bad, ms);
        EXPECT_FALSE(r.all_passed) << k;
        ASSERT_FALSE(r.failures.empty());
        EXPECT_EQ(r.failures.front().index, k);
    }
}

TEST(Replay, TamperedRowsFail) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOutcome out = force(ms);
    bool tampered = false;
    for (auto &e : out.log) {
        if (e.rule == Rule::R5) {
            e.rows.back() = e.rows.front();
            tampered = true;
            break;
        }
    }
    ASSERT_TRUE(tampered);
    EXPECT_FALSE(replay_log(out, ms).all_passed);
}

TEST(Replay, EmptyLogListsFreeEntries) {
    DensityMatrix rho(make_w(3));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOutcome empty;
    empty.status = ForcingStatus::Underdetermined;
    ReplayReport r = replay_log(empty, ms);
    EXPECT_TRUE(r.all_passed);
    EXPECT_EQ(r.steps_checked, 0u);
    EXPECT_EQ(r.free_entries.size(), 36u);  // upper triangle of 8 x 8
}

TEST(Replay, ReportedMatrixMustMatch) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    MarginalSet ms = marginal_set(rho, SubsetSpec::star());
    ForcingOutcome out = force(ms);
    HermitianMatrix m = out.matrix->matrix();
    m.set(0, 1, m(0, 1) + 1e-3);
    out.matrix = DensityMatrix(3, m);
    EXPECT_FALSE(replay_log(out, ms).all_passed);
}

TEST(OutcomeJson, Shape) {
    DensityMatrix rho(make_gw({{0.5, 0.5, 0.5, 0.5}}));
    ForcingOutcome out = force(marginal_set(rho, SubsetSpec::star()));
    nlohmann::json j = outcome_to_json(out);
    EXPECT_EQ(j["status"], "FullyForced");
    EXPECT_TRUE(j["free_entries"].empty());
    EXPECT_EQ(j["matrix"]["dim"], 16 / 2);
    ASSERT_FALSE(j["log"].empty());
    EXPECT_TRUE(j["log"][0].contains("rule"));
    EXPECT_TRUE(j["log"][0].contains("rows"));
    EXPECT_EQ(j["log"][0]["value"].size(), 2u);
}

TEST(RuleNames, RoundTrip) {
    for (Rule r : {Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5, Rule::R6, Rule::R7, Rule::R8})
        EXPECT_EQ(rule_from_name(rule_name(r)), r);
    EXPECT_THROW(rule_from_name("R9"), std::invalid_argument);
}
