#include "qmarg/verify.h"

#include <chrono>
#include <cmath>
#include <bit>
#include <ctime>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace qmarg {

namespace {

cd gaussian(std::mt19937_64 &rng) {
    std::normal_distribution<double> normal;
    double re = normal(rng);
    double im = normal(rng);
    return {re, im};
}

std::string subsets_label(const std::vector<QubitSet> &subsets) {
    std::string out;
    for (size_t s = 0; s < subsets.size(); ++s) {
        if (s) out += ";";
        for (size_t i = 0; i < subsets[s].size(); ++i) {
            if (i) out += ",";
            out += std::to_string(subsets[s][i]);
        }
    }
    return out;
}

CheckResult timed(const std::string &name, const std::function<void(CheckResult &)> &body) {
    CheckResult r;
    r.name = name;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception &e) {
        r.passed = false;
        r.detail["error"] = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Forces `ms`, replays the log and compares against the true state.
void forcing_check(CheckResult &r, const MarginalSet &ms, const DensityMatrix &truth, const VerifyOptions &opts,
                   bool chain) {
    ForcingOptions fo;
    fo.policy = opts.policy;
    ForcingOutcome out = chain ? force_chain(ms, fo) : force(ms, fo);
    ReplayReport replay = replay_log(out, ms, opts.policy);
    r.tolerance = opts.policy.feasibility;
    r.detail["status"] = status_name(out.status);
    r.detail["log_steps"] = out.log.size();
    r.detail["replay_passed"] = replay.all_passed;
    if (!out.message.empty()) r.detail["message"] = out.message;
    if (out.status == ForcingStatus::FullyForced) {
        r.deviation = trace_distance(*out.matrix, truth);
        r.passed = replay.all_passed && r.deviation <= r.tolerance;
    } else {
        r.detail["free_entries"] = out.free_entries.size();
        r.passed = false;
    }
}

// The negative direction on forcing alone: the smaller marginal set must not pin the state down.
void not_forced_check(CheckResult &r, const MarginalSet &ms, const VerifyOptions &opts) {
    ForcingOptions fo;
    fo.policy = opts.policy;
    ForcingOutcome out = force(ms, fo);
    r.detail["status"] = status_name(out.status);
    r.detail["free_entries"] = out.free_entries.size();
    r.detail["subsets"] = subsets_label(ms.subsets);
    r.passed = out.status != ForcingStatus::FullyForced;
}

MarginalSet explicit_marginals(const DensityMatrix &rho, std::vector<QubitSet> subsets) {
    return marginal_set(rho, SubsetSpec::of(std::move(subsets)));
}

std::string trial_name(size_t t, const std::string &what) { return "trial " + std::to_string(t) + ": " + what; }

void require_range(size_t n, size_t lo, size_t hi, const std::string &theorem) {
    if (n < lo || n > hi)
        throw std::invalid_argument("theorem " + theorem + " needs " + std::to_string(lo) + " <= n <= " +
                                    std::to_string(hi) + ", got " + std::to_string(n));
}

void theorem1(const VerifyOptions &o, VerificationReport &rep) {
    require_range(o.n, 3, 8, "1");
    for (size_t t = 0; t < o.trials; ++t) {
        rep.checks.push_back(timed(trial_name(t, "star marginals force the state"), [&](CheckResult &r) {
            CoefficientSampler sampler(o.seed, t);
            DensityMatrix rho(make_gw(sampler.gw(o.n)));
            forcing_check(r, marginal_set(rho, SubsetSpec::star()), rho, o, false);
        }));
    }

    CoefficientSampler sampler(o.seed, o.trials);
    GWCoefficients w = sampler.w_only(o.n);
    DensityMatrix rho(make_gw(w));
    if (o.n != 4) {
        rep.checks.push_back(timed("N-2 star marginals leave the state open", [&](CheckResult &r) {
            std::vector<QubitSet> subsets;
            for (size_t k = 2; k < o.n; ++k) subsets.push_back({1, k});
            not_forced_check(r, explicit_marginals(rho, subsets), o);
        }));
        return;
    }

    // N = 4: every pair of bipartite marginals of the W-type state with c_0 = 0.
    std::vector<QubitSet> pairs = SubsetSpec::all_k(2).subsets(4);
    SearchOptions so;
    so.seeds = o.search_seeds;
    so.max_iters = o.max_iters;
    so.epsilon = o.epsilon;
    so.seed = o.seed;
    so.stop_after = 1;
    so.policy = o.policy;
    double best = 0;
    nlohmann::json best_detail;
    for (size_t i = 0; i < pairs.size(); ++i) {
        for (size_t j = i + 1; j < pairs.size(); ++j) {
            std::vector<QubitSet> subsets{pairs[i], pairs[j]};
            std::string label = subsets_label(subsets);
            rep.checks.push_back(timed("marginals " + label + " leave the state open", [&](CheckResult &r) {
                MarginalSet ms = explicit_marginals(rho, subsets);
                not_forced_check(r, ms, o);
                SearchResult sr = search_witness(ms, rho, so);
                r.detail["search"] = search_status_name(sr.status);
                r.detail["seeds_run"] = sr.seeds_run;
                for (const auto &wit : sr.witnesses) {
                    if (wit.residual <= o.policy.feasibility && wit.trace_distance > best) {
                        best = wit.trace_distance;
                        best_detail = {{"subsets", label}, {"seed", wit.seed}, {"residual", wit.residual},
                                       {"trace_distance", wit.trace_distance}};
                    }
                }
            }));
        }
    }
    CheckResult found;
    found.name = "a pair of bipartite marginals admits a distinct state";
    found.deviation = best;
    found.tolerance = 1e-4;
    found.passed = best >= 1e-4;
    found.detail = best_detail.is_null() ? nlohmann::json::object() : best_detail;
    rep.checks.push_back(found);
}

void theorem2(const VerifyOptions &o, VerificationReport &rep) {
    require_range(o.n, 3, 7, "2");
    for (size_t t = 0; t < o.trials; ++t) {
        CoefficientSampler sampler(o.seed, t);
        DensityMatrix rho(make_gw(sampler.gw(o.n)));
        MarginalSet ms = marginal_set(rho, SubsetSpec::chain());
        rep.checks.push_back(timed(trial_name(t, "chain marginals force the state"),
                                   [&](CheckResult &r) { forcing_check(r, ms, rho, o, true); }));
        if (o.n > 5) continue;
        rep.checks.push_back(timed(trial_name(t, "general forcing agrees"), [&](CheckResult &r) {
            ForcingOptions fo;
            fo.policy = o.policy;
            ForcingOutcome a = force_chain(ms, fo);
            ForcingOutcome b = force(ms, fo);
            r.detail["chain_status"] = status_name(a.status);
            r.detail["general_status"] = status_name(b.status);
            r.tolerance = o.policy.feasibility;
            r.passed = a.status == b.status;
            if (r.passed && a.matrix && b.matrix) {
                r.deviation = max_abs_diff(a.matrix->matrix().matrix(), b.matrix->matrix().matrix());
                r.passed = r.deviation <= r.tolerance;
            }
        }));
    }

    CoefficientSampler sampler(o.seed, o.trials);
    DensityMatrix rho(make_gw(sampler.gw(o.n)));
    size_t cut = o.n / 2;
    rep.checks.push_back(timed("chain without link " + std::to_string(cut) + "," + std::to_string(cut + 1) +
                                   " leaves the state open",
                               [&](CheckResult &r) {
                                   std::vector<QubitSet> subsets;
                                   for (size_t k = 1; k < o.n; ++k)
                                       if (k != cut) subsets.push_back({k, k + 1});
                                   not_forced_check(r, explicit_marginals(rho, subsets), o);
                               }));
}

void theorem3(const VerifyOptions &o, VerificationReport &rep) {
    require_range(o.n, 4, 8, "3");
    if (rep.l < 2 || rep.l > o.n / 2)
        throw std::invalid_argument("theorem 3 needs 2 <= l <= n/2, got l = " + std::to_string(rep.l));
    for (size_t t = 0; t < o.trials; ++t) {
        rep.checks.push_back(
            timed(trial_name(t, std::to_string(rep.l + 1) + "-partite marginals through qubit 1 force the state"),
                  [&](CheckResult &r) {
                      CoefficientSampler sampler(o.seed, t);
                      DensityMatrix rho(make_dicke(sampler.dicke(o.n, rep.l)));
                      forcing_check(r, marginal_set(rho, SubsetSpec::star_k(rep.l + 1)), rho, o, false);
                  }));
    }
    CoefficientSampler sampler(o.seed, o.trials);
    DensityMatrix rho(make_dicke(sampler.dicke(o.n, rep.l)));
    rep.checks.push_back(
        timed("all " + std::to_string(rep.l) + "-partite marginals leave the state open",
              [&](CheckResult &r) { not_forced_check(r, marginal_set(rho, SubsetSpec::all_k(rep.l)), o); }));
}

void theorem4(const VerifyOptions &o, VerificationReport &rep) {
    require_range(o.n, 6, 8, "4");
    QubitSet left, right;
    for (size_t q = 1; q <= o.n - 2; ++q) left.push_back(q);
    for (size_t q = 3; q <= o.n; ++q) right.push_back(q);
    for (size_t t = 0; t < o.trials; ++t) {
        CoefficientSampler sampler(o.seed, t);
        GGCoefficients g = sampler.gg(o.n);
        DensityMatrix rho(make_gg(g));
        rep.checks.push_back(timed(trial_name(t, "two (N-2)-partite marginals force the state"), [&](CheckResult &r) {
            forcing_check(r, explicit_marginals(rho, {left, right}), rho, o, false);
        }));
        auto [difference, mixture] = gg_analytic_witnesses(g);
        auto witness = [&](const std::string &what, const DensityMatrix &w) {
            rep.checks.push_back(timed(trial_name(t, what + " shares the (N-3)-partite marginals"), [&](CheckResult &r) {
                AnalyticWitnessReport a = verify_analytic_witness(rho, w, SubsetSpec::all_k(o.n - 3), 1e-10);
                r.deviation = a.max_deviation;
                r.tolerance = 1e-10;
                r.detail["trace_distance"] = a.trace_distance;
                r.detail["is_state"] = a.witness_is_state;
                r.passed = a.match && a.witness_is_state && a.trace_distance > 1e-6;
            }));
        };
        witness("W - W-bar", difference);
        witness("W/W-bar mixture", mixture);
    }
}

void facts(const VerifyOptions &o, VerificationReport &rep) {
    for (size_t n = 5; n <= 8; ++n) {
        rep.checks.push_back(timed("G_" + std::to_string(n) + " bipartite marginal", [&](CheckResult &r) {
            DensityMatrix rho = partial_trace(DensityMatrix(make_g(n)), {1, 2});
            r.deviation = max_abs_diff(rho.matrix().matrix(), g_bipartite_display(n).matrix());
            r.tolerance = 1e-12;
            size_t nonzero = 0;
            for (double e : eigh(rho.matrix()).eigenvalues)
                if (e > 1e-9) ++nonzero;
            r.detail["nonzero_eigenvalues"] = nonzero;
            r.passed = r.deviation <= r.tolerance && nonzero == 3;
        }));
    }
    rep.checks.push_back(timed("G_3 partial transpose", [&](CheckResult &r) {
        DensityMatrix rho = partial_trace(DensityMatrix(make_g(3)), {1, 2});
        std::vector<size_t> second{2};
        double lo = min_eigenvalue(partial_transpose(rho, second));
        r.detail["min_eigenvalue"] = lo;
        r.deviation = std::abs(lo + 1.0 / 6.0);
        r.tolerance = 1e-9;
        r.passed = r.deviation <= r.tolerance;
    }));
    rep.checks.push_back(timed("G_3 to GHZ_3 local map", [&](CheckResult &r) {
        AppliedState out = apply_local(g3_to_ghz_operator(), make_g(3));
        double f = fidelity(out.state, make_gghz(3, std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2));
        r.detail["fidelity"] = f;
        r.deviation = 1 - f;
        r.tolerance = 1e-9;
        r.passed = r.deviation <= r.tolerance;
    }));
    rep.checks.push_back(timed("G_4 in the +/- basis", [&](CheckResult &r) {
        std::vector<cd> amps(16);
        for (size_t i = 0; i < 16; ++i) {
            // <i|+...+> = 1/4, <i|-...-> = (-1)^popcount(i) / 4.
            double sign = (std::popcount(i) % 2) ? -1.0 : 1.0;
            amps[i] = (0.25 - 0.25 * sign) / std::numbers::sqrt2;
        }
        double f = fidelity(make_g(4), PureState(4, amps));
        r.detail["fidelity"] = f;
        r.deviation = 1 - f;
        r.tolerance = 1e-12;
        r.passed = r.deviation <= r.tolerance;
    }));
    rep.checks.push_back(timed("unit-path 4x4 completion", [&](CheckResult &r) {
        const double grid[] = {0.8, 0.9, 1.0, 1.1};
        size_t wrong = 0, psd = 0;
        for (double a : grid)
            for (double b : grid)
                for (double c : grid) {
                    bool p = is_psd(unit_path_matrix(a, b, c), o.policy.psd_slack);
                    bool ones = a == 1.0 && b == 1.0 && c == 1.0;
                    if (p) ++psd;
                    if (p != ones) ++wrong;
                }
        r.detail["psd_points"] = psd;
        r.detail["misclassified"] = wrong;
        r.passed = wrong == 0;
    }));
    rep.checks.push_back(timed("standard D_4^2 invariant", [&](CheckResult &r) {
        DickeCoefficients d{4, 2, std::vector<cd>(6, 1.0 / std::sqrt(6.0))};
        r.deviation = std::abs(dicke42_invariant(d));
        r.tolerance = 1e-12;
        r.passed = r.deviation <= r.tolerance;
    }));
}

}  // namespace

CoefficientSampler::CoefficientSampler(uint64_t seed, uint64_t stream, double min_modulus)
    : min_modulus_(min_modulus) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(stream),
                      static_cast<uint32_t>(stream >> 32)};
    rng_.seed(seq);
}

std::vector<cd> CoefficientSampler::unit_vector(size_t size, const std::vector<bool> &required) {
    for (;;) {
        std::vector<cd> v(size);
        double norm2 = 0;
        for (auto &x : v) {
            x = gaussian(rng_);
            norm2 += std::norm(x);
        }
        double norm = std::sqrt(norm2);
        bool ok = norm > 0;
        for (size_t i = 0; i < size; ++i) {
            v[i] /= norm;
            if (required[i] && std::abs(v[i]) < min_modulus_) ok = false;
        }
        if (ok) return v;
    }
}

GWCoefficients CoefficientSampler::gw(size_t n) {
    std::vector<bool> required(n + 1, true);
    required[0] = false;
    return {unit_vector(n + 1, required)};
}

GWCoefficients CoefficientSampler::w_only(size_t n) {
    std::vector<cd> c = unit_vector(n, std::vector<bool>(n, true));
    c.insert(c.begin(), cd{0});
    return {c};
}

DickeCoefficients CoefficientSampler::dicke(size_t n, size_t excitation) {
    size_t count = weight_strings(n, excitation).size();
    return {n, excitation, unit_vector(count, std::vector<bool>(count, true))};
}

GGCoefficients CoefficientSampler::gg(size_t n) {
    std::vector<cd> v = unit_vector(2 * n, std::vector<bool>(2 * n, true));
    return {std::vector<cd>(v.begin(), v.begin() + n), std::vector<cd>(v.begin() + n, v.end())};
}

std::pair<cd, cd> CoefficientSampler::gghz() {
    std::vector<cd> v = unit_vector(2, {true, true});
    return {v[0], v[1]};
}

bool VerificationReport::passed() const {
    for (const auto &c : checks)
        if (!c.passed) return false;
    return !checks.empty();
}

std::vector<std::string> VerificationReport::failures() const {
    std::vector<std::string> out;
    for (const auto &c : checks)
        if (!c.passed) out.push_back(c.name);
    return out;
}

VerificationReport run_verification(const VerifyOptions &options) {
    VerificationReport rep;
    rep.theorem = options.theorem;
    rep.n = options.n;
    rep.trials = options.trials;
    rep.seed = options.seed;
    rep.coefficient_source = "complex Gaussian, normalized, redrawn below modulus 0.05";
    if (options.theorem == "1") {
        theorem1(options, rep);
    } else if (options.theorem == "2") {
        theorem2(options, rep);
    } else if (options.theorem == "3") {
        rep.l = options.l ? options.l : options.n / 2;
        theorem3(options, rep);
    } else if (options.theorem == "4") {
        theorem4(options, rep);
    } else if (options.theorem == "facts") {
        rep.n = 0;
        rep.trials = 0;
        rep.coefficient_source = "none";
        facts(options, rep);
    } else {
        throw std::invalid_argument("unknown theorem '" + options.theorem + "' (expected 1, 2, 3, 4 or facts)");
    }
    return rep;
}

nlohmann::json report_to_json(const VerificationReport &report) {
    nlohmann::json checks = nlohmann::json::array();
    nlohmann::json runtimes = nlohmann::json::object();
    size_t failed = 0;
    for (const auto &c : report.checks) {
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"deviation", c.deviation},
                          {"tolerance", c.tolerance},
                          {"detail", c.detail}});
        runtimes[c.name] = c.seconds;
        if (!c.passed) ++failed;
    }
    char stamp[32];
    std::time_t now = std::time(nullptr);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return {{"tool", "qmarg"},
            {"version", kToolVersion},
            {"theorem", report.theorem},
            {"parameters",
             {{"n", report.n},
              {"l", report.l},
              {"trials", report.trials},
              {"seed", report.seed},
              {"coefficient_source", report.coefficient_source}}},
            {"passed", report.passed()},
            {"checks_total", report.checks.size()},
            {"checks_failed", failed},
            {"checks", checks},
            {"timestamp", {{"utc", stamp}, {"runtimes_s", runtimes}}}};
}

HermitianMatrix g_bipartite_display(size_t n) {
    HermitianMatrix m(4);
    double s = 1.0 / (2.0 * static_cast<double>(n));
    m.set(0, 0, s * static_cast<double>(n - 2));
    m.set(3, 3, s * static_cast<double>(n - 2));
    m.set(1, 1, 2 * s);
    m.set(2, 2, 2 * s);
    m.set(1, 2, 2 * s);
    return m;
}

LocalOperator g3_to_ghz_operator() {
    cd w = std::polar(1.0, 2 * std::numbers::pi / 3);
    double scale = -1.0 / std::cbrt(std::sqrt(3.0));
    // |0> -> |0> + |1>, |1> -> w|0> + w^2|1>.
    Qubit2x2 f{scale, scale * w, scale, scale * w * w};
    return LocalOperator::uniform(3, f);
}

HermitianMatrix unit_path_matrix(cd a, cd b, cd c) {
    HermitianMatrix m(4);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = i; j < 4; ++j) m.set(i, j, 1.0);
    m.set(0, 2, a);
    m.set(0, 3, b);
    m.set(1, 3, c);
    return m;
}

DensityMatrix gghz_mixture(size_t n, cd a, cd b) {
    HermitianMatrix m(size_t{1} << n);
    m.set(0, 0, std::norm(a));
    m.set(m.dim() - 1, m.dim() - 1, std::norm(b));
    return DensityMatrix(n, m);
}

std::pair<DensityMatrix, DensityMatrix> gg_analytic_witnesses(const GGCoefficients &g) {
    size_t n = g.n_qubits();
    auto [w, wbar] = gg_components(g);
    std::vector<cd> diff(w.size());
    double norm2 = 0;
    for (size_t i = 0; i < w.size(); ++i) {
        diff[i] = w[i] - wbar[i];
        norm2 += std::norm(diff[i]);
    }
    for (auto &x : diff) x /= std::sqrt(norm2);
    DensityMatrix difference(PureState(n, diff));

    ComplexMatrix mix = ComplexMatrix::projector(w) + ComplexMatrix::projector(wbar);
    mix *= 1.0 / mix.trace().real();
    return {difference, DensityMatrix(n, HermitianMatrix(mix))};
}

}  // namespace qmarg
