#include "qmarg/states.h"

#include <bit>
#include <cmath>
#include <numbers>

namespace qmarg {

namespace {

constexpr double kNormTolerance = 1e-12;
constexpr double kPhaseThreshold = 1e-12;

void require_normalized(double total, const char *what) {
    if (std::abs(total - 1) > kNormTolerance) {
        throw std::invalid_argument(
            std::string(what) + ": squared moduli sum to " + std::to_string(total) + ", expected 1");
    }
}

double squared_norm(std::span<const cd> v) {
    double total = 0;
    for (const auto &z : v) {
        total += std::norm(z);
    }
    return total;
}

void fix_global_phase(std::vector<cd> &amps) {
    for (const auto &z : amps) {
        if (std::abs(z) > kPhaseThreshold) {
            cd phase = std::conj(z) / std::abs(z);
            for (auto &w : amps) {
                w *= phase;
            }
            return;
        }
    }
}

void require_qubits(size_t n, size_t minimum, const char *what) {
    if (n < minimum) {
        throw std::invalid_argument(
            std::string(what) + " needs at least " + std::to_string(minimum) + " qubits, got " + std::to_string(n));
    }
    if (n > 12) {
        throw std::invalid_argument(std::string(what) + ": at most 12 qubits are supported");
    }
}

}  // namespace

std::vector<size_t> weight_strings(size_t n_qubits, size_t weight) {
    std::vector<size_t> out;
    for (size_t x = 0; x < (size_t{1} << n_qubits); x++) {
        if (static_cast<size_t>(std::popcount(x)) == weight) {
            out.push_back(x);
        }
    }
    return out;
}

PureState::PureState(size_t n_qubits, std::vector<cd> amplitudes)
    : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
    if (n_qubits == 0 || amplitudes_.size() != (size_t{1} << n_qubits)) {
        throw std::invalid_argument(
            "state on " + std::to_string(n_qubits) + " qubits needs 2^n amplitudes, got " +
            std::to_string(amplitudes_.size()));
    }
    double total = squared_norm(amplitudes_);
    if (std::abs(total - 1) > 1e-10) {
        throw std::invalid_argument("state is not normalized (norm^2 = " + std::to_string(total) + ")");
    }
    fix_global_phase(amplitudes_);
}

HermitianMatrix PureState::projector() const {
    return HermitianMatrix(ComplexMatrix::projector(amplitudes_));
}

double fidelity(const PureState &a, const PureState &b) {
    return fidelity(a.amplitudes(), b.amplitudes());
}

std::vector<std::string> GWCoefficients::warnings() const {
    std::vector<std::string> out;
    size_t nonzero = 0;
    for (size_t k = 1; k < c.size(); k++) {
        if (std::abs(c[k]) > kPhaseThreshold) {
            nonzero++;
        }
    }
    if (nonzero < 3) {
        out.push_back(
            "only " + std::to_string(nonzero) +
            " of c_1..c_N are nonzero; the state is at most bipartite entangled and is determined trivially");
    }
    if (c.size() > 1 && std::abs(c[1]) <= kPhaseThreshold) {
        out.push_back("c_1 = 0; relabel the qubits so that qubit 1 carries a nonzero coefficient");
    }
    return out;
}

LocalOperator::LocalOperator(std::vector<Qubit2x2> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
        throw std::invalid_argument("local operator needs at least one factor");
    }
    for (size_t k = 0; k < factors_.size(); k++) {
        if (std::abs(factors_[k].det()) <= 1e-12) {
            throw std::invalid_argument("factor for qubit " + std::to_string(k + 1) + " is not invertible");
        }
    }
}

LocalOperator LocalOperator::identity(size_t n_qubits) {
    return LocalOperator(std::vector<Qubit2x2>(n_qubits));
}

LocalOperator LocalOperator::uniform(size_t n_qubits, const Qubit2x2 &factor) {
    return LocalOperator(std::vector<Qubit2x2>(n_qubits, factor));
}

PureState make_w(size_t n) {
    require_qubits(n, 2, "W state");
    std::vector<cd> amps(size_t{1} << n);
    double amp = 1 / std::sqrt(static_cast<double>(n));
    for (size_t k = 1; k <= n; k++) {
        amps[excitation_index(n, k)] = amp;
    }
    return PureState(n, std::move(amps));
}

PureState make_gw(const GWCoefficients &c) {
    size_t n = c.n_qubits();
    require_qubits(n, 2, "GW state");
    require_normalized(squared_norm(c.c), "GW coefficients");
    std::vector<cd> amps(size_t{1} << n);
    amps[0] = c.c[0];
    for (size_t k = 1; k <= n; k++) {
        amps[excitation_index(n, k)] = c.c[k];
    }
    return PureState(n, std::move(amps));
}

PureState make_gghz(size_t n, cd a, cd b) {
    require_qubits(n, 2, "GGHZ state");
    require_normalized(std::norm(a) + std::norm(b), "GGHZ coefficients");
    if (std::abs(a * b) <= kPhaseThreshold) {
        throw std::invalid_argument("GGHZ coefficients need a*b != 0 (otherwise the state is a product state)");
    }
    std::vector<cd> amps(size_t{1} << n);
    amps.front() = a;
    amps.back() = b;
    return PureState(n, std::move(amps));
}

PureState make_dicke(const DickeCoefficients &d) {
    require_qubits(d.n_qubits, 2, "Dicke state");
    if (d.excitation < 1 || d.excitation > d.n_qubits / 2) {
        throw std::invalid_argument(
            "Dicke excitation must lie in 1..floor(N/2), got " + std::to_string(d.excitation));
    }
    auto support = weight_strings(d.n_qubits, d.excitation);
    if (d.c.size() != support.size()) {
        throw std::invalid_argument(
            "Dicke state needs " + std::to_string(support.size()) + " coefficients, got " +
            std::to_string(d.c.size()));
    }
    require_normalized(squared_norm(d.c), "Dicke coefficients");
    std::vector<cd> amps(size_t{1} << d.n_qubits);
    for (size_t k = 0; k < support.size(); k++) {
        if (std::abs(d.c[k]) <= kPhaseThreshold) {
            throw std::invalid_argument("generic Dicke coefficients must all be nonzero");
        }
        amps[support[k]] = d.c[k];
    }
    return PureState(d.n_qubits, std::move(amps));
}

PureState make_g(size_t n) {
    require_qubits(n, 3, "G state");
    GGCoefficients g;
    cd amp = 1 / std::sqrt(2.0 * static_cast<double>(n));
    g.a.assign(n, amp);
    g.b.assign(n, amp);
    return make_gg(g);
}

std::pair<std::vector<cd>, std::vector<cd>> gg_components(const GGCoefficients &g) {
    size_t n = g.n_qubits();
    if (g.b.size() != n) {
        throw std::invalid_argument("GG coefficients: a and b must have the same length");
    }
    size_t full = (size_t{1} << n) - 1;
    std::vector<cd> w(full + 1);
    std::vector<cd> wbar(full + 1);
    for (size_t k = 1; k <= n; k++) {
        w[excitation_index(n, k)] = g.a[k - 1];
        wbar[full ^ excitation_index(n, k)] = g.b[k - 1];
    }
    return {std::move(w), std::move(wbar)};
}

PureState make_gg(const GGCoefficients &g) {
    size_t n = g.n_qubits();
    require_qubits(n, 3, "GG state");
    auto [w, wbar] = gg_components(g);
    require_normalized(squared_norm(g.a) + squared_norm(g.b), "GG coefficients");
    for (size_t k = 0; k < n; k++) {
        if (std::abs(g.a[k] * g.b[k]) <= kPhaseThreshold) {
            throw std::invalid_argument("GG coefficients need a_K b_K != 0 for every K");
        }
    }
    for (size_t x = 0; x < w.size(); x++) {
        w[x] += wbar[x];
    }
    return PureState(n, std::move(w));
}

static std::vector<cd> apply_factors(const LocalOperator &op, std::span<const cd> input) {
    size_t n = op.n_qubits();
    std::vector<cd> v(input.begin(), input.end());
    for (size_t q = 1; q <= n; q++) {
        const Qubit2x2 &f = op.factor(q);
        size_t bit = excitation_index(n, q);
        for (size_t x = 0; x < v.size(); x++) {
            if (x & bit) {
                continue;
            }
            cd zero = v[x];
            cd one = v[x | bit];
            v[x] = f.alpha * zero + f.gamma * one;
            v[x | bit] = f.beta * zero + f.delta * one;
        }
    }
    return v;
}

AppliedState apply_local(const LocalOperator &op, const PureState &s) {
    if (op.n_qubits() != s.n_qubits()) {
        throw std::invalid_argument(
            "operator acts on " + std::to_string(op.n_qubits()) + " qubits but the state has " +
            std::to_string(s.n_qubits()));
    }
    auto v = apply_factors(op, s.amplitudes());
    double norm = std::sqrt(squared_norm(v));
    if (norm <= 1e-12) {
        throw std::invalid_argument("local operator maps the state to (numerically) zero");
    }
    for (auto &z : v) {
        z /= norm;
    }
    return AppliedState{PureState(s.n_qubits(), std::move(v)), norm};
}

WCanonicalForm canonicalize_w(const LocalOperator &op) {
    size_t n = op.n_qubits();
    require_qubits(n, 2, "W canonicalization");

    // p_k = u_k / |u_k|, q_k = (v_k - <p_k|v_k> p_k) / |...|, so that
    //   u_k = |u_k| p_k,   v_k = <p_k|v_k> p_k + |v_k^perp| q_k.
    std::vector<double> u_norm(n);
    std::vector<cd> v_along(n);
    std::vector<double> v_perp(n);
    std::vector<std::array<cd, 2>> p(n);
    std::vector<std::array<cd, 2>> q(n);
    for (size_t k = 0; k < n; k++) {
        auto u = op.factors()[k].image_of_zero();
        auto v = op.factors()[k].image_of_one();
        u_norm[k] = std::sqrt(std::norm(u[0]) + std::norm(u[1]));
        p[k] = {u[0] / u_norm[k], u[1] / u_norm[k]};
        v_along[k] = std::conj(p[k][0]) * v[0] + std::conj(p[k][1]) * v[1];
        std::array<cd, 2> perp{v[0] - v_along[k] * p[k][0], v[1] - v_along[k] * p[k][1]};
        v_perp[k] = std::sqrt(std::norm(perp[0]) + std::norm(perp[1]));
        q[k] = {perp[0] / v_perp[k], perp[1] / v_perp[k]};
    }

    // |psi> = (1/sqrt N) sum_k (prod_{j != k} |u_j|) (u..v_k..u) = z_0 |p..p> + sum_k z_k |p..q_k..p>.
    std::vector<cd> z(n + 1);
    double inv_sqrt_n = 1 / std::sqrt(static_cast<double>(n));
    for (size_t k = 0; k < n; k++) {
        double others = inv_sqrt_n;
        for (size_t j = 0; j < n; j++) {
            if (j != k) {
                others *= u_norm[j];
            }
        }
        z[0] += others * v_along[k];
        z[k + 1] = others * v_perp[k];
    }
    double norm = std::sqrt(squared_norm(z));

    // Drop the global phase of z_0 and push it into the |1> kets so every coefficient is real and non-negative.
    cd phase = std::abs(z[0]) > 0 ? std::conj(z[0]) / std::abs(z[0]) : cd{1};
    WCanonicalForm out{GWCoefficients{std::vector<cd>(n + 1)}, LocalOperator::identity(n), {}};
    out.coefficients.c[0] = std::abs(z[0]) / norm;
    for (size_t k = 1; k <= n; k++) {
        out.coefficients.c[k] = z[k].real() / norm;
    }
    std::vector<Qubit2x2> basis(n);
    for (size_t k = 0; k < n; k++) {
        basis[k] = Qubit2x2{p[k][0], q[k][0] * phase, p[k][1], q[k][1] * phase};
    }
    out.basis_change = LocalOperator(std::move(basis));
    out.warnings = out.coefficients.warnings();
    return out;
}

std::vector<double> dicke_slocc_sectors(const LocalOperator &op, const DickeCoefficients &d) {
    for (size_t k = 1; k <= op.n_qubits(); k++) {
        if (!op.factor(k).is_upper_triangular()) {
            throw std::invalid_argument(
                "factor for qubit " + std::to_string(k) +
                " has a nonzero lower-left entry; only upper-triangular factors are guaranteed to keep the image in "
                "excitation sectors <= l, general invertible factors also populate higher sectors");
        }
    }
    auto image = apply_local(op, make_dicke(d)).state;
    std::vector<double> mass(d.n_qubits + 1);
    for (size_t x = 0; x < image.dim(); x++) {
        mass[std::popcount(x)] += std::norm(image[x]);
    }
    return mass;
}

cd dicke42_invariant(const DickeCoefficients &d) {
    if (d.n_qubits != 4 || d.excitation != 2 || d.c.size() != 6) {
        throw std::invalid_argument("the af(cd - be) invariant is defined for 4-qubit weight-2 states only");
    }
    // weight_strings(4, 2) = 3, 5, 6, 9, 10, 12 -> a, b, c, d, e, f.
    const auto &v = d.c;
    return v[0] * v[5] * (v[2] * v[3] - v[1] * v[4]);
}

nlohmann::json state_to_json(const PureState &s) {
    nlohmann::json amps = nlohmann::json::array();
    for (const auto &z : s.amplitudes()) {
        amps.push_back({z.real(), z.imag()});
    }
    return nlohmann::json{{"n_qubits", s.n_qubits()}, {"kind", "pure"}, {"amplitudes", amps}};
}

PureState state_from_json(const nlohmann::json &j) {
    if (j.value("kind", "pure") != "pure") {
        throw std::invalid_argument("state JSON: expected kind \"pure\"");
    }
    size_t n = j.at("n_qubits").get<size_t>();
    std::vector<cd> amps;
    for (const auto &pair : j.at("amplitudes")) {
        amps.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    }
    return PureState(n, std::move(amps));
}

}  // namespace qmarg
