#include "qmarg/feasibility.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace qmarg {

namespace {

size_t subset_mask(size_t n_qubits, const QubitSet &s) {
    size_t mask = 0;
    for (size_t q : s) {
        mask |= size_t{1} << (n_qubits - q);
    }
    return mask;
}

double dot(const std::vector<double> &basis, size_t row, size_t dim, const std::vector<double> &f) {
    const double *q = basis.data() + row * dim;
    double total = 0;
    for (size_t i = 0; i < dim; i++) {
        total += q[i] * f[i];
    }
    return total;
}

}  // namespace

MarginalProjector::MarginalProjector(const MarginalSet &target, double consistency_tol)
    : n_qubits_(target.n_qubits), dim_(size_t{1} << target.n_qubits), consistency_tol_(consistency_tol) {
    struct Marginal {
        size_t mask;
        SubsetEmbedding emb;
        std::vector<int> local;  // global pattern (restricted to the mask) -> local index
    };
    std::vector<Marginal> marginals;
    for (const auto &s : target.subsets) {
        Marginal m{subset_mask(n_qubits_, s), SubsetEmbedding(n_qubits_, s), std::vector<int>(dim_, -1)};
        for (size_t a = 0; a < m.emb.kept_part.size(); a++) {
            m.local[m.emb.kept_part[a]] = static_cast<int>(a);
        }
        marginals.push_back(std::move(m));
    }

    std::vector<double> f(dim_);
    for (size_t delta = 0; delta < dim_; delta++) {
        Block block{delta, {}, {}, 0};
        auto add = [&](cd c) {
            // Modified Gram-Schmidt; the second pass cleans up cancellation.
            double original = std::sqrt(std::inner_product(f.begin(), f.end(), f.begin(), 0.0));
            for (int pass = 0; pass < 2; pass++) {
                for (size_t k = 0; k < block.rank; k++) {
                    double proj = dot(block.basis, k, dim_, f);
                    const double *q = block.basis.data() + k * dim_;
                    for (size_t i = 0; i < dim_; i++) {
                        f[i] -= proj * q[i];
                    }
                    c -= proj * block.targets[k];
                }
            }
            double norm = std::sqrt(std::inner_product(f.begin(), f.end(), f.begin(), 0.0));
            if (norm <= 1e-9 * original) {
                inconsistency_ = std::max(inconsistency_, std::abs(c) / original);
                return;
            }
            for (double &x : f) {
                block.basis.push_back(x / norm);
            }
            block.targets.push_back(c / norm);
            block.rank++;
        };
        if (delta == 0) {
            std::fill(f.begin(), f.end(), 1.0);
            add(1.0);
        }
        for (size_t m = 0; m < marginals.size(); m++) {
            const auto &mg = marginals[m];
            if ((delta & ~mg.mask) != 0) {
                continue;
            }
            for (size_t a = 0; a < mg.emb.kept_part.size(); a++) {
                size_t pattern = mg.emb.kept_part[a];
                int b = mg.local[pattern ^ delta];
                for (size_t i = 0; i < dim_; i++) {
                    f[i] = (i & mg.mask) == pattern ? 1.0 : 0.0;
                }
                add(target.reduced[m](a, static_cast<size_t>(b)));
            }
        }
        if (block.rank > 0) {
            blocks_.push_back(std::move(block));
        }
    }
}

size_t MarginalProjector::constraint_rank() const {
    size_t total = 0;
    for (const auto &b : blocks_) {
        total += b.rank;
    }
    return total;
}

HermitianMatrix MarginalProjector::project(const HermitianMatrix &m) const {
    if (m.dim() != dim_) {
        throw std::invalid_argument("projector dimension mismatch");
    }
    ComplexMatrix out = m.matrix();
    std::vector<cd> v(dim_);
    for (const auto &block : blocks_) {
        for (size_t i = 0; i < dim_; i++) {
            v[i] = out(i, i ^ block.delta);
        }
        for (size_t k = 0; k < block.rank; k++) {
            const double *q = block.basis.data() + k * dim_;
            cd excess = -block.targets[k];
            for (size_t i = 0; i < dim_; i++) {
                excess += q[i] * v[i];
            }
            for (size_t i = 0; i < dim_; i++) {
                v[i] -= excess * q[i];
            }
        }
        for (size_t i = 0; i < dim_; i++) {
            out(i, i ^ block.delta) = v[i];
        }
    }
    return HermitianMatrix(std::move(out));
}

std::vector<double> MarginalProjector::residuals(const ComplexMatrix &m) const {
    std::vector<double> out;
    for (const auto &block : blocks_) {
        for (size_t k = 0; k < block.rank; k++) {
            const double *q = block.basis.data() + k * dim_;
            cd excess = -block.targets[k];
            for (size_t i = 0; i < dim_; i++) {
                excess += q[i] * m(i, i ^ block.delta);
            }
            out.push_back(excess.real());
            out.push_back(excess.imag());
        }
    }
    return out;
}

// Once below tolerance, a few more steps shrink the residual further.
constexpr size_t kExtraSteps = 10;

std::optional<HermitianMatrix> MarginalProjector::refine_low_rank(const HermitianMatrix &start, size_t rank, double tol,
                                                                  size_t max_steps) const {
    rank = std::clamp<size_t>(rank, 1, dim_);
    Spectrum s = eigh(start);
    const size_t params = 2 * dim_ * rank;
    Eigen::VectorXd w(params);  // Re W(i, k) at 2 (i rank + k), Im W(i, k) right after
    for (size_t i = 0; i < dim_; i++) {
        for (size_t k = 0; k < rank; k++) {
            cd value = s.eigenvectors(i, k) * std::sqrt(std::max(s.eigenvalues[k], 0.0));
            w[2 * (i * rank + k)] = value.real();
            w[2 * (i * rank + k) + 1] = value.imag();
        }
    }
    auto factor = [&](const Eigen::VectorXd &p) {
        std::vector<cd> f(dim_ * rank);
        for (size_t j = 0; j < f.size(); j++) {
            f[j] = {p[2 * j], p[2 * j + 1]};
        }
        return f;
    };
    auto gram = [&](const std::vector<cd> &f) {
        ComplexMatrix x(dim_);
        for (size_t p = 0; p < dim_; p++) {
            for (size_t q = 0; q < dim_; q++) {
                cd total = 0;
                for (size_t k = 0; k < rank; k++) {
                    total += f[p * rank + k] * std::conj(f[q * rank + k]);
                }
                x(p, q) = total;
            }
        }
        return x;
    };
    auto to_eigen = [](const std::vector<double> &v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); };

    Eigen::VectorXd r = to_eigen(residuals(gram(factor(w))));
    double mu = 1e-6;
    const size_t rows = r.size();
    Eigen::MatrixXd jac(rows, params);
    size_t extra = 0;
    for (size_t step = 0; step < max_steps; step++) {
        if (r.lpNorm<Eigen::Infinity>() <= tol && extra++ == kExtraSteps) {
            break;
        }
        auto f = factor(w);
        jac.setZero();
        size_t row = 0;
        for (const auto &block : blocks_) {
            size_t delta = block.delta;
            for (size_t kk = 0; kk < block.rank; kk++, row += 2) {
                const double *q = block.basis.data() + kk * dim_;
                for (size_t i = 0; i < dim_; i++) {
                    size_t partner = i ^ delta;
                    for (size_t k = 0; k < rank; k++) {
                        // d v[i] and d v[partner] for the real and imaginary part of W(i, k).
                        cd wp = f[partner * rank + k];
                        cd d_re, d_im;
                        if (delta == 0) {
                            d_re = q[i] * (std::conj(wp) + wp);
                            d_im = q[i] * (cd{0, 1} * std::conj(wp) - cd{0, 1} * wp);
                        } else {
                            d_re = q[i] * std::conj(wp) + q[partner] * wp;
                            d_im = q[i] * cd{0, 1} * std::conj(wp) - q[partner] * cd{0, 1} * wp;
                        }
                        size_t col = 2 * (i * rank + k);
                        jac(row, col) = d_re.real();
                        jac(row + 1, col) = d_re.imag();
                        jac(row, col + 1) = d_im.real();
                        jac(row + 1, col + 1) = d_im.imag();
                    }
                }
            }
        }
        double current = r.squaredNorm();
        bool improved = false;
        Eigen::MatrixXd normal = jac.transpose() * jac;
        Eigen::VectorXd gradient = jac.transpose() * r;
        for (int attempt = 0; attempt < 12 && !improved; attempt++) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal().array() += mu * (1.0 + normal.diagonal().array());
            Eigen::VectorXd delta_w = damped.ldlt().solve(-gradient);
            Eigen::VectorXd trial = w + delta_w;
            Eigen::VectorXd trial_r = to_eigen(residuals(gram(factor(trial))));
            if (trial_r.squaredNorm() < current) {
                w = std::move(trial);
                r = std::move(trial_r);
                mu = std::max(mu / 10, 1e-15);
                improved = true;
            } else {
                mu *= 10;
            }
        }
        if (!improved) {
            break;
        }
    }
    if (r.lpNorm<Eigen::Infinity>() <= tol) {
        return HermitianMatrix(gram(factor(w)));
    }
    return std::nullopt;
}

std::string search_status_name(SearchStatus s) {
    switch (s) {
        case SearchStatus::WitnessFound:
            return "WitnessFound";
        case SearchStatus::NoWitness:
            return "NoWitness";
        case SearchStatus::Inconsistent:
            return "Inconsistent";
    }
    return "NoWitness";
}

double marginal_residual(const DensityMatrix &rho, const MarginalSet &target) {
    double worst = std::abs(rho.matrix().trace() - 1);
    for (size_t m = 0; m < target.subsets.size(); m++) {
        DensityMatrix r = partial_trace(rho, target.subsets[m]);
        worst = std::max(worst, max_abs_diff(r.matrix().matrix(), target.reduced[m].matrix().matrix()));
    }
    return worst;
}

namespace {

HermitianMatrix random_hermitian(size_t dim, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal;
    ComplexMatrix h(dim);
    for (size_t r = 0; r < dim; r++) {
        h(r, r) = normal(rng);
        for (size_t c = r + 1; c < dim; c++) {
            cd z{normal(rng), normal(rng)};
            h(r, c) = z;
            h(c, r) = std::conj(z);
        }
    }
    return HermitianMatrix(std::move(h));
}

struct Run {
    HermitianMatrix point;
    size_t iterations;
    bool converged;
};

// Ranks worth trying for a low-rank polish of x: the numbers of eigenvalues above a few relative thresholds.
std::vector<size_t> candidate_ranks(const HermitianMatrix &x) {
    Spectrum s = eigh(x);
    double top = std::max(s.eigenvalues.front(), 1e-300);
    std::vector<size_t> ranks{1, 2};
    for (double rel : {1e-2, 1e-4, 1e-6}) {
        size_t r = std::count_if(s.eigenvalues.begin(), s.eigenvalues.end(), [&](double l) { return l > rel * top; });
        if (std::find(ranks.begin(), ranks.end(), r) == ranks.end()) {
            ranks.push_back(r);
        }
    }
    return ranks;
}

std::optional<HermitianMatrix> polish(const MarginalProjector &affine, const HermitianMatrix &x) {
    for (size_t rank : candidate_ranks(x)) {
        if (auto refined = affine.refine_low_rank(x, rank)) {
            return refined;
        }
    }
    return std::nullopt;
}

constexpr size_t kFirstPolish = 100;

// Near a reference that is unique only to second order, points with residual r exist at distance ~ sqrt(r / kappa)
// without any genuine witness nearby. A witness must sit well clear of that scale.
constexpr double kSqrtResidualFactor = 1e3;

// Dykstra iterations; at iterations 100, 200, 400, ... (and at the end) the iterate is handed to a low-rank
// Levenberg-Marquardt polish, since on faces of the cone the plain iteration only converges sublinearly.
Run dykstra(const MarginalProjector &affine, HermitianMatrix x, const SearchOptions &options) {
    size_t dim = x.dim();
    HermitianMatrix correction(dim);
    ComplexMatrix vectors = ComplexMatrix::identity(dim);
    size_t next_polish = kFirstPolish;
    for (size_t it = 1; it <= options.max_iters; it++) {
        HermitianMatrix shifted = affine.project(x) + correction;
        Spectrum s = eigh(shifted, &vectors);
        vectors = s.eigenvectors;
        for (double &lambda : s.eigenvalues) {
            lambda = std::max(lambda, 0.0);
        }
        HermitianMatrix next = reconstruct(s.eigenvectors, s.eigenvalues);
        correction = shifted - next;
        double step = (next - x).matrix().frobenius_norm();
        x = std::move(next);
        if (step < options.step_tol) {
            return {std::move(x), it, true};
        }
        if (it == next_polish && it < options.max_iters) {
            next_polish *= 2;
            if (auto polished = polish(affine, x)) {
                return {std::move(*polished), it, true};
            }
        }
    }
    if (auto polished = polish(affine, x)) {
        return {std::move(*polished), options.max_iters, true};
    }
    return {std::move(x), options.max_iters, false};
}

}  // namespace

SearchResult search_witness(const MarginalSet &target, const std::optional<DensityMatrix> &reference,
                            const SearchOptions &options) {
    SearchResult result;
    if (target.n_qubits == 0 || target.n_qubits > 8) {
        throw std::invalid_argument("witness search supports 1 to 8 qubits");
    }
    if (options.seeds == 0) {
        throw std::invalid_argument("witness search needs at least one seed");
    }
    for (size_t m = 0; m < target.reduced.size(); m++) {
        if (auto problem = target.reduced[m].problems(options.policy.equality, options.policy.psd_slack)) {
            result.status = SearchStatus::Inconsistent;
            result.message = "marginal " + std::to_string(m) + " is not a state: " + *problem;
            return result;
        }
    }
    MarginalProjector affine(target, options.policy.feasibility);
    if (!affine.consistent()) {
        result.status = SearchStatus::Inconsistent;
        result.message = "marginal constraints contradict each other (deviation " +
                         std::to_string(affine.inconsistency()) + ")";
        return result;
    }
    size_t dim = size_t{1} << target.n_qubits;
    HermitianMatrix centre = reference ? reference->matrix() : affine.project(HermitianMatrix(dim));

    bool any_feasible = false;
    std::optional<DensityMatrix> anchor;
    double anchor_residual = 0;
    for (uint64_t id = 0; id < options.seeds; id++) {
        std::seed_seq seq{options.seed, id};
        std::mt19937_64 rng(seq);
        HermitianMatrix h = random_hermitian(dim, rng);
        double scale = options.epsilon / h.matrix().frobenius_norm();
        Run run = dykstra(affine, psd_project(centre + h * scale), options);
        result.seeds_run++;

        DensityMatrix candidate(target.n_qubits, run.point);
        double residual = marginal_residual(candidate, target);
        if (residual > options.policy.feasibility || !is_psd(run.point, options.policy.psd_slack)) {
            continue;
        }
        // Without a reference the first feasible point serves as the anchor.
        if (!reference && !anchor) {
            anchor = candidate;
            anchor_residual = residual;
            any_feasible = true;
            continue;
        }
        any_feasible = true;
        double distance = trace_distance(candidate, reference ? *reference : *anchor);
        double noise = kSqrtResidualFactor * std::sqrt(std::max(residual, anchor_residual));
        if (distance > std::max(options.distinct, noise)) {
            result.witnesses.push_back({std::move(candidate), distance, residual, id, run.iterations});
            if (options.stop_after > 0 && result.witnesses.size() >= options.stop_after) {
                break;
            }
        }
    }
    if (!result.witnesses.empty()) {
        result.status = SearchStatus::WitnessFound;
        result.message = std::to_string(result.witnesses.size()) + " witness(es) share the marginals";
        if (!reference) {
            result.message += " (distances from the first feasible point)";
        }
    } else {
        result.status = SearchStatus::NoWitness;
        result.message = any_feasible ? "every converged point coincides with the reference (evidence of uniqueness, "
                                        "not a proof)"
                                      : "no seed converged to a feasible point";
    }
    return result;
}

SearchResult search_witness(const DensityMatrix &reference, const SubsetSpec &spec, const SearchOptions &options) {
    if (auto problem = reference.problems(options.policy.equality, options.policy.psd_slack)) {
        SearchResult r;
        r.status = SearchStatus::Inconsistent;
        r.message = "reference is not a state: " + *problem;
        return r;
    }
    return search_witness(marginal_set(reference, spec), reference, options);
}

AnalyticWitnessReport verify_analytic_witness(const DensityMatrix &reference, const DensityMatrix &witness,
                                              const SubsetSpec &spec, double tol) {
    if (reference.n_qubits() != witness.n_qubits()) {
        throw std::invalid_argument("reference and witness differ in qubit count");
    }
    MatchReport m = marginals_match(reference, witness, spec, tol);
    return AnalyticWitnessReport{m.match, m.max_deviation, trace_distance(reference, witness),
                                 !witness.problems(1e-9).has_value()};
}

nlohmann::json witness_to_json(const FeasibilityWitness &w) {
    return nlohmann::json{
        {"seed", w.seed},
        {"trace_distance", w.trace_distance},
        {"residual", w.residual},
        {"iterations", w.iterations},
        {"state", matrix_to_json(w.state.matrix().matrix())},
    };
}

nlohmann::json search_to_json(const SearchResult &r) {
    nlohmann::json witnesses = nlohmann::json::array();
    for (const auto &w : r.witnesses) {
        witnesses.push_back(witness_to_json(w));
    }
    return nlohmann::json{
        {"status", search_status_name(r.status)},
        {"message", r.message},
        {"seeds_run", r.seeds_run},
        {"witnesses", witnesses},
    };
}

}  // namespace qmarg
