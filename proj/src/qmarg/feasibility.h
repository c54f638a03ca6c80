#ifndef QMARG_FEASIBILITY_H
#define QMARG_FEASIBILITY_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmarg/linalg.h"
#include "qmarg/marginals.h"

namespace qmarg {

/// Orthogonal projection onto the affine set of Hermitian matrices with trace 1 and the given marginals.
///
/// Every constraint reads entries (i, i ^ delta) for one XOR offset delta only, so the projection splits into one
/// independent block per offset. Each block keeps an orthonormal basis of its (real, 0/1) constraint functionals
/// together with the matching targets.
class MarginalProjector {
   public:
    explicit MarginalProjector(const MarginalSet &target, double consistency_tol = default_policy().feasibility);

    size_t n_qubits() const { return n_qubits_; }
    /// False when the linear system itself has no solution (overlapping marginals disagree, or a trace is off).
    bool consistent() const { return inconsistency_ <= consistency_tol_; }
    double inconsistency() const { return inconsistency_; }
    size_t constraint_rank() const;

    HermitianMatrix project(const HermitianMatrix &m) const;

    /// Constraint residuals of m in the orthonormalized basis (real and imaginary parts interleaved).
    std::vector<double> residuals(const ComplexMatrix &m) const;

    /// Levenberg-Marquardt on X = W W^dagger with W of `rank` columns, started from the top eigenpairs of `start`.
    /// Returns X once every residual is below `tol` (then keeps stepping while that still improves it); the result is
    /// PSD by construction.
    std::optional<HermitianMatrix> refine_low_rank(const HermitianMatrix &start, size_t rank, double tol = 1e-13,
                                                   size_t max_steps = 200) const;

   private:
    struct Block {
        size_t delta;
        std::vector<double> basis;  // rank x dim, row-major
        std::vector<cd> targets;
        size_t rank = 0;
    };

    size_t n_qubits_;
    size_t dim_;
    double consistency_tol_;
    double inconsistency_ = 0;
    std::vector<Block> blocks_;
};

struct FeasibilityWitness {
    DensityMatrix state;
    double trace_distance;
    /// Largest deviation of any target marginal entry (or of the trace).
    double residual;
    uint64_t seed;
    size_t iterations;
};

enum class SearchStatus { WitnessFound, NoWitness, Inconsistent };

std::string search_status_name(SearchStatus s);

struct SearchOptions {
    size_t seeds = 64;
    size_t max_iters = 5000;
    double epsilon = 0.3;
    uint64_t seed = 0;
    double step_tol = 1e-10;
    double distinct = 1e-6;
    /// Stop after this many witnesses (0 = run every seed).
    size_t stop_after = 0;
    NumericPolicy policy = default_policy();
};

struct SearchResult {
    SearchStatus status = SearchStatus::NoWitness;
    std::vector<FeasibilityWitness> witnesses;
    size_t seeds_run = 0;
    std::string message;
};

/// Dykstra alternating projections between the PSD cone and the affine set of matrices sharing the reference's
/// marginals on `spec`, one run per seed id 0..seeds-1. Iterates are periodically polished by a low-rank
/// Levenberg-Marquardt solve. A point is kept when it is PSD with residual <= policy.feasibility and its trace
/// distance from the reference exceeds both `distinct` and 1e3 * sqrt(residual).
///
/// A returned witness is a certificate of non-uniqueness; an empty result is only evidence of uniqueness.
SearchResult search_witness(const DensityMatrix &reference, const SubsetSpec &spec, const SearchOptions &options = {});

/// Same search against an explicit marginal set; `reference` (optional) is the point witnesses must differ from and
/// the centre of the random starts. Without it the starts are centred at the least-squares solution and the first
/// feasible point found takes the reference's place, so witness distances are measured from that point.
SearchResult search_witness(const MarginalSet &target, const std::optional<DensityMatrix> &reference,
                            const SearchOptions &options = {});

/// Largest deviation between the marginals of `rho` and `target`, including the trace.
double marginal_residual(const DensityMatrix &rho, const MarginalSet &target);

struct AnalyticWitnessReport {
    bool match;
    double max_deviation;
    double trace_distance;
    bool witness_is_state;
};

/// Checks a hand-built counterexample without any search.
AnalyticWitnessReport verify_analytic_witness(const DensityMatrix &reference, const DensityMatrix &witness,
                                              const SubsetSpec &spec, double tol = default_policy().equality);

nlohmann::json witness_to_json(const FeasibilityWitness &w);
nlohmann::json search_to_json(const SearchResult &r);

}  // namespace qmarg

#endif
