#ifndef QMARG_VERIFY_H
#define QMARG_VERIFY_H

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmarg/feasibility.h"
#include "qmarg/forcing.h"
#include "qmarg/marginals.h"
#include "qmarg/states.h"

namespace qmarg {

inline constexpr const char *kToolVersion = "0.1.0";

/// Random generic coefficients. Entries are complex Gaussian, normalized, and redrawn while any required-nonzero
/// coefficient has modulus below `min_modulus`.
class CoefficientSampler {
   public:
    explicit CoefficientSampler(uint64_t seed, uint64_t stream = 0, double min_modulus = 0.05);

    /// c_0..c_N, with c_1..c_N required nonzero.
    GWCoefficients gw(size_t n);
    /// c_0 = 0 and c_1..c_N nonzero.
    GWCoefficients w_only(size_t n);
    DickeCoefficients dicke(size_t n, size_t excitation);
    GGCoefficients gg(size_t n);
    /// (a, b) with |a|^2 + |b|^2 = 1.
    std::pair<cd, cd> gghz();

    /// Unit vector of `size` Gaussian entries; entries flagged in `required` must clear the modulus floor.
    std::vector<cd> unit_vector(size_t size, const std::vector<bool> &required);

   private:
    std::mt19937_64 rng_;
    double min_modulus_;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    /// Deviation that was compared against `tolerance` (0 when the check is purely structural).
    double deviation = 0;
    double tolerance = 0;
    double seconds = 0;
    nlohmann::json detail = nlohmann::json::object();
};

struct VerifyOptions {
    /// "1", "2", "3", "4" or "facts".
    std::string theorem = "1";
    size_t n = 0;
    /// Excitation number for the Dicke theorem; 0 picks floor(n / 2).
    size_t l = 0;
    size_t trials = 10;
    uint64_t seed = 0;
    NumericPolicy policy = default_policy();
    /// Witness searches (negative direction).
    size_t search_seeds = 64;
    size_t max_iters = 5000;
    double epsilon = 0.3;
};

struct VerificationReport {
    std::string theorem;
    size_t n = 0;
    size_t l = 0;
    size_t trials = 0;
    uint64_t seed = 0;
    std::string coefficient_source;
    std::vector<CheckResult> checks;

    bool passed() const;
    /// Names of the failed checks.
    std::vector<std::string> failures() const;
};

/// Throws std::invalid_argument on an unknown theorem id or an n outside its range.
VerificationReport run_verification(const VerifyOptions &options);

/// Every field is reproducible from the recorded parameters except "timestamp", which also carries the runtimes.
nlohmann::json report_to_json(const VerificationReport &report);

/// Display matrix (1/2N)[[N-2,0,0,0],[0,2,2,0],[0,2,2,0],[0,0,0,N-2]] for the bipartite marginals of |G_N>.
HermitianMatrix g_bipartite_display(size_t n);

/// The SLOCC map sending |G_3> to |GHZ_3>: each factor is -3^(-1/6) [[1, w], [1, w^2]] with w = exp(2 pi i / 3),
/// so |0> -> |0> + |1> and |1> -> w|0> + w^2|1> up to the scale.
LocalOperator g3_to_ghz_operator();

/// [[1,1,a,b],[1,1,1,c],[a*,1,1,1],[b*,c*,1,1]].
HermitianMatrix unit_path_matrix(cd a, cd b, cd c);

/// Trace distance between |GGHZ> and its dephased mixture, |a||b|. The trace norm of the difference is 2|a||b|.
inline double gghz_mixture_distance(cd a, cd b) { return std::abs(a) * std::abs(b); }

/// |a|^2 |0...0><0...0| + |b|^2 |1...1><1...1|.
DensityMatrix gghz_mixture(size_t n, cd a, cd b);

/// The two hand-built states sharing every (N-3)-partite marginal with |GG_N>: |W> - |W-bar> and the normalized
/// mixture |W><W| + |W-bar><W-bar|.
std::pair<DensityMatrix, DensityMatrix> gg_analytic_witnesses(const GGCoefficients &g);

}  // namespace qmarg

#endif
