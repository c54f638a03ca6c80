#ifndef QMARG_MARGINALS_H
#define QMARG_MARGINALS_H

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmarg/linalg.h"
#include "qmarg/states.h"

namespace qmarg {

/// Sorted 1-based qubit labels.
using QubitSet = std::vector<size_t>;

/// An n-qubit operator meant to be a state. The constructor only checks the dimension; `problems()` reports
/// trace and positivity violations so that callers can decide whether to reject.
class DensityMatrix {
   public:
    DensityMatrix(size_t n_qubits, HermitianMatrix matrix);
    explicit DensityMatrix(const PureState &pure);

    /// Throws unless trace = 1 within `trace_tol` and the matrix is PSD within `psd_tol`.
    static DensityMatrix checked(size_t n_qubits, HermitianMatrix matrix, double trace_tol = 1e-12,
                                 double psd_tol = default_policy().psd_slack);

    size_t n_qubits() const { return n_qubits_; }
    size_t dim() const { return matrix_.dim(); }
    const HermitianMatrix &matrix() const { return matrix_; }
    const cd &operator()(size_t row, size_t col) const { return matrix_(row, col); }

    std::optional<std::string> problems(double trace_tol = 1e-12, double psd_tol = default_policy().psd_slack) const;

   private:
    size_t n_qubits_;
    HermitianMatrix matrix_;
};

double trace_distance(const DensityMatrix &a, const DensityMatrix &b);
HermitianMatrix partial_transpose(const DensityMatrix &m, std::span<const size_t> qubits);

/// Which subsets of qubits a marginal set contains.
///
/// Grammar: "star" (all {1,K}), "chain" (all {K,K+1}), "all-k:K" (every K-subset), "star-k:K" (every K-subset
/// containing qubit 1), or an explicit list "i,j,...;k,l,..." of 1-based qubit labels.
struct SubsetSpec {
    enum class Kind { Star, Chain, AllK, StarK, Explicit };

    Kind kind = Kind::Star;
    size_t k = 2;
    std::vector<QubitSet> explicit_subsets;

    static SubsetSpec parse(const std::string &text);
    static SubsetSpec star() { return {Kind::Star, 2, {}}; }
    static SubsetSpec chain() { return {Kind::Chain, 2, {}}; }
    static SubsetSpec all_k(size_t k) { return {Kind::AllK, k, {}}; }
    static SubsetSpec star_k(size_t k) { return {Kind::StarK, k, {}}; }
    static SubsetSpec of(std::vector<QubitSet> subsets);

    std::string name() const;
    std::string to_string() const;
    /// Subsets for an n-qubit system, in a fixed order. Throws if the descriptor does not fit n.
    std::vector<QubitSet> subsets(size_t n_qubits) const;
};

/// Reduced state on `keep`; output qubit order is ascending label order.
DensityMatrix partial_trace(const DensityMatrix &rho, const QubitSet &keep);

/// Precomputed index maps for tracing an n-qubit system down to a fixed subset. Global basis index of
/// (kept pattern a, traced pattern t) is kept_part[a] | traced_part[t].
struct SubsetEmbedding {
    SubsetEmbedding(size_t n_qubits, const QubitSet &keep);

    size_t n_qubits;
    QubitSet keep;
    std::vector<size_t> kept_part;
    std::vector<size_t> traced_part;
};

struct MarginalSet {
    std::string name;
    size_t n_qubits = 0;
    std::vector<QubitSet> subsets;
    std::vector<DensityMatrix> reduced;

    bool covers_all_qubits() const;
};

MarginalSet marginal_set(const DensityMatrix &rho, const SubsetSpec &spec);

struct MatchReport {
    bool match = true;
    double max_deviation = 0;
    QubitSet worst_subset;
};

MatchReport marginals_match(const DensityMatrix &a, const DensityMatrix &b, const SubsetSpec &spec,
                            double tol = default_policy().equality);
/// Compares the marginals of `rho` against an already computed marginal set.
MatchReport marginals_match(const DensityMatrix &rho, const MarginalSet &target, double tol = default_policy().equality);

nlohmann::json density_to_json(const DensityMatrix &rho);
DensityMatrix density_from_json(const nlohmann::json &j);
nlohmann::json marginal_set_to_json(const MarginalSet &ms);
MarginalSet marginal_set_from_json(const nlohmann::json &j);

}  // namespace qmarg

#endif
