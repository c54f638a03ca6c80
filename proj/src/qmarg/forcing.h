#ifndef QMARG_FORCING_H
#define QMARG_FORCING_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmarg/linalg.h"
#include "qmarg/marginals.h"

namespace qmarg {

/// Deduction rules of the completion engine.
///
///   R1  a diagonal constraint whose remaining budget is zero forces its unknown (non-negative) diagonals to zero;
///       a negative forced diagonal is a contradiction.
///   R2  a zero diagonal forces its whole row and column to zero.
///   R3  a linear constraint with exactly one unknown summand forces that summand.
///   R4  when Cauchy-Schwarz lower bounds |r_xy|^2 / r_yy of the unknown diagonals in a diagonal constraint exhaust
///       its budget, every bound is tight.
///   R5  if the 2x2 principal minor on {p, s} is singular, PSD forces r_pq = r_ps r_sq / r_ss (the 3x3 minor on
///       {p, q, s} is otherwise negative).
///   R6  a 4x4 principal submatrix whose rescaled known entries form the path 1-2-3-4 of unit entries forces the
///       three remaining entries to 1 (after undoing the rescaling).
///   R7  a marginal entry s_ab whose 2x2 marginal minor is singular: equality throughout the summed Cauchy-Schwarz
///       chain splits every term proportionally, x_t / s_aa = y_t / s_bb = r(X_t, Y_t) / s_ab. Once any part of a
///       term is fixed the rest follows; in particular a zero term kills both of its diagonals.
///   R8  a singular 2x2 minor on {i, s} makes row i a multiple of row s. A linear constraint whose unknown summands
///       all reduce this way to multiples of one unknown entry forces that entry.
enum class Rule : uint8_t { R1 = 1, R2, R3, R4, R5, R6, R7, R8 };

std::string rule_name(Rule r);
Rule rule_from_name(const std::string &name);

struct RuleSet {
    bool r1 = true, r2 = true, r3 = true, r4 = true, r5 = true, r6 = true, r7 = true, r8 = true;

    bool enabled(Rule r) const;
    static RuleSet standard() { return {}; }
};

/// Linear constraint sum_terms rho(i, j) = target coming from the partial-trace map (or the trace).
struct LinearConstraint {
    std::vector<std::pair<uint32_t, uint32_t>> terms;
    cd target;
    bool diagonal = false;
    /// Index into MarginalSet::subsets, or -1 for the trace constraint.
    int marginal = -1;
    uint32_t row = 0, col = 0;
};

/// One deduction. `entry` is the forced entry (for R2 the zeroed row k is entry (k, k)); `rows` holds the indices
/// that justify it (principal minor rows, the Cauchy-Schwarz partner, ...); `constraint` indexes the constraint
/// list or is -1.
struct LogEntry {
    Rule rule;
    std::pair<uint32_t, uint32_t> entry;
    std::vector<uint32_t> rows;
    cd value;
    int constraint = -1;
};

/// Builds the constraint list for a marginal set: the trace first, then each marginal's upper-triangle entries in
/// row-major order. Diagonal constraint terms are listed in traced-pattern order, so the t-th term of the (a, a),
/// (b, b) and (a, b) constraints of one marginal line up.
std::vector<LinearConstraint> build_constraints(const MarginalSet &ms);

/// Partially known Hermitian matrix plus the constraints it must satisfy.
class CompletionState {
   public:
    CompletionState(size_t n_qubits, std::vector<LinearConstraint> constraints);

    size_t n_qubits() const { return n_qubits_; }
    size_t dim() const { return dim_; }
    bool known(size_t i, size_t j) const { return known_[i * dim_ + j] != 0; }
    cd value(size_t i, size_t j) const { return value_[i * dim_ + j]; }
    /// Sets (i, j) and its mirror; the diagonal keeps the real part only.
    void set(size_t i, size_t j, cd v);
    size_t unknown_count() const { return unknown_upper_; }
    std::vector<std::pair<uint32_t, uint32_t>> unknown_entries() const;
    HermitianMatrix to_matrix() const;

    const std::vector<LinearConstraint> &constraints() const { return constraints_; }

   private:
    size_t n_qubits_;
    size_t dim_;
    std::vector<cd> value_;
    std::vector<uint8_t> known_;
    size_t unknown_upper_;
    std::vector<LinearConstraint> constraints_;
};

enum class ForcingStatus { FullyForced, Underdetermined, Contradiction };

std::string status_name(ForcingStatus s);

struct ForcingOutcome {
    ForcingStatus status = ForcingStatus::Underdetermined;
    std::optional<DensityMatrix> matrix;
    std::vector<std::pair<uint32_t, uint32_t>> free_entries;
    std::vector<LogEntry> log;
    std::string message;
    size_t iterations = 0;
};

struct ForcingOptions {
    RuleSet rules = RuleSet::standard();
    size_t budget = 10000;
    NumericPolicy policy = default_policy();
};

/// Runs the rules to a fixpoint on the marginal set. FullyForced is reported only after the completed matrix has
/// been re-checked against every input marginal and for positivity.
ForcingOutcome force(const MarginalSet &ms, const ForcingOptions &options = {});

/// Runs the same engine from a partially filled state (entries already set count as given). FullyForced then only
/// means every constraint of the state holds and the result is PSD.
ForcingOutcome complete(CompletionState state, const ForcingOptions &options = {});

/// Chain marginals {K, K+1} only. Same engine as force() with R7 switched on regardless of the options; R7 is the
/// summed Cauchy-Schwarz squeeze that rules out patterns 1 0...0 1 in the support.
ForcingOutcome force_chain(const MarginalSet &ms, const ForcingOptions &options = {});

struct ReplayStep {
    size_t index;
    Rule rule;
    bool passed;
    std::string detail;
};

struct ReplayReport {
    bool all_passed = true;
    std::vector<ReplayStep> failures;
    size_t steps_checked = 0;
    std::vector<std::pair<uint32_t, uint32_t>> free_entries;
};

/// Re-derives every logged deduction from scratch in log order: each step is checked only against the marginals and
/// the entries fixed by earlier steps (minor determinants are recomputed, sums re-added). For a FullyForced outcome
/// the replayed matrix must also equal the reported one.
ReplayReport replay_log(const ForcingOutcome &outcome, const MarginalSet &ms,
                        const NumericPolicy &policy = default_policy());

nlohmann::json outcome_to_json(const ForcingOutcome &outcome);
nlohmann::json replay_to_json(const ReplayReport &report);

}  // namespace qmarg

#endif
