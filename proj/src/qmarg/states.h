#ifndef QMARG_STATES_H
#define QMARG_STATES_H

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmarg/linalg.h"

namespace qmarg {

/// Basis index of the string with a single 1 at `qubit` (1-based; qubit 1 is the most significant bit).
inline size_t excitation_index(size_t n_qubits, size_t qubit) { return size_t{1} << (n_qubits - qubit); }

/// All basis indices of Hamming weight `weight`, ascending.
std::vector<size_t> weight_strings(size_t n_qubits, size_t weight);

/// Normalized n-qubit state vector. Amplitudes are stored in computational-basis order with qubit 1 as the most
/// significant bit. The first amplitude with modulus above 1e-12 is kept real and positive.
class PureState {
   public:
    PureState(size_t n_qubits, std::vector<cd> amplitudes);

    size_t n_qubits() const { return n_qubits_; }
    size_t dim() const { return amplitudes_.size(); }
    std::span<const cd> amplitudes() const { return amplitudes_; }
    cd operator[](size_t index) const { return amplitudes_[index]; }

    HermitianMatrix projector() const;

   private:
    size_t n_qubits_;
    std::vector<cd> amplitudes_;
};

double fidelity(const PureState &a, const PureState &b);

/// Coefficients c_0 (on |0...0>) and c_1..c_N (single excitation at qubit k) of a canonical W-class state.
struct GWCoefficients {
    std::vector<cd> c;

    size_t n_qubits() const { return c.size() - 1; }
    /// Non-fatal notes: fewer than three nonzero c_1..c_N, or c_1 = 0.
    std::vector<std::string> warnings() const;
};

/// Single-qubit factor [[alpha, gamma], [beta, delta]]: |0> -> alpha|0> + beta|1>, |1> -> gamma|0> + delta|1>.
struct Qubit2x2 {
    cd alpha = 1, gamma = 0, beta = 0, delta = 1;

    cd det() const { return alpha * delta - gamma * beta; }
    std::array<cd, 2> image_of_zero() const { return {alpha, beta}; }
    std::array<cd, 2> image_of_one() const { return {gamma, delta}; }
    bool is_upper_triangular(double tol = 1e-12) const { return std::abs(beta) <= tol; }
};

class LocalOperator {
   public:
    explicit LocalOperator(std::vector<Qubit2x2> factors);
    static LocalOperator identity(size_t n_qubits);
    static LocalOperator uniform(size_t n_qubits, const Qubit2x2 &factor);

    size_t n_qubits() const { return factors_.size(); }
    const Qubit2x2 &factor(size_t qubit) const { return factors_[qubit - 1]; }
    const std::vector<Qubit2x2> &factors() const { return factors_; }

   private:
    std::vector<Qubit2x2> factors_;
};

struct DickeCoefficients {
    size_t n_qubits = 0;
    size_t excitation = 0;
    /// Indexed like weight_strings(n_qubits, excitation).
    std::vector<cd> c;
};

struct GGCoefficients {
    std::vector<cd> a;  // on the single excitation at K
    std::vector<cd> b;  // on the single hole at K

    size_t n_qubits() const { return a.size(); }
};

PureState make_w(size_t n);
PureState make_gw(const GWCoefficients &c);
PureState make_gghz(size_t n, cd a, cd b);
PureState make_dicke(const DickeCoefficients &d);
PureState make_g(size_t n);
PureState make_gg(const GGCoefficients &g);

/// The unnormalized W-part, W-bar-part of |GG_N> as separate vectors.
std::pair<std::vector<cd>, std::vector<cd>> gg_components(const GGCoefficients &g);

struct AppliedState {
    PureState state;
    double pre_normalization_norm;
};

/// (A_1 x ... x A_N)|s>, renormalized. Throws if the image is numerically null.
AppliedState apply_local(const LocalOperator &op, const PureState &s);

/// Canonical form of (A_1 x ... x A_N)|W_N>.
struct WCanonicalForm {
    GWCoefficients coefficients;  // all real, non-negative
    /// Local unitary sending |0>_k -> p_k and |1>_k -> phase * q_k; applying it to make_gw(coefficients) reproduces
    /// apply_local(op, W_N) up to a global phase.
    LocalOperator basis_change;
    std::vector<std::string> warnings;
};

WCanonicalForm canonicalize_w(const LocalOperator &op);

/// Squared amplitude per Hamming-weight sector (index 0..N) of apply_local(op, make_dicke(d)). Requires every factor
/// to be upper triangular; those never raise the excitation number.
std::vector<double> dicke_slocc_sectors(const LocalOperator &op, const DickeCoefficients &d);

/// a f (c d - b e) for the amplitudes of a 4-qubit weight-2 state at basis indices 3, 5, 6, 9, 10, 12.
cd dicke42_invariant(const DickeCoefficients &d);

nlohmann::json state_to_json(const PureState &s);
PureState state_from_json(const nlohmann::json &j);

}  // namespace qmarg

#endif
