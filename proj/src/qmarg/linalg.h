#ifndef QMARG_LINALG_H
#define QMARG_LINALG_H

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace qmarg {

using cd = std::complex<double>;

/// Tolerances shared by every numeric routine in the library.
struct NumericPolicy {
    double equality = 1e-9;
    double psd_slack = 1e-9;
    double feasibility = 1e-8;
};

const NumericPolicy &default_policy();

/// Dense square complex matrix stored row-major.
class ComplexMatrix {
   public:
    ComplexMatrix() = default;
    explicit ComplexMatrix(size_t dim);
    ComplexMatrix(size_t dim, std::vector<cd> entries);

    static ComplexMatrix identity(size_t dim);
    static ComplexMatrix diagonal(std::span<const double> diag);
    static ComplexMatrix outer(std::span<const cd> ket, std::span<const cd> bra);
    static ComplexMatrix projector(std::span<const cd> ket) { return outer(ket, ket); }

    size_t dim() const { return dim_; }
    cd &operator()(size_t row, size_t col) { return data_[row * dim_ + col]; }
    const cd &operator()(size_t row, size_t col) const { return data_[row * dim_ + col]; }
    std::span<const cd> data() const { return data_; }
    std::span<cd> data() { return data_; }

    ComplexMatrix adjoint() const;
    ComplexMatrix transpose() const;
    cd trace() const;
    double frobenius_norm() const;
    /// Largest |a_ij - a_ji*|.
    double hermiticity_defect() const;

    ComplexMatrix &operator+=(const ComplexMatrix &other);
    ComplexMatrix &operator-=(const ComplexMatrix &other);
    ComplexMatrix &operator*=(cd scale);

    bool operator==(const ComplexMatrix &other) const = default;

   private:
    size_t dim_ = 0;
    std::vector<cd> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator*(ComplexMatrix a, cd scale);
ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);
std::vector<cd> operator*(const ComplexMatrix &a, std::span<const cd> v);

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b);
/// Largest absolute entrywise difference.
double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b);
/// Determinant by Gaussian elimination with partial pivoting.
cd determinant(const ComplexMatrix &m);
/// Principal submatrix on the given row/column indices (in the given order).
ComplexMatrix principal_submatrix(const ComplexMatrix &m, std::span<const size_t> indices);

/// A ComplexMatrix known to be Hermitian. Construction symmetrizes the input as (A + A^dagger) / 2.
class HermitianMatrix {
   public:
    HermitianMatrix() = default;
    explicit HermitianMatrix(ComplexMatrix m);
    explicit HermitianMatrix(size_t dim) : m_(dim) {}

    size_t dim() const { return m_.dim(); }
    const cd &operator()(size_t row, size_t col) const { return m_(row, col); }
    const ComplexMatrix &matrix() const { return m_; }
    double trace() const { return m_.trace().real(); }

    /// Sets entry (row, col) and its mirror; diagonal entries keep only the real part.
    void set(size_t row, size_t col, cd value);

   private:
    ComplexMatrix m_;
};

HermitianMatrix operator+(const HermitianMatrix &a, const HermitianMatrix &b);
HermitianMatrix operator-(const HermitianMatrix &a, const HermitianMatrix &b);
HermitianMatrix operator*(const HermitianMatrix &a, double scale);

struct Spectrum {
    std::vector<double> eigenvalues;  // descending
    ComplexMatrix eigenvectors;       // column k pairs with eigenvalues[k]
    int sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Sweeps over all (p, q) pairs applying complex Givens rotations until the off-diagonal Frobenius norm falls below
/// 1e-12 times the matrix norm (or absolutely, for tiny matrices). Throws ConvergenceError after 100 sweeps.
///
/// When `warm_start` is provided it must be a unitary matrix of matching dimension; the iteration then starts from
/// warm_start^dagger * m * warm_start, which is close to diagonal when warm_start holds the eigenvectors of a nearby
/// matrix.
Spectrum eigh(const HermitianMatrix &m, const ComplexMatrix *warm_start = nullptr);

/// V diag(values) V^dagger.
HermitianMatrix reconstruct(const ComplexMatrix &vectors, std::span<const double> values);

double min_eigenvalue(const HermitianMatrix &m);
bool is_psd(const HermitianMatrix &m, double tol = default_policy().psd_slack);
/// Nearest PSD matrix in Frobenius norm.
HermitianMatrix psd_project(const HermitianMatrix &m);
/// Half the trace norm of a - b.
double trace_distance(const HermitianMatrix &a, const HermitianMatrix &b);
/// |<a|b>|^2 / (<a|a><b|b>).
double fidelity(std::span<const cd> a, std::span<const cd> b);

/// Transposes the tensor factors listed in `qubits` (1-based, qubit 1 is the most significant bit) of an n-qubit
/// operator.
HermitianMatrix partial_transpose(const HermitianMatrix &m, size_t n_qubits, std::span<const size_t> qubits);

/// log2 of a power-of-two dimension; throws otherwise.
size_t qubit_count_for_dim(size_t dim);

nlohmann::json matrix_to_json(const ComplexMatrix &m);
ComplexMatrix matrix_from_json(const nlohmann::json &j);

}  // namespace qmarg

#endif
