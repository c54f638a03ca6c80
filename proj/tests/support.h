#ifndef QMARG_TESTS_SUPPORT_H
#define QMARG_TESTS_SUPPORT_H

#include <Eigen/Dense>
#include <random>

#include "qmarg/linalg.h"
#include "qmarg/marginals.h"

namespace qmarg::testing {

inline cd gaussian(std::mt19937_64 &rng) {
    std::normal_distribution<double> n;
    double re = n(rng);
    return {re, n(rng)};
}

inline std::vector<cd> random_unit(std::mt19937_64 &rng, size_t size) {
    std::vector<cd> v(size);
    double norm2 = 0;
    for (auto &x : v) {
        x = gaussian(rng);
        norm2 += std::norm(x);
    }
    for (auto &x : v) x /= std::sqrt(norm2);
    return v;
}

inline HermitianMatrix random_hermitian(std::mt19937_64 &rng, size_t dim) {
    ComplexMatrix m(dim);
    for (auto &x : m.data()) x = gaussian(rng);
    return HermitianMatrix(m);
}

/// Random mixed state of the given rank.
inline DensityMatrix random_density(std::mt19937_64 &rng, size_t n_qubits, size_t rank) {
    size_t dim = size_t{1} << n_qubits;
    ComplexMatrix sum(dim);
    for (size_t r = 0; r < rank; ++r) {
        std::vector<cd> v = random_unit(rng, dim);
        sum += ComplexMatrix::projector(v) * cd(1.0 / static_cast<double>(rank));
    }
    return DensityMatrix(n_qubits, HermitianMatrix(sum));
}

inline Eigen::MatrixXcd to_eigen(const ComplexMatrix &m) {
    Eigen::MatrixXcd e(m.dim(), m.dim());
    for (size_t i = 0; i < m.dim(); ++i)
        for (size_t j = 0; j < m.dim(); ++j) e(i, j) = m(i, j);
    return e;
}

}  // namespace qmarg::testing

#endif
