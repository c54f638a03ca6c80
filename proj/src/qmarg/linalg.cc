#include "qmarg/linalg.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace qmarg {

const NumericPolicy &default_policy() {
    static const NumericPolicy policy{};
    return policy;
}

ComplexMatrix::ComplexMatrix(size_t dim) : dim_(dim), data_(dim * dim) {
    if (dim == 0) {
        throw std::invalid_argument("matrix dimension must be at least 1");
    }
}

ComplexMatrix::ComplexMatrix(size_t dim, std::vector<cd> entries) : dim_(dim), data_(std::move(entries)) {
    if (dim == 0) {
        throw std::invalid_argument("matrix dimension must be at least 1");
    }
    if (data_.size() != dim * dim) {
        throw std::invalid_argument(
            "matrix of dimension " + std::to_string(dim) + " needs " + std::to_string(dim * dim) + " entries, got " +
            std::to_string(data_.size()));
    }
}

ComplexMatrix ComplexMatrix::identity(size_t dim) {
    ComplexMatrix m(dim);
    for (size_t k = 0; k < dim; k++) {
        m(k, k) = 1.0;
    }
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> diag) {
    ComplexMatrix m(diag.size());
    for (size_t k = 0; k < diag.size(); k++) {
        m(k, k) = diag[k];
    }
    return m;
}

ComplexMatrix ComplexMatrix::outer(std::span<const cd> ket, std::span<const cd> bra) {
    if (ket.size() != bra.size()) {
        throw std::invalid_argument("outer product of vectors with different lengths");
    }
    ComplexMatrix m(ket.size());
    for (size_t r = 0; r < ket.size(); r++) {
        for (size_t c = 0; c < bra.size(); c++) {
            m(r, c) = ket[r] * std::conj(bra[c]);
        }
    }
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix out(dim_);
    for (size_t r = 0; r < dim_; r++) {
        for (size_t c = 0; c < dim_; c++) {
            out(c, r) = std::conj((*this)(r, c));
        }
    }
    return out;
}

ComplexMatrix ComplexMatrix::transpose() const {
    ComplexMatrix out(dim_);
    for (size_t r = 0; r < dim_; r++) {
        for (size_t c = 0; c < dim_; c++) {
            out(c, r) = (*this)(r, c);
        }
    }
    return out;
}

cd ComplexMatrix::trace() const {
    cd total = 0;
    for (size_t k = 0; k < dim_; k++) {
        total += (*this)(k, k);
    }
    return total;
}

double ComplexMatrix::frobenius_norm() const {
    double total = 0;
    for (const auto &z : data_) {
        total += std::norm(z);
    }
    return std::sqrt(total);
}

double ComplexMatrix::hermiticity_defect() const {
    double worst = 0;
    for (size_t r = 0; r < dim_; r++) {
        for (size_t c = r; c < dim_; c++) {
            worst = std::max(worst, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
        }
    }
    return worst;
}

static void require_same_dim(size_t a, size_t b) {
    if (a != b) {
        throw std::invalid_argument(
            "dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

ComplexMatrix &ComplexMatrix::operator+=(const ComplexMatrix &other) {
    require_same_dim(dim_, other.dim_);
    for (size_t k = 0; k < data_.size(); k++) {
        data_[k] += other.data_[k];
    }
    return *this;
}

ComplexMatrix &ComplexMatrix::operator-=(const ComplexMatrix &other) {
    require_same_dim(dim_, other.dim_);
    for (size_t k = 0; k < data_.size(); k++) {
        data_[k] -= other.data_[k];
    }
    return *this;
}

ComplexMatrix &ComplexMatrix::operator*=(cd scale) {
    for (auto &z : data_) {
        z *= scale;
    }
    return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b) {
    a += b;
    return a;
}

ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b) {
    a -= b;
    return a;
}

ComplexMatrix operator*(ComplexMatrix a, cd scale) {
    a *= scale;
    return a;
}

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b) {
    require_same_dim(a.dim(), b.dim());
    size_t n = a.dim();
    ComplexMatrix out(n);
    for (size_t r = 0; r < n; r++) {
        for (size_t k = 0; k < n; k++) {
            cd ark = a(r, k);
            if (ark == cd{}) {
                continue;
            }
            for (size_t c = 0; c < n; c++) {
                out(r, c) += ark * b(k, c);
            }
        }
    }
    return out;
}

std::vector<cd> operator*(const ComplexMatrix &a, std::span<const cd> v) {
    require_same_dim(a.dim(), v.size());
    std::vector<cd> out(a.dim());
    for (size_t r = 0; r < a.dim(); r++) {
        cd total = 0;
        for (size_t c = 0; c < a.dim(); c++) {
            total += a(r, c) * v[c];
        }
        out[r] = total;
    }
    return out;
}

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b) {
    size_t na = a.dim();
    size_t nb = b.dim();
    ComplexMatrix out(na * nb);
    for (size_t r1 = 0; r1 < na; r1++) {
        for (size_t c1 = 0; c1 < na; c1++) {
            cd x = a(r1, c1);
            for (size_t r2 = 0; r2 < nb; r2++) {
                for (size_t c2 = 0; c2 < nb; c2++) {
                    out(r1 * nb + r2, c1 * nb + c2) = x * b(r2, c2);
                }
            }
        }
    }
    return out;
}

double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b) {
    require_same_dim(a.dim(), b.dim());
    double worst = 0;
    auto da = a.data();
    auto db = b.data();
    for (size_t k = 0; k < da.size(); k++) {
        worst = std::max(worst, std::abs(da[k] - db[k]));
    }
    return worst;
}

cd determinant(const ComplexMatrix &m) {
    size_t n = m.dim();
    ComplexMatrix work = m;
    cd det = 1.0;
    for (size_t col = 0; col < n; col++) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; r++) {
            if (std::abs(work(r, col)) > std::abs(work(pivot, col))) {
                pivot = r;
            }
        }
        if (work(pivot, col) == cd{}) {
            return 0;
        }
        if (pivot != col) {
            for (size_t c = 0; c < n; c++) {
                std::swap(work(pivot, c), work(col, c));
            }
            det = -det;
        }
        det *= work(col, col);
        for (size_t r = col + 1; r < n; r++) {
            cd factor = work(r, col) / work(col, col);
            for (size_t c = col; c < n; c++) {
                work(r, c) -= factor * work(col, c);
            }
        }
    }
    return det;
}

ComplexMatrix principal_submatrix(const ComplexMatrix &m, std::span<const size_t> indices) {
    ComplexMatrix out(indices.size());
    for (size_t r = 0; r < indices.size(); r++) {
        for (size_t c = 0; c < indices.size(); c++) {
            out(r, c) = m(indices[r], indices[c]);
        }
    }
    return out;
}

HermitianMatrix::HermitianMatrix(ComplexMatrix m) : m_(std::move(m)) {
    size_t n = m_.dim();
    for (size_t r = 0; r < n; r++) {
        m_(r, r) = m_(r, r).real();
        for (size_t c = r + 1; c < n; c++) {
            cd avg = 0.5 * (m_(r, c) + std::conj(m_(c, r)));
            m_(r, c) = avg;
            m_(c, r) = std::conj(avg);
        }
    }
}

void HermitianMatrix::set(size_t row, size_t col, cd value) {
    if (row == col) {
        m_(row, row) = value.real();
        return;
    }
    m_(row, col) = value;
    m_(col, row) = std::conj(value);
}

HermitianMatrix operator+(const HermitianMatrix &a, const HermitianMatrix &b) {
    return HermitianMatrix(a.matrix() + b.matrix());
}

HermitianMatrix operator-(const HermitianMatrix &a, const HermitianMatrix &b) {
    return HermitianMatrix(a.matrix() - b.matrix());
}

HermitianMatrix operator*(const HermitianMatrix &a, double scale) {
    return HermitianMatrix(a.matrix() * cd{scale});
}

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalThreshold = 1e-12;

double off_diagonal_norm(const ComplexMatrix &a) {
    double total = 0;
    size_t n = a.dim();
    for (size_t r = 0; r < n; r++) {
        for (size_t c = r + 1; c < n; c++) {
            total += std::norm(a(r, c));
        }
    }
    return std::sqrt(2 * total);
}

// Annihilates a(p, q) with a unitary acting on indices p and q, accumulating the rotation into v.
void jacobi_rotate(ComplexMatrix &a, ComplexMatrix &v, size_t p, size_t q) {
    size_t n = a.dim();
    cd apq = a(p, q);
    double r = std::abs(apq);
    cd phase = apq / r;
    double alpha = a(p, p).real();
    double beta = a(q, q).real();
    double zeta = (beta - alpha) / (2 * r);
    double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
    double c = 1 / std::sqrt(1 + t * t);
    double s = t * c;
    cd s_phase = s * std::conj(phase);
    cd c_phase = c * std::conj(phase);

    // Columns: A <- A J with J = [[c, s], [-s conj(u), c conj(u)]].
    for (size_t k = 0; k < n; k++) {
        cd akp = a(k, p);
        cd akq = a(k, q);
        a(k, p) = c * akp - s_phase * akq;
        a(k, q) = s * akp + c_phase * akq;
        cd vkp = v(k, p);
        cd vkq = v(k, q);
        v(k, p) = c * vkp - s_phase * vkq;
        v(k, q) = s * vkp + c_phase * vkq;
    }
    // Rows: A <- J^dagger A.
    for (size_t k = 0; k < n; k++) {
        cd apk = a(p, k);
        cd aqk = a(q, k);
        a(p, k) = c * apk - std::conj(s_phase) * aqk;
        a(q, k) = s * apk + std::conj(c_phase) * aqk;
    }
    a(p, q) = 0;
    a(q, p) = 0;
    a(p, p) = alpha - t * r;
    a(q, q) = beta + t * r;
}

}  // namespace

Spectrum eigh(const HermitianMatrix &m, const ComplexMatrix *warm_start) {
    size_t n = m.dim();
    ComplexMatrix a = m.matrix();
    ComplexMatrix v = ComplexMatrix::identity(n);
    if (warm_start != nullptr) {
        require_same_dim(warm_start->dim(), n);
        v = *warm_start;
        a = v.adjoint() * a * v;
    }
    double scale = m.matrix().frobenius_norm();
    double threshold = kOffDiagonalThreshold * (scale > 0 ? scale : 1.0);
    double negligible = 1e-300 + 1e-20 * scale;

    int sweeps = 0;
    while (off_diagonal_norm(a) > threshold) {
        if (sweeps == kMaxSweeps) {
            throw ConvergenceError(
                "Jacobi eigensolver did not converge after " + std::to_string(kMaxSweeps) + " sweeps (dim " +
                std::to_string(n) + ")");
        }
        for (size_t p = 0; p + 1 < n; p++) {
            for (size_t q = p + 1; q < n; q++) {
                if (std::abs(a(p, q)) > negligible) {
                    jacobi_rotate(a, v, p, q);
                }
            }
        }
        sweeps++;
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        return a(x, x).real() > a(y, y).real();
    });
    Spectrum out;
    out.sweeps = sweeps;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n);
    for (size_t k = 0; k < n; k++) {
        out.eigenvalues[k] = a(order[k], order[k]).real();
        for (size_t r = 0; r < n; r++) {
            out.eigenvectors(r, k) = v(r, order[k]);
        }
    }
    return out;
}

HermitianMatrix reconstruct(const ComplexMatrix &vectors, std::span<const double> values) {
    size_t n = vectors.dim();
    require_same_dim(n, values.size());
    ComplexMatrix out(n);
    for (size_t k = 0; k < n; k++) {
        double lambda = values[k];
        if (lambda == 0) {
            continue;
        }
        for (size_t r = 0; r < n; r++) {
            cd left = lambda * vectors(r, k);
            for (size_t c = r; c < n; c++) {
                out(r, c) += left * std::conj(vectors(c, k));
            }
        }
    }
    for (size_t r = 0; r < n; r++) {
        for (size_t c = 0; c < r; c++) {
            out(r, c) = std::conj(out(c, r));
        }
    }
    return HermitianMatrix(std::move(out));
}

double min_eigenvalue(const HermitianMatrix &m) {
    return eigh(m).eigenvalues.back();
}

bool is_psd(const HermitianMatrix &m, double tol) {
    if (tol < 0) {
        throw std::invalid_argument("PSD tolerance must be non-negative");
    }
    return min_eigenvalue(m) >= -tol;
}

HermitianMatrix psd_project(const HermitianMatrix &m) {
    Spectrum s = eigh(m);
    for (auto &lambda : s.eigenvalues) {
        lambda = std::max(lambda, 0.0);
    }
    return reconstruct(s.eigenvectors, s.eigenvalues);
}

double trace_distance(const HermitianMatrix &a, const HermitianMatrix &b) {
    require_same_dim(a.dim(), b.dim());
    Spectrum s = eigh(a - b);
    double total = 0;
    for (double lambda : s.eigenvalues) {
        total += std::abs(lambda);
    }
    return 0.5 * total;
}

double fidelity(std::span<const cd> a, std::span<const cd> b) {
    require_same_dim(a.size(), b.size());
    cd overlap = 0;
    double na = 0;
    double nb = 0;
    for (size_t k = 0; k < a.size(); k++) {
        overlap += std::conj(a[k]) * b[k];
        na += std::norm(a[k]);
        nb += std::norm(b[k]);
    }
    return std::norm(overlap) / (na * nb);
}

HermitianMatrix partial_transpose(const HermitianMatrix &m, size_t n_qubits, std::span<const size_t> qubits) {
    if (m.dim() != (size_t{1} << n_qubits)) {
        throw std::invalid_argument("matrix dimension does not match qubit count");
    }
    size_t mask = 0;
    for (size_t q : qubits) {
        if (q < 1 || q > n_qubits) {
            throw std::out_of_range(
                "qubit index " + std::to_string(q) + " outside 1.." + std::to_string(n_qubits));
        }
        mask |= size_t{1} << (n_qubits - q);
    }
    size_t n = m.dim();
    ComplexMatrix out(n);
    for (size_t r = 0; r < n; r++) {
        for (size_t c = 0; c < n; c++) {
            // Swap the masked bits between the row and column index.
            size_t swapped = (r ^ c) & mask;
            out(r ^ swapped, c ^ swapped) = m(r, c);
        }
    }
    return HermitianMatrix(std::move(out));
}

size_t qubit_count_for_dim(size_t dim) {
    if (dim == 0 || !std::has_single_bit(dim)) {
        throw std::invalid_argument("dimension " + std::to_string(dim) + " is not a power of two");
    }
    return static_cast<size_t>(std::countr_zero(dim));
}

nlohmann::json matrix_to_json(const ComplexMatrix &m) {
    std::vector<double> re;
    std::vector<double> im;
    re.reserve(m.data().size());
    im.reserve(m.data().size());
    for (const auto &z : m.data()) {
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    return nlohmann::json{{"dim", m.dim()}, {"re", re}, {"im", im}};
}

ComplexMatrix matrix_from_json(const nlohmann::json &j) {
    size_t dim = j.at("dim").get<size_t>();
    auto re = j.at("re").get<std::vector<double>>();
    auto im = j.value("im", std::vector<double>(re.size(), 0.0));
    if (re.size() != dim * dim || im.size() != dim * dim) {
        throw std::invalid_argument("matrix JSON: expected " + std::to_string(dim * dim) + " entries in re and im");
    }
    std::vector<cd> entries(dim * dim);
    for (size_t k = 0; k < entries.size(); k++) {
        entries[k] = {re[k], im[k]};
    }
    return ComplexMatrix(dim, std::move(entries));
}

}  // namespace qmarg
