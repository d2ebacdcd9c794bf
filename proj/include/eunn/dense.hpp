#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "eunn/complex_vec.hpp"
#include "eunn/errors.hpp"
#include "eunn/rng.hpp"

namespace eunn {

/// Small dense complex matrix, row-major. Used by test oracles, the
/// decomposition procedure and the projective baseline; never on the fast
/// path, so clarity beats cleverness throughout.
struct CMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::complex<double>> a;

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

    std::complex<double>& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const std::complex<double>& at(std::size_t i, std::size_t j) const {
        return a[i * cols + j];
    }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline CMatrix mul(const CMatrix& x, const CMatrix& y) {
    check_same_size(x.cols, y.rows, "matrix multiply");
    CMatrix out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const std::complex<double> v = x.at(i, k);
            for (std::size_t j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
        }
    return out;
}

inline CMatrix adjoint(const CMatrix& m) {
    CMatrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out.at(j, i) = std::conj(m.at(i, j));
    return out;
}

inline ComplexVec matvec(const CMatrix& m, const ComplexVec& x) {
    check_same_size(m.cols, x.size(), "matvec");
    ComplexVec y(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::complex<double> s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m.at(i, j) * x.at(j);
        y.set(i, s);
    }
    return y;
}

inline double max_abs_diff(const CMatrix& x, const CMatrix& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.a.size(); ++i) d = std::max(d, std::abs(x.a[i] - y.a[i]));
    return d;
}

/// max |(M†M - I)_{ij}|.
inline double unitarity_error(const CMatrix& m) {
    return max_abs_diff(mul(adjoint(m), m), CMatrix::identity(m.cols));
}

/// Solve A X = B by LU with partial pivoting. A is consumed by value.
inline CMatrix lu_solve(CMatrix a, CMatrix b) {
    check_same_size(a.rows, a.cols, "lu_solve: square");
    check_same_size(a.rows, b.rows, "lu_solve: rhs");
    const std::size_t n = a.rows;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a.at(i, k)) > std::abs(a.at(piv, k))) piv = i;
        if (std::abs(a.at(piv, k)) == 0.0)
            throw NumericalError("lu_solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
            for (std::size_t j = 0; j < b.cols; ++j) std::swap(b.at(k, j), b.at(piv, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const std::complex<double> f = a.at(i, k) / a.at(k, k);
            a.at(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
            for (std::size_t j = 0; j < b.cols; ++j) b.at(i, j) -= f * b.at(k, j);
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            std::complex<double> s = b.at(k, j);
            for (std::size_t i = k + 1; i < n; ++i) s -= a.at(k, i) * b.at(i, j);
            b.at(k, j) = s / a.at(k, k);
        }
    }
    return b;
}

/// Haar-distributed random unitary: QR of a complex Gaussian matrix via
/// modified Gram-Schmidt (two passes), whose R has a positive real diagonal,
/// so Q is Haar without further phase correction.
inline CMatrix haar_unitary(std::size_t n, Rng& rng) {
    if (n == 0) throw DimensionError("haar_unitary: n must be >= 1");
    CMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double re, im;
            rng.normal_pair(re, im);
            g.at(i, j) = {re, im};
        }
    // Orthonormalize columns in place; the second projection pass keeps
    // orthogonality at machine precision for the sizes used here.
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                std::complex<double> dot = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    dot += std::conj(g.at(i, k)) * g.at(i, j);
                for (std::size_t i = 0; i < n; ++i) g.at(i, j) -= dot * g.at(i, k);
            }
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm += std::norm(g.at(i, j));
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) throw NumericalError("haar_unitary: degenerate sample");
        for (std::size_t i = 0; i < n; ++i) g.at(i, j) /= nrm;
    }
    return g;
}

}  // namespace eunn
