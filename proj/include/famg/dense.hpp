#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "csr.hpp"
#include "types.hpp"

namespace famg {

// Small dense symmetric matrix, row-major. Symmetry is maintained by set().
struct DenseSymMatrix {
    index_t n = 0;
    std::vector<double> values;  // n*n row-major

    DenseSymMatrix() = default;
    explicit DenseSymMatrix(index_t n_)
        : n(n_), values(static_cast<std::size_t>(n_) * n_, 0.0) {}

    double at(index_t i, index_t j) const { return values[static_cast<std::size_t>(i) * n + j]; }
    void set(index_t i, index_t j, double v) {
        values[static_cast<std::size_t>(i) * n + j] = v;
        values[static_cast<std::size_t>(j) * n + i] = v;
    }
    void add(index_t i, index_t j, double v) {
        values[static_cast<std::size_t>(i) * n + j] += v;
        if (i != j) values[static_cast<std::size_t>(j) * n + i] += v;
    }

    static DenseSymMatrix identity(index_t n) {
        DenseSymMatrix I(n);
        for (index_t i = 0; i < n; ++i) I.set(i, i, 1.0);
        return I;
    }
};

inline DenseVector dense_apply(const DenseSymMatrix& A, const DenseVector& x) {
    check_dims(x.size(), static_cast<std::size_t>(A.n), "dense_apply");
    DenseVector y(static_cast<std::size_t>(A.n), 0.0);
    for (index_t i = 0; i < A.n; ++i) {
        double s = 0.0;
        for (index_t j = 0; j < A.n; ++j) s += A.at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// Cholesky factorization A = L*L^T with the factor stored row-major.
struct DenseCholesky {
    index_t n = 0;
    std::vector<double> lower;  // n*n row-major, upper part zero

    DenseCholesky() = default;

    explicit DenseCholesky(const DenseSymMatrix& A) : n(A.n) {
        lower.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j <= i; ++j) {
                double s = A.at(i, j);
                for (index_t k = 0; k < j; ++k) s -= lat(i, k) * lat(j, k);
                if (i == j) {
                    if (s <= 0.0)
                        throw numerical_error("cholesky: nonpositive pivot at row " +
                                              std::to_string(i));
                    lset(i, j, std::sqrt(s));
                } else {
                    lset(i, j, s / lat(j, j));
                }
            }
        }
    }

    double lat(index_t i, index_t j) const { return lower[static_cast<std::size_t>(i) * n + j]; }

    // L y = b then L^T x = y
    void solve_in_place(DenseVector& x) const {
        check_dims(x.size(), static_cast<std::size_t>(n), "cholesky solve");
        for (index_t i = 0; i < n; ++i) {
            double s = x[i];
            for (index_t k = 0; k < i; ++k) s -= lat(i, k) * x[k];
            x[i] = s / lat(i, i);
        }
        for (index_t i = n; i-- > 0;) {
            double s = x[i];
            for (index_t k = i + 1; k < n; ++k) s -= lat(k, i) * x[k];
            x[i] = s / lat(i, i);
        }
    }

    DenseVector solve(DenseVector b) const {
        solve_in_place(b);
        return b;
    }

    // L y = b (forward only)
    void forward_solve_in_place(DenseVector& x) const {
        for (index_t i = 0; i < n; ++i) {
            double s = x[i];
            for (index_t k = 0; k < i; ++k) s -= lat(i, k) * x[k];
            x[i] = s / lat(i, i);
        }
    }

    // L^T x = b (backward only)
    void backward_solve_in_place(DenseVector& x) const {
        for (index_t i = n; i-- > 0;) {
            double s = x[i];
            for (index_t k = i + 1; k < n; ++k) s -= lat(k, i) * x[k];
            x[i] = s / lat(i, i);
        }
    }

   private:
    void lset(index_t i, index_t j, double v) { lower[static_cast<std::size_t>(i) * n + j] = v; }
};

inline DenseVector dense_cholesky_solve(const DenseSymMatrix& A, const DenseVector& b) {
    return DenseCholesky(A).solve(b);
}

struct SymEigResult {
    index_t n = 0;
    DenseVector eigenvalues;     // ascending
    std::vector<double> vectors; // row-major n*n; column k is the k-th eigenvector
    double vec(index_t i, index_t k) const { return vectors[static_cast<std::size_t>(i) * n + k]; }
};

namespace detail {

// Householder reduction to tridiagonal form with accumulated transforms
// (EISPACK tred2 lineage). z holds A on entry, the orthogonal Q on exit.
inline void tred2(index_t n, std::vector<double>& z, DenseVector& d, DenseVector& e) {
    auto Z = [&](index_t i, index_t j) -> double& {
        return z[static_cast<std::size_t>(i) * n + j];
    };
    for (index_t i = n - 1; i >= 1; --i) {
        index_t l = i - 1;
        double h = 0.0, sc = 0.0;
        if (l > 0) {
            for (index_t k = 0; k <= l; ++k) sc += std::fabs(Z(i, k));
            if (sc == 0.0) {
                e[i] = Z(i, l);
            } else {
                for (index_t k = 0; k <= l; ++k) {
                    Z(i, k) /= sc;
                    h += Z(i, k) * Z(i, k);
                }
                double f = Z(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = sc * g;
                h -= f * g;
                Z(i, l) = f - g;
                f = 0.0;
                for (index_t j = 0; j <= l; ++j) {
                    Z(j, i) = Z(i, j) / h;
                    g = 0.0;
                    for (index_t k = 0; k <= j; ++k) g += Z(j, k) * Z(i, k);
                    for (index_t k = j + 1; k <= l; ++k) g += Z(k, j) * Z(i, k);
                    e[j] = g / h;
                    f += e[j] * Z(i, j);
                }
                double hh = f / (h + h);
                for (index_t j = 0; j <= l; ++j) {
                    f = Z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (index_t k = 0; k <= j; ++k) Z(j, k) -= f * e[k] + g * Z(i, k);
                }
            }
        } else {
            e[i] = Z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (index_t i = 0; i < n; ++i) {
        index_t l = i - 1;
        if (d[i] != 0.0) {
            for (index_t j = 0; j <= l; ++j) {
                double g = 0.0;
                for (index_t k = 0; k <= l; ++k) g += Z(i, k) * Z(k, j);
                for (index_t k = 0; k <= l; ++k) Z(k, j) -= g * Z(k, i);
            }
        }
        d[i] = Z(i, i);
        Z(i, i) = 1.0;
        for (index_t j = 0; j <= l; ++j) Z(j, i) = Z(i, j) = 0.0;
    }
}

// Implicit-shift QL on the tridiagonal (d, e), rotations applied to the
// columns of z. Total sweep count capped at 30*n.
inline void tql2(index_t n, DenseVector& d, DenseVector& e, std::vector<double>& z) {
    auto Z = [&](index_t i, index_t j) -> double& {
        return z[static_cast<std::size_t>(i) * n + j];
    };
    for (index_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    const double eps = 2.22e-16;
    long iter_budget = 30L * n;
    for (index_t l = 0; l < n; ++l) {
        index_t m;
        do {
            for (m = l; m < n - 1; ++m) {
                double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (--iter_budget < 0)
                    throw numerical_error("dense_sym_eig: QL sweep cap exceeded");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (index_t i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (index_t k = 0; k < n; ++k) {
                        f = Z(k, i + 1);
                        Z(k, i + 1) = s * Z(k, i) + c * f;
                        Z(k, i) = c * Z(k, i) - s * f;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

// Full symmetric eigendecomposition; eigenvalues ascending, eigenvectors as
// columns of an orthogonal matrix.
inline SymEigResult dense_sym_eig(const DenseSymMatrix& A) {
    SymEigResult res;
    res.n = A.n;
    if (A.n == 0) return res;
    res.vectors = A.values;
    res.eigenvalues.assign(static_cast<std::size_t>(A.n), 0.0);
    DenseVector e(static_cast<std::size_t>(A.n), 0.0);
    if (A.n == 1) {
        res.eigenvalues[0] = A.at(0, 0);
        res.vectors[0] = 1.0;
        return res;
    }
    detail::tred2(A.n, res.vectors, res.eigenvalues, e);
    detail::tql2(A.n, res.eigenvalues, e, res.vectors);

    // sort ascending, carrying eigenvector columns
    index_t n = A.n;
    std::vector<index_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](index_t a, index_t b) {
        return res.eigenvalues[a] < res.eigenvalues[b];
    });
    DenseVector dsorted(static_cast<std::size_t>(n));
    std::vector<double> vsorted(static_cast<std::size_t>(n) * n);
    for (index_t k = 0; k < n; ++k) {
        dsorted[k] = res.eigenvalues[perm[k]];
        for (index_t i = 0; i < n; ++i)
            vsorted[static_cast<std::size_t>(i) * n + k] =
                res.vectors[static_cast<std::size_t>(i) * n + perm[k]];
    }
    res.eigenvalues = std::move(dsorted);
    res.vectors = std::move(vsorted);
    return res;
}

// Generalized symmetric eigenproblem A u = lambda M u with M SPD, solved by
// the Cholesky transform C = L^-1 A L^-T, returning M-orthonormal vectors
// U = L^-T V.  A u_k = lambda_k M u_k, U^T M U = I.
inline SymEigResult generalized_sym_eig(const DenseSymMatrix& A, const DenseSymMatrix& M) {
    if (A.n != M.n) throw dimension_error("generalized_sym_eig: A and M differ");
    index_t n = A.n;
    DenseCholesky chol(M);

    // C = L^-1 A L^-T, built column by column
    DenseSymMatrix C(n);
    std::vector<DenseVector> cols(static_cast<std::size_t>(n));
    for (index_t j = 0; j < n; ++j) {
        DenseVector col(static_cast<std::size_t>(n));
        for (index_t i = 0; i < n; ++i) col[i] = A.at(i, j);
        chol.forward_solve_in_place(col);  // Y = L^-1 A
        cols[j] = std::move(col);
    }
    for (index_t i = 0; i < n; ++i) {
        DenseVector row(static_cast<std::size_t>(n));
        for (index_t j = 0; j < n; ++j) row[j] = cols[j][i];  // row i of Y
        chol.forward_solve_in_place(row);                     // (L^-1 Y^T) column
        for (index_t j = 0; j <= i; ++j) C.set(i, j, row[j]);
    }

    SymEigResult res = dense_sym_eig(C);
    for (index_t k = 0; k < n; ++k) {
        DenseVector v(static_cast<std::size_t>(n));
        for (index_t i = 0; i < n; ++i) v[i] = res.vec(i, k);
        chol.backward_solve_in_place(v);  // u = L^-T v
        for (index_t i = 0; i < n; ++i)
            res.vectors[static_cast<std::size_t>(i) * n + k] = v[i];
    }
    return res;
}

// A restricted to a sorted index set, densified (Schwarz blocks, oracles).
inline DenseSymMatrix dense_submatrix(const CsrMatrix& A, const std::vector<index_t>& idx) {
    DenseSymMatrix S(static_cast<index_t>(idx.size()));
    for (index_t li = 0; li < S.n; ++li) {
        index_t gi = idx[li];
        for (index_t k = A.row_offsets[gi]; k < A.row_offsets[gi + 1]; ++k) {
            auto it = std::lower_bound(idx.begin(), idx.end(), A.col_indices[k]);
            if (it != idx.end() && *it == A.col_indices[k])
                S.values[static_cast<std::size_t>(li) * S.n +
                         static_cast<index_t>(it - idx.begin())] = A.values[k];
        }
    }
    return S;
}

inline DenseSymMatrix dense_from_csr(const CsrMatrix& A) {
    if (A.nrows != A.ncols) throw dimension_error("dense_from_csr: not square");
    DenseSymMatrix D(A.nrows);
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            D.values[static_cast<std::size_t>(r) * A.nrows + A.col_indices[k]] = A.values[k];
    return D;
}

}  // namespace famg
