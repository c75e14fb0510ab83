#pragma once

#include <algorithm>
#include <cstddef>
#include <tuple>
#include <vector>

#include "types.hpp"

namespace famg {

// Compressed sparse row matrix, canonical form: within each row the column
// indices are strictly increasing, duplicates summed at construction.
struct CsrMatrix {
    index_t nrows = 0;
    index_t ncols = 0;
    std::vector<index_t> row_offsets;  // length nrows+1
    std::vector<index_t> col_indices;
    std::vector<double> values;

    index_t nnz() const { return static_cast<index_t>(col_indices.size()); }
};

struct Triplet {
    index_t row;
    index_t col;
    double value;
};

// Builds a canonical CSR matrix: duplicates summed, entries that sum to zero
// dropped, columns sorted per row. Stable sort keeps duplicate accumulation
// order equal to insertion order, so results are bitwise reproducible.
inline CsrMatrix csr_from_triplets(index_t nrows, index_t ncols, std::vector<Triplet> trip) {
    for (const Triplet& t : trip) {
        if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
            throw structural_error("csr_from_triplets: index (" + std::to_string(t.row) + "," +
                                   std::to_string(t.col) + ") outside " + std::to_string(nrows) +
                                   "x" + std::to_string(ncols));
    }
    std::stable_sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });

    CsrMatrix A;
    A.nrows = nrows;
    A.ncols = ncols;
    A.row_offsets.assign(static_cast<std::size_t>(nrows) + 1, 0);
    A.col_indices.reserve(trip.size());
    A.values.reserve(trip.size());

    std::size_t i = 0;
    while (i < trip.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < trip.size() && trip[j].row == trip[i].row && trip[j].col == trip[i].col)
            sum += trip[j++].value;
        if (sum != 0.0) {
            A.col_indices.push_back(trip[i].col);
            A.values.push_back(sum);
            ++A.row_offsets[static_cast<std::size_t>(trip[i].row) + 1];
        }
        i = j;
    }
    for (index_t r = 0; r < nrows; ++r)
        A.row_offsets[static_cast<std::size_t>(r) + 1] += A.row_offsets[r];
    return A;
}

inline std::vector<Triplet> csr_to_triplets(const CsrMatrix& A) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(A.nnz()));
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            trip.push_back({r, A.col_indices[k], A.values[k]});
    return trip;
}

// y = A*x, fixed per-row ascending-column summation order.
inline void spmv(const CsrMatrix& A, const DenseVector& x, DenseVector& y) {
    check_dims(x.size(), static_cast<std::size_t>(A.ncols), "spmv x");
    y.assign(static_cast<std::size_t>(A.nrows), 0.0);
    for (index_t r = 0; r < A.nrows; ++r) {
        double s = 0.0;
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            s += A.values[k] * x[A.col_indices[k]];
        y[r] = s;
    }
}

inline DenseVector spmv(const CsrMatrix& A, const DenseVector& x) {
    DenseVector y;
    spmv(A, x, y);
    return y;
}

// y = A^T*x without forming the transpose; row-major traversal keeps the
// scatter order fixed.
inline void spmv_transposed(const CsrMatrix& A, const DenseVector& x, DenseVector& y) {
    check_dims(x.size(), static_cast<std::size_t>(A.nrows), "spmv_transposed x");
    y.assign(static_cast<std::size_t>(A.ncols), 0.0);
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            y[A.col_indices[k]] += A.values[k] * x[r];
}

inline DenseVector spmv_transposed(const CsrMatrix& A, const DenseVector& x) {
    DenseVector y;
    spmv_transposed(A, x, y);
    return y;
}

inline CsrMatrix transpose(const CsrMatrix& A) {
    CsrMatrix T;
    T.nrows = A.ncols;
    T.ncols = A.nrows;
    T.row_offsets.assign(static_cast<std::size_t>(A.ncols) + 1, 0);
    T.col_indices.resize(static_cast<std::size_t>(A.nnz()));
    T.values.resize(static_cast<std::size_t>(A.nnz()));
    for (index_t k = 0; k < A.nnz(); ++k) ++T.row_offsets[A.col_indices[k] + 1];
    for (index_t c = 0; c < A.ncols; ++c) T.row_offsets[c + 1] += T.row_offsets[c];
    std::vector<index_t> next(T.row_offsets.begin(), T.row_offsets.end() - 1);
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k) {
            index_t pos = next[A.col_indices[k]]++;
            T.col_indices[pos] = r;
            T.values[pos] = A.values[k];
        }
    return T;  // rows emerge sorted because A's rows are scanned in order
}

// C = A*B by row-wise sparse accumulation. Each result row is gathered into a
// dense workspace then emitted in sorted column order (canonical form).
inline CsrMatrix multiply(const CsrMatrix& A, const CsrMatrix& B) {
    if (A.ncols != B.nrows)
        throw dimension_error("multiply: inner dims " + std::to_string(A.ncols) + " vs " +
                              std::to_string(B.nrows));
    CsrMatrix C;
    C.nrows = A.nrows;
    C.ncols = B.ncols;
    C.row_offsets.assign(static_cast<std::size_t>(A.nrows) + 1, 0);

    std::vector<double> work(static_cast<std::size_t>(B.ncols), 0.0);
    std::vector<index_t> marker(static_cast<std::size_t>(B.ncols), -1);
    std::vector<index_t> cols;
    for (index_t r = 0; r < A.nrows; ++r) {
        cols.clear();
        for (index_t ka = A.row_offsets[r]; ka < A.row_offsets[r + 1]; ++ka) {
            index_t j = A.col_indices[ka];
            double va = A.values[ka];
            for (index_t kb = B.row_offsets[j]; kb < B.row_offsets[j + 1]; ++kb) {
                index_t c = B.col_indices[kb];
                if (marker[c] != r) {
                    marker[c] = r;
                    work[c] = 0.0;
                    cols.push_back(c);
                }
                work[c] += va * B.values[kb];
            }
        }
        std::sort(cols.begin(), cols.end());
        for (index_t c : cols) {
            C.col_indices.push_back(c);
            C.values.push_back(work[c]);
        }
        C.row_offsets[static_cast<std::size_t>(r) + 1] =
            static_cast<index_t>(C.col_indices.size());
    }
    return C;
}

// P^T * A * P
inline CsrMatrix galerkin_product(const CsrMatrix& P, const CsrMatrix& A) {
    CsrMatrix AP = multiply(A, P);
    CsrMatrix Pt = transpose(P);
    return multiply(Pt, AP);
}

// C = A + s*B, same shape.
inline CsrMatrix add_scaled(const CsrMatrix& A, double s, const CsrMatrix& B) {
    if (A.nrows != B.nrows || A.ncols != B.ncols)
        throw dimension_error("add_scaled: shape mismatch");
    std::vector<Triplet> trip = csr_to_triplets(A);
    for (index_t r = 0; r < B.nrows; ++r)
        for (index_t k = B.row_offsets[r]; k < B.row_offsets[r + 1]; ++k)
            trip.push_back({r, B.col_indices[k], s * B.values[k]});
    return csr_from_triplets(A.nrows, A.ncols, std::move(trip));
}

inline DenseVector csr_diagonal(const CsrMatrix& A) {
    DenseVector d(static_cast<std::size_t>(A.nrows), 0.0);
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            if (A.col_indices[k] == r) d[r] = A.values[k];
    return d;
}

// max_i sum_j |a_ij|
inline double norm_inf(const CsrMatrix& A) {
    double m = 0.0;
    for (index_t r = 0; r < A.nrows; ++r) {
        double s = 0.0;
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k)
            s += std::fabs(A.values[k]);
        m = std::max(m, s);
    }
    return m;
}

inline CsrMatrix csr_identity(index_t n) {
    CsrMatrix I;
    I.nrows = I.ncols = n;
    I.row_offsets.resize(static_cast<std::size_t>(n) + 1);
    I.col_indices.resize(static_cast<std::size_t>(n));
    I.values.assign(static_cast<std::size_t>(n), 1.0);
    for (index_t i = 0; i <= n; ++i) I.row_offsets[i] = i;
    for (index_t i = 0; i < n; ++i) I.col_indices[i] = i;
    return I;
}

}  // namespace famg
