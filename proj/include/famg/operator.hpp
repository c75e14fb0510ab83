#pragma once

#include "csr.hpp"
#include "dense.hpp"
#include "types.hpp"

namespace famg {

// Abstract square operator. Implementations hold references to their data;
// the caller keeps the underlying matrices alive for the operator's lifetime.
struct LinearOperator {
    virtual ~LinearOperator() = default;
    virtual index_t dim() const = 0;
    virtual void apply(const DenseVector& x, DenseVector& y) const = 0;

    DenseVector apply(const DenseVector& x) const {
        DenseVector y;
        apply(x, y);
        return y;
    }
};

struct CsrOperator final : LinearOperator {
    const CsrMatrix& A;
    explicit CsrOperator(const CsrMatrix& A_) : A(A_) {
        if (A.nrows != A.ncols) throw dimension_error("CsrOperator: matrix not square");
    }
    index_t dim() const override { return A.nrows; }
    void apply(const DenseVector& x, DenseVector& y) const override { spmv(A, x, y); }
};

struct IdentityOperator final : LinearOperator {
    index_t n;
    explicit IdentityOperator(index_t n_) : n(n_) {}
    index_t dim() const override { return n; }
    void apply(const DenseVector& x, DenseVector& y) const override { y = x; }
};

// Diagonal scaling preconditioner z = D^-1 r.
struct JacobiOperator final : LinearOperator {
    DenseVector inv_diag;
    explicit JacobiOperator(const CsrMatrix& A) {
        DenseVector d = csr_diagonal(A);
        inv_diag.resize(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] == 0.0)
                throw numerical_error("jacobi: zero diagonal at row " + std::to_string(i));
            inv_diag[i] = 1.0 / d[i];
        }
    }
    index_t dim() const override { return static_cast<index_t>(inv_diag.size()); }
    void apply(const DenseVector& x, DenseVector& y) const override {
        check_dims(x.size(), inv_diag.size(), "jacobi apply");
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = inv_diag[i] * x[i];
    }
};

struct DenseSymOperator final : LinearOperator {
    const DenseSymMatrix& A;
    explicit DenseSymOperator(const DenseSymMatrix& A_) : A(A_) {}
    index_t dim() const override { return A.n; }
    void apply(const DenseVector& x, DenseVector& y) const override { y = dense_apply(A, x); }
};

// Exact inverse via a dense Cholesky factorization (small systems, oracles).
struct DenseCholeskyOperator final : LinearOperator {
    DenseCholesky factor;
    explicit DenseCholeskyOperator(const DenseSymMatrix& A) : factor(A) {}
    index_t dim() const override { return factor.n; }
    void apply(const DenseVector& x, DenseVector& y) const override {
        y = x;
        factor.solve_in_place(y);
    }
};

}  // namespace famg
