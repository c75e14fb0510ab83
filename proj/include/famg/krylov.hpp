#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "dense.hpp"
#include "operator.hpp"
#include "types.hpp"

namespace famg {

struct SolveReport {
    DenseVector solution;
    long iterations = 0;
    DenseVector residual_history;  // preconditioned residual norms, length iterations+1
    bool converged = false;
    std::optional<double> cond_estimate;
    double setup_seconds = 0.0;
    double solve_seconds = 0.0;
};

// Condition estimate from the CG scalar history: the Lanczos tridiagonal
//   T[0][0]   = 1/alpha_0
//   T[k][k]   = 1/alpha_k + beta_{k-1}/alpha_{k-1}
//   T[k-1][k] = sqrt(beta_{k-1})/alpha_{k-1}
// shares its extreme eigenvalues with the preconditioned operator up to
// Krylov truncation; returns lambda_max/lambda_min.
inline double lanczos_cond_estimate(const DenseVector& alphas, const DenseVector& betas) {
    const index_t m = static_cast<index_t>(alphas.size());
    if (m < 2) throw numerical_error("lanczos_cond_estimate: need at least 2 iterations");
    if (betas.size() + 1 < alphas.size())
        throw numerical_error("lanczos_cond_estimate: beta history too short");
    DenseSymMatrix T(m);
    T.set(0, 0, 1.0 / alphas[0]);
    for (index_t k = 1; k < m; ++k) {
        T.set(k, k, 1.0 / alphas[k] + betas[k - 1] / alphas[k - 1]);
        T.set(k - 1, k, std::sqrt(betas[k - 1]) / alphas[k - 1]);
    }
    SymEigResult eig = dense_sym_eig(T);
    double lo = eig.eigenvalues.front(), hi = eig.eigenvalues.back();
    if (lo <= 0.0) throw numerical_error("lanczos_cond_estimate: nonpositive Ritz value");
    return hi / lo;
}

// Preconditioned conjugate gradients with B-inner-product stopping:
// iterate until ||r||_B <= tol*||b||_B (x0 = 0, so r0 = b) or maxit.
inline SolveReport pcg(const LinearOperator& A, const LinearOperator& B, const DenseVector& b,
                       double tol = 1e-8, long maxit = 1000, bool estimate_cond = false) {
    const auto t0 = std::chrono::steady_clock::now();
    check_dims(b.size(), static_cast<std::size_t>(A.dim()), "pcg rhs");

    SolveReport rep;
    rep.solution.assign(b.size(), 0.0);

    DenseVector r = b;
    DenseVector z;
    B.apply(r, z);
    double rz = dot(r, z);
    if (rz < 0.0) throw numerical_error("pcg breakdown: r^T B r = " + std::to_string(rz));
    const double bnorm = std::sqrt(rz);
    rep.residual_history.push_back(bnorm);
    if (bnorm == 0.0) {
        rep.converged = true;
        rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    DenseVector p = z, Ap;
    DenseVector alphas, betas;

    for (long k = 0; k < maxit; ++k) {
        A.apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0 || std::fabs(pAp) <= 1e-300)
            throw numerical_error("pcg breakdown: p^T A p = " + std::to_string(pAp));
        const double alpha = rz / pAp;
        axpy(alpha, p, rep.solution);
        axpy(-alpha, Ap, r);
        B.apply(r, z);
        const double rz_new = dot(r, z);
        if (rz_new < 0.0)
            throw numerical_error("pcg breakdown: r^T B r = " + std::to_string(rz_new));
        const double beta = rz_new / rz;
        if (estimate_cond) {
            alphas.push_back(alpha);
            betas.push_back(beta);
        }
        rz = rz_new;
        const double rnorm = std::sqrt(rz);
        rep.residual_history.push_back(rnorm);
        rep.iterations = k + 1;
        if (rnorm <= tol * bnorm) {
            rep.converged = true;
            break;
        }
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    }

    if (estimate_cond && alphas.size() >= 2)
        rep.cond_estimate = lanczos_cond_estimate(alphas, betas);
    rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// Preconditioned MINRES (Paige/Saunders recurrences). A symmetric, possibly
// indefinite; B must be SPD. Stops on the preconditioned residual estimate.
inline SolveReport minres(const LinearOperator& A, const LinearOperator& B, const DenseVector& b,
                          double tol = 1e-8, long maxit = 1000) {
    const auto t0 = std::chrono::steady_clock::now();
    check_dims(b.size(), static_cast<std::size_t>(A.dim()), "minres rhs");

    SolveReport rep;
    rep.solution.assign(b.size(), 0.0);

    DenseVector r1 = b;
    DenseVector y;
    B.apply(r1, y);
    double beta1 = dot(r1, y);
    if (beta1 < 0.0) throw numerical_error("minres breakdown: b^T B b = " + std::to_string(beta1));
    beta1 = std::sqrt(beta1);
    rep.residual_history.push_back(beta1);
    if (beta1 == 0.0) {
        rep.converged = true;
        rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    DenseVector r2 = r1, v(b.size()), w(b.size(), 0.0), w1(b.size(), 0.0), w2(b.size(), 0.0);
    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;

    for (long itn = 1; itn <= maxit; ++itn) {
        const double s = 1.0 / beta;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * y[i];
        A.apply(v, y);
        if (itn >= 2) axpy(-beta / oldb, r1, y);
        const double alfa = dot(v, y);
        axpy(-alfa / beta, r2, y);
        r1 = r2;
        r2 = y;
        B.apply(r2, y);
        oldb = beta;
        beta = dot(r2, y);
        if (beta < 0.0)
            throw numerical_error("minres breakdown: r^T B r = " + std::to_string(beta));
        beta = std::sqrt(beta);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::hypot(gbar, beta);
        gamma = std::max(gamma, 1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        w1 = w2;
        w2 = w;
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        axpy(phi, w, rep.solution);

        rep.iterations = itn;
        rep.residual_history.push_back(std::fabs(phibar));
        if (std::fabs(phibar) <= tol * beta1) {
            rep.converged = true;
            break;
        }
    }
    rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace famg
