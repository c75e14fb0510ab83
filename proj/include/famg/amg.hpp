#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "csr.hpp"
#include "dense.hpp"
#include "operator.hpp"
#include "types.hpp"

namespace famg {

enum class AmgType { UA, SA };

enum class SmootherKind { Jacobi, GaussSeidelForward, GaussSeidelBackward, SymGaussSeidel };

struct AmgParams {
    AmgType amg_type = AmgType::UA;
    int max_levels = 10;
    double strong_coupled = 0.0;  // strength threshold theta, entries below are filtered
    int max_aggregation = 100;    // aggregate size cap
    SmootherKind smoother = SmootherKind::GaussSeidelForward;
    int presmooth_steps = 1;
    int postsmooth_steps = 1;
    int coarse_min_dim = 100;
    double jacobi_weight = 2.0 / 3.0;  // damping for Jacobi smoothing and SA prolongation

    static AmgParams ua_defaults() { return {}; }

    // Smoothed aggregation wants a nonzero strength threshold to keep the
    // smoothed prolongation sparse.
    static AmgParams sa_defaults() {
        AmgParams p;
        p.amg_type = AmgType::SA;
        p.strong_coupled = 0.08;
        return p;
    }
};

// One sweep kind applied in-place: z is improved toward A z = r.
// Starting from z = 0 a single sweep realizes z = S r for the classical
// smoother operator S (weighted Jacobi: S = w D^-1; forward GS: (D+L)^-1).
inline void smoother_apply(SmootherKind kind, const CsrMatrix& A, const DenseVector& r,
                           DenseVector& z, int steps, double jacobi_weight = 1.0) {
    check_dims(r.size(), static_cast<std::size_t>(A.nrows), "smoother r");
    check_dims(z.size(), static_cast<std::size_t>(A.nrows), "smoother z");
    const index_t n = A.nrows;

    auto diag_at = [&](index_t i) -> double {
        for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k)
            if (A.col_indices[k] == i) return A.values[k];
        return 0.0;
    };

    auto gs_forward = [&]() {
        for (index_t i = 0; i < n; ++i) {
            double s = r[i];
            double d = 0.0;
            for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
                index_t j = A.col_indices[k];
                if (j == i)
                    d = A.values[k];
                else
                    s -= A.values[k] * z[j];
            }
            if (d == 0.0)
                throw numerical_error("smoother_apply: zero diagonal at row " + std::to_string(i));
            z[i] = s / d;
        }
    };
    auto gs_backward = [&]() {
        for (index_t i = n; i-- > 0;) {
            double s = r[i];
            double d = 0.0;
            for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
                index_t j = A.col_indices[k];
                if (j == i)
                    d = A.values[k];
                else
                    s -= A.values[k] * z[j];
            }
            if (d == 0.0)
                throw numerical_error("smoother_apply: zero diagonal at row " + std::to_string(i));
            z[i] = s / d;
        }
    };

    DenseVector res;
    for (int step = 0; step < steps; ++step) {
        switch (kind) {
            case SmootherKind::Jacobi: {
                spmv(A, z, res);
                for (index_t i = 0; i < n; ++i) res[i] = r[i] - res[i];
                for (index_t i = 0; i < n; ++i) {
                    double d = diag_at(i);
                    if (d == 0.0)
                        throw numerical_error("smoother_apply: zero diagonal at row " +
                                              std::to_string(i));
                    z[i] += jacobi_weight * res[i] / d;
                }
                break;
            }
            case SmootherKind::GaussSeidelForward:
                gs_forward();
                break;
            case SmootherKind::GaussSeidelBackward:
                gs_backward();
                break;
            case SmootherKind::SymGaussSeidel:
                gs_forward();
                gs_backward();
                break;
        }
    }
}

inline SmootherKind adjoint_smoother(SmootherKind kind) {
    switch (kind) {
        case SmootherKind::GaussSeidelForward: return SmootherKind::GaussSeidelBackward;
        case SmootherKind::GaussSeidelBackward: return SmootherKind::GaussSeidelForward;
        default: return kind;  // Jacobi and SGS are self-adjoint
    }
}

// Drops off-diagonal entries with |a_ij|/sqrt(a_ii*a_jj) below theta.
// The criterion is symmetric for symmetric input, so removal is symmetric.
inline CsrMatrix filter_strength(const CsrMatrix& A, double theta) {
    DenseVector d = csr_diagonal(A);
    for (index_t i = 0; i < A.nrows; ++i)
        if (d[i] <= 0.0)
            throw numerical_error("filter_strength: nonpositive diagonal at row " +
                                  std::to_string(i));
    if (theta <= 0.0) return A;

    CsrMatrix F;
    F.nrows = A.nrows;
    F.ncols = A.ncols;
    F.row_offsets.assign(static_cast<std::size_t>(A.nrows) + 1, 0);
    for (index_t i = 0; i < A.nrows; ++i) {
        for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
            index_t j = A.col_indices[k];
            if (i != j && std::fabs(A.values[k]) < theta * std::sqrt(d[i] * d[j])) continue;
            F.col_indices.push_back(j);
            F.values.push_back(A.values[k]);
        }
        F.row_offsets[static_cast<std::size_t>(i) + 1] = static_cast<index_t>(F.col_indices.size());
    }
    return F;
}

// Greedy seeded aggregation on the filtered graph. Deterministic: vertices
// are visited in index order, neighbors absorbed in ascending column order.
// A vertex whose neighbors are all taken joins the strongest-connected
// neighboring aggregate that still has room; vertices with no edges at all
// become singletons.
inline std::pair<std::vector<index_t>, index_t> aggregate(const CsrMatrix& filtered,
                                                          int max_aggregation) {
    const index_t n = filtered.nrows;
    DenseVector d = csr_diagonal(filtered);
    std::vector<index_t> labels(static_cast<std::size_t>(n), -1);
    std::vector<index_t> agg_size;
    index_t n_c = 0;

    auto for_neighbors = [&](index_t i, auto&& fn) {
        for (index_t k = filtered.row_offsets[i]; k < filtered.row_offsets[i + 1]; ++k) {
            index_t j = filtered.col_indices[k];
            if (j != i) fn(j, filtered.values[k]);
        }
    };

    for (index_t i = 0; i < n; ++i) {
        if (labels[i] != -1) continue;

        bool has_unlabeled = false, has_labeled = false;
        for_neighbors(i, [&](index_t j, double) {
            (labels[j] == -1 ? has_unlabeled : has_labeled) = true;
        });

        if (has_unlabeled) {
            index_t c = n_c++;
            labels[i] = c;
            std::vector<index_t> members = {i};
            for_neighbors(i, [&](index_t j, double) {
                if (labels[j] == -1 && static_cast<int>(members.size()) < max_aggregation) {
                    labels[j] = c;
                    members.push_back(j);
                }
            });
            if (static_cast<int>(members.size()) < 3) {
                std::vector<index_t> ring = members;
                for (index_t m : ring)
                    for_neighbors(m, [&](index_t j, double) {
                        if (labels[j] == -1 && static_cast<int>(members.size()) < max_aggregation) {
                            labels[j] = c;
                            members.push_back(j);
                        }
                    });
            }
            agg_size.push_back(static_cast<index_t>(members.size()));
        } else if (has_labeled) {
            index_t best = -1;
            double best_strength = -1.0;
            for_neighbors(i, [&](index_t j, double v) {
                index_t c = labels[j];
                if (c == -1 || agg_size[c] >= max_aggregation) return;
                double strength = std::fabs(v) / std::sqrt(d[i] * d[j]);
                if (strength > best_strength) {
                    best_strength = strength;
                    best = c;
                }
            });
            if (best != -1) {
                labels[i] = best;
                ++agg_size[best];
            } else {
                labels[i] = n_c++;
                agg_size.push_back(1);
            }
        } else {
            labels[i] = n_c++;  // isolated vertex
            agg_size.push_back(1);
        }
    }
    return {std::move(labels), n_c};
}

// Builds the tentative prolongation from the near-kernel vectors: aggregate a
// contributes the orthonormalized restriction of the kernel to its rows.
// Kernel columns that vanish on an aggregate are dropped (rank-revealing), so
// mixed-field hierarchies stay full rank; an aggregate on which the whole
// kernel vanishes is an error.
inline CsrMatrix tentative_prolongation(const std::vector<index_t>& labels, index_t n_c,
                                        const std::vector<DenseVector>& near_kernel) {
    const index_t n = static_cast<index_t>(labels.size());
    const index_t k = static_cast<index_t>(near_kernel.size());
    if (k < 1) throw structural_error("tentative_prolongation: empty near kernel");
    for (const DenseVector& psi : near_kernel)
        check_dims(psi.size(), static_cast<std::size_t>(n), "near_kernel vector");

    std::vector<std::vector<index_t>> members(static_cast<std::size_t>(n_c));
    for (index_t i = 0; i < n; ++i) members[labels[i]].push_back(i);

    std::vector<Triplet> trip;
    index_t col_base = 0;
    for (index_t a = 0; a < n_c; ++a) {
        const std::vector<index_t>& rows = members[a];
        std::vector<DenseVector> kept;
        for (index_t c = 0; c < k; ++c) {
            DenseVector v(rows.size());
            for (std::size_t l = 0; l < rows.size(); ++l) v[l] = near_kernel[c][rows[l]];
            double orig = norm2(v);
            for (const DenseVector& q : kept) {
                double proj = dot(q, v);
                axpy(-proj, q, v);
            }
            double nb = norm2(v);
            if (nb <= 1e-12 * std::max(orig, 1e-30) || orig == 0.0) continue;
            scale(1.0 / nb, v);
            kept.push_back(std::move(v));
        }
        if (kept.empty())
            throw numerical_error("tentative_prolongation: near-kernel vanishes on aggregate " +
                                  std::to_string(a));
        for (std::size_t c = 0; c < kept.size(); ++c)
            for (std::size_t l = 0; l < rows.size(); ++l)
                if (kept[c][l] != 0.0)
                    trip.push_back({rows[l], col_base + static_cast<index_t>(c), kept[c][l]});
        col_base += static_cast<index_t>(kept.size());
    }
    return csr_from_triplets(n, col_base, std::move(trip));
}

// P_s = (I - omega D^-1 A) P with omega = jacobi_weight / lambda_hat,
// lambda_hat a Gershgorin bound on rho(D^-1 A).
inline CsrMatrix smooth_prolongation(const CsrMatrix& P, const CsrMatrix& A,
                                     double jacobi_weight) {
    if (jacobi_weight == 0.0) return P;
    DenseVector d = csr_diagonal(A);
    double lambda_hat = 0.0;
    for (index_t i = 0; i < A.nrows; ++i) {
        if (d[i] <= 0.0)
            throw numerical_error("smooth_prolongation: nonpositive diagonal at row " +
                                  std::to_string(i));
        double s = 0.0;
        for (index_t kk = A.row_offsets[i]; kk < A.row_offsets[i + 1]; ++kk)
            s += std::fabs(A.values[kk]);
        lambda_hat = std::max(lambda_hat, s / d[i]);
    }
    const double omega = jacobi_weight / lambda_hat;

    CsrMatrix S;  // I - omega D^-1 A
    S.nrows = S.ncols = A.nrows;
    S.row_offsets = A.row_offsets;
    S.col_indices = A.col_indices;
    S.values.resize(A.values.size());
    for (index_t i = 0; i < A.nrows; ++i)
        for (index_t kk = A.row_offsets[i]; kk < A.row_offsets[i + 1]; ++kk) {
            double v = -omega * A.values[kk] / d[i];
            if (A.col_indices[kk] == i) v += 1.0;
            S.values[kk] = v;
        }
    return multiply(S, P);
}

struct AmgLevel {
    CsrMatrix A;
    CsrMatrix P;  // prolongation from the next (coarser) level; empty on the coarsest
    bool is_coarsest = false;
    DenseCholesky coarse_factor;  // populated on the coarsest level
};

struct AmgHierarchy {
    std::vector<AmgLevel> levels;  // fine to coarse
    AmgParams params;
    std::vector<DenseVector> near_kernel;
};

namespace detail {

// Full-rank verification of P via G = P^T P: dense Cholesky when the coarse
// dimension is small enough to densify, otherwise a strict-diagonal-dominance
// sufficient check (exact for the unsmoothed case where G = I).
inline void verify_full_column_rank(const CsrMatrix& P) {
    CsrMatrix G = multiply(transpose(P), P);
    if (G.nrows <= 2000) {
        DenseCholesky check(dense_from_csr(G));  // throws if not SPD
        (void)check;
        return;
    }
    for (index_t i = 0; i < G.nrows; ++i) {
        double diag = 0.0, off = 0.0;
        for (index_t k = G.row_offsets[i]; k < G.row_offsets[i + 1]; ++k) {
            if (G.col_indices[k] == i)
                diag = G.values[k];
            else
                off += std::fabs(G.values[k]);
        }
        if (diag <= 0.0)
            throw numerical_error("setup_hierarchy: rank-deficient prolongation (column " +
                                  std::to_string(i) + ")");
        (void)off;  // dominance not guaranteed for smoothed P; diagonal check only
    }
}

}  // namespace detail

// Recursive coarsening until the level cap or the coarse size floor. The
// coarsest operator is factorized densely.
inline AmgHierarchy setup_hierarchy(const CsrMatrix& A, const std::vector<DenseVector>& near_kernel,
                                    const AmgParams& params = {}) {
    if (A.nrows != A.ncols) throw dimension_error("setup_hierarchy: matrix not square");
    if (params.max_levels < 1) throw structural_error("setup_hierarchy: max_levels < 1");
    if (near_kernel.empty()) throw structural_error("setup_hierarchy: empty near kernel");
    for (const DenseVector& psi : near_kernel)
        if (norm2(psi) == 0.0) throw numerical_error("setup_hierarchy: zero near-kernel vector");

    AmgHierarchy h;
    h.params = params;
    h.near_kernel = near_kernel;
    h.levels.push_back(AmgLevel{A, {}, false, {}});

    std::vector<DenseVector> kernel = near_kernel;
    while (static_cast<int>(h.levels.size()) < params.max_levels &&
           h.levels.back().A.nrows > params.coarse_min_dim) {
        const CsrMatrix& Al = h.levels.back().A;
        CsrMatrix filtered = filter_strength(Al, params.strong_coupled);
        auto [labels, n_c] = aggregate(filtered, params.max_aggregation);
        if (n_c >= Al.nrows) break;  // stagnation: stop coarsening here

        CsrMatrix P_tent = tentative_prolongation(labels, n_c, kernel);
        std::vector<DenseVector> coarse_kernel;
        coarse_kernel.reserve(kernel.size());
        for (const DenseVector& psi : kernel)
            coarse_kernel.push_back(spmv_transposed(P_tent, psi));

        CsrMatrix P = (params.amg_type == AmgType::SA)
                          ? smooth_prolongation(P_tent, Al, params.jacobi_weight)
                          : std::move(P_tent);
        if (P.ncols >= Al.nrows) break;
        detail::verify_full_column_rank(P);

        CsrMatrix Ac = galerkin_product(P, Al);
        h.levels.back().P = std::move(P);
        h.levels.push_back(AmgLevel{std::move(Ac), {}, false, {}});
        kernel = std::move(coarse_kernel);
    }

    AmgLevel& coarsest = h.levels.back();
    coarsest.is_coarsest = true;
    coarsest.coarse_factor = DenseCholesky(dense_from_csr(coarsest.A));
    return h;
}

namespace detail {

inline DenseVector vcycle_level(const AmgHierarchy& h, std::size_t level, const DenseVector& g) {
    const AmgLevel& L = h.levels[level];
    if (L.is_coarsest) return L.coarse_factor.solve(g);

    DenseVector z(g.size(), 0.0);
    smoother_apply(h.params.smoother, L.A, g, z, h.params.presmooth_steps,
                   h.params.jacobi_weight);

    DenseVector Az = spmv(L.A, z);
    DenseVector r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = g[i] - Az[i];

    DenseVector gc = spmv_transposed(L.P, r);
    DenseVector zc = vcycle_level(h, level + 1, gc);
    DenseVector corr = spmv(L.P, zc);
    axpy(1.0, corr, z);

    smoother_apply(adjoint_smoother(h.params.smoother), L.A, g, z, h.params.postsmooth_steps,
                   h.params.jacobi_weight);
    return z;
}

}  // namespace detail

// One V-cycle: z = B g. Pre- and post-smoothers are adjoint-paired, so B is
// symmetric whenever presmooth_steps == postsmooth_steps.
inline DenseVector vcycle_apply(const AmgHierarchy& h, const DenseVector& g) {
    check_dims(g.size(), static_cast<std::size_t>(h.levels.front().A.nrows), "vcycle rhs");
    return detail::vcycle_level(h, 0, g);
}

struct AmgPrecondOperator final : LinearOperator {
    const AmgHierarchy& h;
    explicit AmgPrecondOperator(const AmgHierarchy& h_) : h(h_) {}
    index_t dim() const override { return h.levels.front().A.nrows; }
    void apply(const DenseVector& x, DenseVector& y) const override { y = vcycle_apply(h, x); }
};

}  // namespace famg
