#pragma once

// Preconditioner for the coupled 3d-1d systems: multiplicative Schwarz on
// interface blocks wrapped symmetrically around one global AMG V-cycle.
// The block recipe guarantees every localized kernel mode of the coupling
// metric is contained in a single block, which is what makes the subspace
// correction robust in the coupling weight.

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include "amg.hpp"
#include "csr.hpp"
#include "dense.hpp"
#include "krylov.hpp"
#include "operator.hpp"
#include "problems.hpp"
#include "types.hpp"

namespace famg {

struct SchwarzBlocks {
    std::vector<std::vector<index_t>> blocks;  // sorted flattened index sets, may overlap
    std::vector<DenseCholesky> local_factors;
};

enum class SweepDirection { Forward, Backward };

// Interface = every 1d dof plus every 3d dof the coupling map touches, in
// flattened numbering (3d block first). Structure-based: the set depends on
// the sparsity of Pi, not on rho_t.
inline std::vector<index_t> detect_interface_dofs(const CoupledSystem& cs) {
    bool any = false;
    for (double v : cs.Pi.values)
        if (v != 0.0) {
            any = true;
            break;
        }
    if (!any) throw structural_error("detect_interface_dofs: coupling map Pi has no nonzeros");

    const index_t n3 = cs.Pi.ncols;
    const index_t n1 = cs.Pi.nrows;
    std::vector<index_t> dofs;
    for (index_t i = 0; i < n1; ++i)
        for (index_t k = cs.Pi.row_offsets[i]; k < cs.Pi.row_offsets[i + 1]; ++k)
            if (cs.Pi.values[k] != 0.0) dofs.push_back(cs.Pi.col_indices[k]);
    for (index_t i = 0; i < n1; ++i) dofs.push_back(n3 + i);
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    return dofs;
}

// One block per 1d dof i: its own flattened index, the 3d support of row i of
// Pi, and one ring of neighbors of that support in the 3d diffusion stencil.
// The frame vector of the coupling kernel localized at dof i is supported on
// {i's 1d index} . supp(Pi row i), so containment holds by construction; it
// is still asserted below because the whole method rests on it.
inline SchwarzBlocks build_schwarz_blocks(const CoupledSystem& cs) {
    const index_t n3 = cs.Pi.ncols;
    const index_t n1 = cs.Pi.nrows;
    const std::optional<CsrMatrix>& D3 = cs.AD.at(0, 0);
    if (!D3) throw structural_error("build_schwarz_blocks: missing 3d diffusion block");

    CsrMatrix F = cs.A.flatten();

    SchwarzBlocks sb;
    sb.blocks.reserve(static_cast<std::size_t>(n1));
    sb.local_factors.reserve(static_cast<std::size_t>(n1));
    for (index_t i = 0; i < n1; ++i) {
        std::vector<index_t> idx;
        idx.push_back(n3 + i);
        std::vector<index_t> support;
        for (index_t k = cs.Pi.row_offsets[i]; k < cs.Pi.row_offsets[i + 1]; ++k)
            if (cs.Pi.values[k] != 0.0) support.push_back(cs.Pi.col_indices[k]);
        for (index_t j : support) {
            idx.push_back(j);
            for (index_t k = D3->row_offsets[j]; k < D3->row_offsets[j + 1]; ++k)
                idx.push_back(D3->col_indices[k]);
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());

        auto contains = [&](index_t g) {
            return std::binary_search(idx.begin(), idx.end(), g);
        };
        for (index_t j : support)
            if (!contains(j))
                throw structural_error("build_schwarz_blocks: kernel frame escapes block " +
                                       std::to_string(i));
        if (!contains(n3 + i))
            throw structural_error("build_schwarz_blocks: kernel frame escapes block " +
                                   std::to_string(i));

        try {
            sb.local_factors.emplace_back(dense_submatrix(F, idx));
        } catch (const numerical_error&) {
            throw numerical_error("build_schwarz_blocks: singular local matrix on block " +
                                  std::to_string(i));
        }
        sb.blocks.push_back(std::move(idx));
    }
    return sb;
}

// Multiplicative sweep: z <- z + E_b A_b^-1 E_b^T (r - A z), one block at a
// time, backward being the exact order reversal. The residual rows a block
// needs are recomputed against the current z, which is bit-equivalent to a
// full recompute restricted to the block. One step of iterative refinement
// follows each local solve: the penalty structure gives the local matrices a
// condition number on the order of rho_t, and the refined solve keeps the
// local error near machine precision instead of eps*rho_t, which would
// otherwise put a noise floor under the outer CG at large coupling weights.
inline void schwarz_sweep(const SchwarzBlocks& sb, const CsrMatrix& A, const DenseVector& r,
                          DenseVector& z, SweepDirection dir) {
    check_dims(r.size(), static_cast<std::size_t>(A.nrows), "schwarz_sweep r");
    check_dims(z.size(), static_cast<std::size_t>(A.nrows), "schwarz_sweep z");
    const index_t nb = static_cast<index_t>(sb.blocks.size());
    for (index_t step = 0; step < nb; ++step) {
        const index_t b = (dir == SweepDirection::Forward) ? step : nb - 1 - step;
        const std::vector<index_t>& idx = sb.blocks[b];
        DenseVector rb(idx.size());
        for (std::size_t li = 0; li < idx.size(); ++li) {
            const index_t gi = idx[li];
            double s = r[gi];
            for (index_t k = A.row_offsets[gi]; k < A.row_offsets[gi + 1]; ++k)
                s -= A.values[k] * z[A.col_indices[k]];
            rb[li] = s;
        }
        DenseVector c = rb;
        sb.local_factors[b].solve_in_place(c);
        DenseVector d(idx.size());
        for (std::size_t li = 0; li < idx.size(); ++li) {
            const index_t gi = idx[li];
            double s = rb[li];
            for (index_t k = A.row_offsets[gi]; k < A.row_offsets[gi + 1]; ++k) {
                auto it = std::lower_bound(idx.begin(), idx.end(), A.col_indices[k]);
                if (it != idx.end() && *it == A.col_indices[k])
                    s -= A.values[k] * c[static_cast<std::size_t>(it - idx.begin())];
            }
            d[li] = s;
        }
        sb.local_factors[b].solve_in_place(d);
        for (std::size_t li = 0; li < idx.size(); ++li) z[idx[li]] += c[li] + d[li];
    }
}

struct MetricAmgPrecond {
    SchwarzBlocks schwarz;
    AmgHierarchy global_hierarchy;  // on the flattened coupled matrix
    std::vector<index_t> interface_dofs;
    AmgParams params;
    DenseVector gauge;  // normalized matched-constant mode, projected out of B; empty at rho_t = 0
};

// The global V-cycle needs one constant per field, not a single global
// constant: each diffusion block annihilates its own constant, and the two
// are glued only through the coupling term.
inline MetricAmgPrecond metric_amg_setup(const CoupledSystem& cs, const AmgParams& params = {}) {
    MetricAmgPrecond mp;
    mp.params = params;
    mp.interface_dofs = detect_interface_dofs(cs);
    mp.schwarz = build_schwarz_blocks(cs);

    const index_t n3 = cs.Pi.ncols;
    const index_t n1 = cs.Pi.nrows;
    CsrMatrix F = cs.A.flatten();
    if (F.nrows != n3 + n1)
        throw dimension_error("metric_amg_setup: flattened system is " + std::to_string(F.nrows) +
                              " rows, coupling map implies " + std::to_string(n3 + n1));

    std::vector<DenseVector> kernel(2, DenseVector(static_cast<std::size_t>(n3 + n1), 0.0));
    for (index_t i = 0; i < n3; ++i) kernel[0][i] = 1.0;
    for (index_t i = 0; i < n1; ++i) kernel[1][n3 + i] = 1.0;
    mp.global_hierarchy = setup_hierarchy(F, kernel, params);

    // With the metric term active, the matched constant (ones on both
    // fields) lies in its kernel and is controlled only by the tiny mass
    // regularization of the diffusion blocks, so the coupled operator is
    // nearly singular along that one direction at every rho_t > 0. B treats
    // it as a gauge mode: projecting it out of every application stops
    // matvec roundoff, amplified by the near singularity, from feeding back
    // into the Krylov iteration. At rho_t = 0 the fields decouple and each
    // carries its own near-constant mode; the matched constant is a mix of
    // the two rather than an approximate eigenvector, and projecting it out
    // would spread the preconditioned spectrum instead. No gauge then.
    if (cs.rho_t > 0.0) {
        mp.gauge.assign(static_cast<std::size_t>(n3 + n1), 1.0);
        scale(1.0 / norm2(mp.gauge), mp.gauge);
    }
    return mp;
}

// z = B r: forward Schwarz on the interface blocks, one V-cycle on the whole
// space, backward Schwarz, sandwiched between gauge projections. Exact order
// reversal plus a symmetric V-cycle and a symmetric projector make B
// symmetric; exact local solves keep the Schwarz stages nonexpansive, so B
// is positive away from the gauge mode.
inline DenseVector metric_amg_apply(const MetricAmgPrecond& mp, const DenseVector& r) {
    const CsrMatrix& A = mp.global_hierarchy.levels.front().A;
    check_dims(r.size(), static_cast<std::size_t>(A.nrows), "metric_amg_apply r");

    DenseVector rp = r;
    if (!mp.gauge.empty()) axpy(-dot(mp.gauge, r), mp.gauge, rp);

    DenseVector z(r.size(), 0.0);
    schwarz_sweep(mp.schwarz, A, rp, z, SweepDirection::Forward);

    DenseVector Az = spmv(A, z);
    DenseVector res(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) res[i] = rp[i] - Az[i];
    DenseVector corr = vcycle_apply(mp.global_hierarchy, res);
    axpy(1.0, corr, z);

    schwarz_sweep(mp.schwarz, A, rp, z, SweepDirection::Backward);

    if (!mp.gauge.empty()) axpy(-dot(mp.gauge, z), mp.gauge, z);
    return z;
}

struct MetricAmgPrecondOperator final : LinearOperator {
    const MetricAmgPrecond& mp;
    explicit MetricAmgPrecondOperator(const MetricAmgPrecond& mp_) : mp(mp_) {}
    index_t dim() const override { return mp.global_hierarchy.levels.front().A.nrows; }
    void apply(const DenseVector& x, DenseVector& y) const override {
        y = metric_amg_apply(mp, x);
    }
};

inline SolveReport solve_coupled(const CoupledSystem& cs, const DenseVector& b, double tol,
                                 const AmgParams& params = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricAmgPrecond mp = metric_amg_setup(cs, params);
    const double setup_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CsrOperator A(mp.global_hierarchy.levels.front().A);
    MetricAmgPrecondOperator B(mp);
    SolveReport rep = pcg(A, B, b, tol, 1000, /*estimate_cond=*/true);
    rep.setup_seconds = setup_s;
    return rep;
}

}  // namespace famg
