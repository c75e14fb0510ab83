#pragma once

// Structured-mesh P1 finite element generators: a reaction-diffusion cube
// problem, stiffness/mass pairs for fractional preconditioning, and a
// 3d-1d coupled system whose interface term is controlled by rho_t.

#include <array>
#include <cmath>
#include <vector>

#include "block.hpp"
#include "csr.hpp"
#include "types.hpp"

namespace famg {

struct EllipticSystem {
    CsrMatrix A;  // stiffness + mass, SPD
    CsrMatrix M;  // consistent mass
    DenseVector b;
    index_t n_per_axis = 0;
    int dim = 3;
};

struct FractionalPair {
    CsrMatrix A;  // stiffness + mass
    CsrMatrix M;  // consistent mass
};

struct CoupledSystem {
    BlockSystem A;   // AD + rho_t * Mc
    BlockSystem AD;  // decoupled diffusion blocks
    BlockSystem Mc;  // interface metric term [Pi^T; -I][Pi  -I]
    CsrMatrix Pi;    // trace/sampling map, one unit row per line node
    double rho_t = 0.0;
};

namespace detail {

struct FemTriplets {
    std::vector<Triplet> stiff;
    std::vector<Triplet> mass;
    DenseVector lumped;  // row sums of the mass matrix
};

// -------- 1D: interval [0,1], n elements --------
inline FemTriplets assemble_1d(index_t n) {
    const double h = 1.0 / n;
    FemTriplets out;
    out.lumped.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (index_t e = 0; e < n; ++e) {
        index_t v[2] = {e, e + 1};
        const double k = 1.0 / h;
        const double kl[2][2] = {{k, -k}, {-k, k}};
        const double ml[2][2] = {{2.0 * h / 6.0, h / 6.0}, {h / 6.0, 2.0 * h / 6.0}};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                out.stiff.push_back({v[a], v[b], kl[a][b]});
                out.mass.push_back({v[a], v[b], ml[a][b]});
                out.lumped[v[a]] += ml[a][b];
            }
    }
    return out;
}

// -------- 2D: unit square, n x n cells, two triangles per cell --------
inline FemTriplets assemble_2d(index_t n) {
    const double h = 1.0 / n;
    const index_t nv = n + 1;
    FemTriplets out;
    out.lumped.assign(static_cast<std::size_t>(nv) * nv, 0.0);

    auto vid = [&](index_t i, index_t j) { return j * nv + i; };

    auto emit_triangle = [&](const std::array<index_t, 3>& v,
                             const std::array<std::array<double, 2>, 3>& p) {
        const double x10 = p[1][0] - p[0][0], y10 = p[1][1] - p[0][1];
        const double x20 = p[2][0] - p[0][0], y20 = p[2][1] - p[0][1];
        const double det = x10 * y20 - x20 * y10;
        const double area = std::fabs(det) / 2.0;
        // gradients of barycentric coordinates
        const double g[3][2] = {{(y10 - y20) / det, (x20 - x10) / det},
                                {y20 / det, -x20 / det},
                                {-y10 / det, x10 / det}};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double kv = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                double mv = (a == b) ? area / 6.0 : area / 12.0;
                out.stiff.push_back({v[a], v[b], kv});
                out.mass.push_back({v[a], v[b], mv});
                out.lumped[v[a]] += mv;
            }
    };

    for (index_t j = 0; j < n; ++j)
        for (index_t i = 0; i < n; ++i) {
            const double x0 = i * h, y0 = j * h;
            const index_t v00 = vid(i, j), v10 = vid(i + 1, j);
            const index_t v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            emit_triangle({v00, v10, v11},
                          {{{x0, y0}, {x0 + h, y0}, {x0 + h, y0 + h}}});
            emit_triangle({v00, v11, v01},
                          {{{x0, y0}, {x0 + h, y0 + h}, {x0, y0 + h}}});
        }
    return out;
}

// -------- 3D: unit cube, n^3 cells, six tetrahedra per cell (Kuhn split) --------
inline FemTriplets assemble_3d(index_t n) {
    const double h = 1.0 / n;
    const index_t nv = n + 1;
    FemTriplets out;
    const std::size_t nverts = static_cast<std::size_t>(nv) * nv * nv;
    out.lumped.assign(nverts, 0.0);
    out.stiff.reserve(96 * static_cast<std::size_t>(n) * n * n);
    out.mass.reserve(96 * static_cast<std::size_t>(n) * n * n);

    auto vid = [&](index_t i, index_t j, index_t k) { return (k * nv + j) * nv + i; };

    // the six axis permutations, fixed order
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                    {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

    for (index_t k = 0; k < n; ++k)
        for (index_t j = 0; j < n; ++j)
            for (index_t i = 0; i < n; ++i) {
                const index_t base[3] = {i, j, k};
                for (const int* perm : perms) {
                    // path from (0,0,0) to (1,1,1) through the cell
                    index_t corner[4][3];
                    for (int d = 0; d < 3; ++d) corner[0][d] = base[d];
                    for (int step = 0; step < 3; ++step) {
                        for (int d = 0; d < 3; ++d) corner[step + 1][d] = corner[step][d];
                        corner[step + 1][perm[step]] += 1;
                    }
                    index_t v[4];
                    double p[4][3];
                    for (int a = 0; a < 4; ++a) {
                        v[a] = vid(corner[a][0], corner[a][1], corner[a][2]);
                        for (int d = 0; d < 3; ++d) p[a][d] = corner[a][d] * h;
                    }

                    // B = [p1-p0, p2-p0, p3-p0] columns; gradients from B^-1
                    double B[3][3];
                    for (int c = 0; c < 3; ++c)
                        for (int d = 0; d < 3; ++d) B[d][c] = p[c + 1][d] - p[0][d];
                    const double det =
                        B[0][0] * (B[1][1] * B[2][2] - B[1][2] * B[2][1]) -
                        B[0][1] * (B[1][0] * B[2][2] - B[1][2] * B[2][0]) +
                        B[0][2] * (B[1][0] * B[2][1] - B[1][1] * B[2][0]);
                    const double vol = std::fabs(det) / 6.0;
                    double inv[3][3];
                    inv[0][0] = (B[1][1] * B[2][2] - B[1][2] * B[2][1]) / det;
                    inv[0][1] = (B[0][2] * B[2][1] - B[0][1] * B[2][2]) / det;
                    inv[0][2] = (B[0][1] * B[1][2] - B[0][2] * B[1][1]) / det;
                    inv[1][0] = (B[1][2] * B[2][0] - B[1][0] * B[2][2]) / det;
                    inv[1][1] = (B[0][0] * B[2][2] - B[0][2] * B[2][0]) / det;
                    inv[1][2] = (B[0][2] * B[1][0] - B[0][0] * B[1][2]) / det;
                    inv[2][0] = (B[1][0] * B[2][1] - B[1][1] * B[2][0]) / det;
                    inv[2][1] = (B[0][1] * B[2][0] - B[0][0] * B[2][1]) / det;
                    inv[2][2] = (B[0][0] * B[1][1] - B[0][1] * B[1][0]) / det;

                    // rows of inv are gradients of lambda_1..3; lambda_0 = -(sum)
                    double g[4][3];
                    for (int d = 0; d < 3; ++d)
                        g[0][d] = -(inv[0][d] + inv[1][d] + inv[2][d]);
                    for (int a = 1; a < 4; ++a)
                        for (int d = 0; d < 3; ++d) g[a][d] = inv[a - 1][d];

                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b) {
                            double kv = vol * (g[a][0] * g[b][0] + g[a][1] * g[b][1] +
                                               g[a][2] * g[b][2]);
                            double mv = (a == b) ? vol / 10.0 : vol / 20.0;
                            out.stiff.push_back({v[a], v[b], kv});
                            out.mass.push_back({v[a], v[b], mv});
                            out.lumped[v[a]] += mv;
                        }
                }
            }
    return out;
}

}  // namespace detail

// -Laplace + identity with natural (Neumann) boundary, unit cube, P1 on the
// structured six-tet mesh. Load f = sin(pi*x0) integrated with the lumped
// (vertex) quadrature rule.
inline EllipticSystem elliptic_3d(index_t n_per_axis) {
    if (n_per_axis < 1) throw structural_error("elliptic_3d: n_per_axis < 1");
    const index_t n = n_per_axis, nv = n + 1;
    const index_t ndof = nv * nv * nv;
    detail::FemTriplets fem = detail::assemble_3d(n);

    EllipticSystem sys;
    sys.n_per_axis = n;
    sys.dim = 3;
    sys.M = csr_from_triplets(ndof, ndof, std::move(fem.mass));
    {
        std::vector<Triplet> a = std::move(fem.stiff);
        a.reserve(a.size() + static_cast<std::size_t>(sys.M.nnz()));
        for (index_t r = 0; r < sys.M.nrows; ++r)
            for (index_t k = sys.M.row_offsets[r]; k < sys.M.row_offsets[r + 1]; ++k)
                a.push_back({r, sys.M.col_indices[k], sys.M.values[k]});
        sys.A = csr_from_triplets(ndof, ndof, std::move(a));
    }

    const double h = 1.0 / n;
    const double pi = 3.14159265358979323846;
    sys.b.assign(static_cast<std::size_t>(ndof), 0.0);
    for (index_t k = 0; k <= n; ++k)
        for (index_t j = 0; j <= n; ++j)
            for (index_t i = 0; i <= n; ++i) {
                index_t id = (k * nv + j) * nv + i;
                sys.b[id] = fem.lumped[id] * std::sin(pi * (i * h));
            }
    return sys;
}

// Stiffness+mass and mass pair for the fractional operator experiments.
inline FractionalPair fractional_pair(int dim, index_t n_per_axis) {
    if (n_per_axis < 2) throw structural_error("fractional_pair: n_per_axis < 2");
    detail::FemTriplets fem;
    index_t ndof = 0;
    if (dim == 1) {
        fem = detail::assemble_1d(n_per_axis);
        ndof = n_per_axis + 1;
    } else if (dim == 2) {
        fem = detail::assemble_2d(n_per_axis);
        ndof = (n_per_axis + 1) * (n_per_axis + 1);
    } else {
        throw structural_error("fractional_pair: dim must be 1 or 2");
    }
    FractionalPair out;
    out.M = csr_from_triplets(ndof, ndof, std::move(fem.mass));
    std::vector<Triplet> a = std::move(fem.stiff);
    for (index_t r = 0; r < out.M.nrows; ++r)
        for (index_t k = out.M.row_offsets[r]; k < out.M.row_offsets[r + 1]; ++k)
            a.push_back({r, out.M.col_indices[k], out.M.values[k]});
    out.A = csr_from_triplets(ndof, ndof, std::move(a));
    return out;
}

// Cube diffusion coupled to a 1d line along the central vertical axis.
// Pi samples 3d vertex values at the line nodes; the metric term
// Mc = [Pi^T; -I][Pi  -I] penalizes the mismatch Pi q3 - q1 with weight
// rho_t. Diffusion blocks carry an epsilon mass shift so each is SPD on
// its own.
inline CoupledSystem coupled_3d1d(index_t n_per_axis, double sigma3, double sigma1,
                                  double rho_t) {
    if (n_per_axis < 2) throw structural_error("coupled_3d1d: n_per_axis < 2");
    const double eps = 1e-8;
    const index_t n = n_per_axis, nv = n + 1;
    const index_t n3 = nv * nv * nv;
    const index_t n1 = nv;

    detail::FemTriplets f3 = detail::assemble_3d(n);
    detail::FemTriplets f1 = detail::assemble_1d(n);
    CsrMatrix K3 = csr_from_triplets(n3, n3, std::move(f3.stiff));
    CsrMatrix M3 = csr_from_triplets(n3, n3, std::move(f3.mass));
    CsrMatrix K1 = csr_from_triplets(n1, n1, std::move(f1.stiff));
    CsrMatrix M1 = csr_from_triplets(n1, n1, std::move(f1.mass));

    CsrMatrix A3 = add_scaled(K3, eps, M3);
    for (double& v : A3.values) v *= sigma3;
    CsrMatrix A1 = add_scaled(K1, eps, M1);
    for (double& v : A1.values) v *= sigma1;

    // line along the cube's central axis: vertices (ic, ic, k)
    const index_t ic = n / 2;
    std::vector<Triplet> pit;
    for (index_t k = 0; k <= n; ++k) pit.push_back({k, (k * nv + ic) * nv + ic, 1.0});
    CsrMatrix Pi = csr_from_triplets(n1, n3, std::move(pit));

    CoupledSystem cs;
    cs.rho_t = rho_t;
    cs.Pi = Pi;

    cs.AD = BlockSystem({n3, n1}, {n3, n1});
    cs.AD.set_block(0, 0, A3);
    cs.AD.set_block(1, 1, A1);

    CsrMatrix PiT = transpose(Pi);
    CsrMatrix PiTPi = multiply(PiT, Pi);
    CsrMatrix negPiT = PiT;
    for (double& v : negPiT.values) v = -v;
    CsrMatrix negPi = Pi;
    for (double& v : negPi.values) v = -v;

    cs.Mc = BlockSystem({n3, n1}, {n3, n1});
    cs.Mc.set_block(0, 0, PiTPi);
    cs.Mc.set_block(0, 1, negPiT);
    cs.Mc.set_block(1, 0, negPi);
    cs.Mc.set_block(1, 1, csr_identity(n1));

    cs.A = BlockSystem({n3, n1}, {n3, n1});
    if (rho_t == 0.0) {
        cs.A.set_block(0, 0, std::move(A3));
        cs.A.set_block(1, 1, std::move(A1));
    } else {
        cs.A.set_block(0, 0, add_scaled(A3, rho_t, PiTPi));
        CsrMatrix c01 = negPiT;
        for (double& v : c01.values) v *= rho_t;
        cs.A.set_block(0, 1, std::move(c01));
        CsrMatrix c10 = negPi;
        for (double& v : c10.values) v *= rho_t;
        cs.A.set_block(1, 0, std::move(c10));
        CsrMatrix ii = csr_identity(n1);
        for (double& v : ii.values) v = rho_t;
        cs.A.set_block(1, 1, add_scaled(A1, 1.0, ii));
    }
    return cs;
}

}  // namespace famg
