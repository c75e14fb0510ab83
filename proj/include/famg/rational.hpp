#pragma once

// Barycentric rational fitting of f(x) = 1/(alpha x^s + beta x^t), conversion
// to partial fractions, and the preconditioner that applies f of a generalized
// operator pencil (A, M) through shifted solves A - p_i M.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "amg.hpp"
#include "csr.hpp"
#include "dense.hpp"
#include "krylov.hpp"
#include "operator.hpp"
#include "types.hpp"

namespace famg {

struct Barycentric {
    DenseVector support_points;
    DenseVector values;
    DenseVector weights;
    double max_error = 0.0;
    bool converged = false;

    index_t terms() const { return static_cast<index_t>(support_points.size()); }

    // exact at support points by construction; extended-precision sums keep
    // the cancellation noise below the fitting tolerances
    double eval(double x) const {
        long double num = 0.0L, den = 0.0L;
        for (std::size_t j = 0; j < support_points.size(); ++j) {
            double dx = x - support_points[j];
            if (dx == 0.0) return values[j];
            long double q = static_cast<long double>(weights[j]) / dx;
            num += q * values[j];
            den += q;
        }
        return static_cast<double>(num / den);
    }
};

struct PoleResidueForm {
    double c0 = 0.0;
    DenseVector residues;
    DenseVector poles;
};

// Raised when pole extraction meets a complex-conjugate pair; carries the
// barycentric degree so the caller can refit one degree lower.
struct ComplexPoles : numerical_error {
    int degree;
    explicit ComplexPoles(int degree_)
        : numerical_error("poles_residues: complex pole pair at degree " +
                          std::to_string(degree_)),
          degree(degree_) {}
};

struct RationalPrecond {
    PoleResidueForm form;  // residues and poles already multiplied by rho
    double rho = 0.0;
    CsrMatrix A;
    CsrMatrix M;
    std::vector<AmgHierarchy> inner_hierarchies;  // one per shifted matrix A - p_i M
    DenseVector mass_inv_diag;                    // Jacobi data for the mass solves
    double inner_tol = 1e-6;
    int inner_maxit = 100;
    mutable long inner_failures = 0;  // inner solves that missed inner_tol
};

namespace detail {

// ---- dense nonsymmetric eigenvalues (small matrices only) ----

// diagonal similarity scaling toward equal row/column norms, radix 2
inline void balance_matrix(std::vector<double>& a, index_t n) {
    const double radix = 2.0, sqrdx = radix * radix;
    bool last = false;
    while (!last) {
        last = true;
        for (index_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (index_t j = 0; j < n; ++j)
                if (j != i) {
                    c += std::fabs(a[static_cast<std::size_t>(j) * n + i]);
                    r += std::fabs(a[static_cast<std::size_t>(i) * n + j]);
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0, s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                last = false;
                g = 1.0 / f;
                for (index_t j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] *= g;
                for (index_t j = 0; j < n; ++j) a[static_cast<std::size_t>(j) * n + i] *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form, in place
inline void hessenberg_reduce(std::vector<double>& a, index_t n) {
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    for (index_t k = 0; k + 2 < n; ++k) {
        double colscale = 0.0;
        for (index_t i = k + 1; i < n; ++i)
            colscale = std::max(colscale, std::fabs(a[static_cast<std::size_t>(i) * n + k]));
        if (colscale == 0.0) continue;
        double h = 0.0;
        for (index_t i = k + 1; i < n; ++i) {
            v[i] = a[static_cast<std::size_t>(i) * n + k] / colscale;
            h += v[i] * v[i];
        }
        double g = (v[k + 1] >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        h -= v[k + 1] * g;
        v[k + 1] -= g;
        for (index_t j = k + 1; j < n; ++j) {
            double s = 0.0;
            for (index_t i = k + 1; i < n; ++i) s += v[i] * a[static_cast<std::size_t>(i) * n + j];
            s /= h;
            for (index_t i = k + 1; i < n; ++i) a[static_cast<std::size_t>(i) * n + j] -= s * v[i];
        }
        for (index_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (index_t j = k + 1; j < n; ++j) s += a[static_cast<std::size_t>(i) * n + j] * v[j];
            s /= h;
            for (index_t j = k + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] -= s * v[j];
        }
        a[static_cast<std::size_t>(k + 1) * n + k] = colscale * g;
        for (index_t i = k + 2; i < n; ++i) a[static_cast<std::size_t>(i) * n + k] = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
// Destroys the input. Classical hqr formulation.
inline void hessenberg_eigenvalues(std::vector<double>& a, index_t n, DenseVector& wr,
                                   DenseVector& wi) {
    auto at = [&](index_t i, index_t j) -> double& {
        return a[static_cast<std::size_t>(i) * n + j];
    };
    const double eps = std::numeric_limits<double>::epsilon();
    wr.assign(static_cast<std::size_t>(n), 0.0);
    wi.assign(static_cast<std::size_t>(n), 0.0);

    double anorm = 0.0;
    for (index_t i = 0; i < n; ++i)
        for (index_t j = (i > 0 ? i - 1 : 0); j < n; ++j) anorm += std::fabs(at(i, j));
    if (anorm == 0.0) return;  // zero matrix

    index_t nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        index_t l;
        for (;;) {
            for (l = nn; l >= 1; --l) {
                double s = std::fabs(at(l - 1, l - 1)) + std::fabs(at(l, l));
                if (s == 0.0) s = anorm;
                if (std::fabs(at(l, l - 1)) <= eps * s) {
                    at(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = at(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                if (nn == 0) return;
                --nn;
                break;
            }
            double y = at(nn - 1, nn - 1);
            double w = at(nn, nn - 1) * at(nn - 1, nn);
            if (l == nn - 1) {
                double p = 0.5 * (y - x);
                double q = p * p + w;
                double z = std::sqrt(std::fabs(q));
                x += t;
                if (q >= 0.0) {
                    z = p + (p >= 0.0 ? z : -z);
                    wr[nn - 1] = wr[nn] = x + z;
                    if (z != 0.0) wr[nn] = x - w / z;
                    wi[nn - 1] = wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = wr[nn] = x + p;
                    wi[nn] = z;
                    wi[nn - 1] = -z;
                }
                if (nn == 1) return;
                nn -= 2;
                break;
            }
            if (its == 30)
                throw numerical_error("hessenberg_eigenvalues: QR sweep cap exceeded");
            if (its == 10 || its == 20) {
                t += x;
                for (index_t i = 0; i <= nn; ++i) at(i, i) -= x;
                double s = std::fabs(at(nn, nn - 1)) + std::fabs(at(nn - 1, nn - 2));
                y = x = 0.75 * s;
                w = -0.4375 * s * s;
            }
            ++its;
            index_t m;
            double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
            for (m = nn - 2;; --m) {
                z = at(m, m);
                double rr = x - z;
                double ss = y - z;
                p = (rr * ss - w) / at(m + 1, m) + at(m, m + 1);
                q = at(m + 1, m + 1) - z - rr - ss;
                r = at(m + 2, m + 1);
                double sc = std::fabs(p) + std::fabs(q) + std::fabs(r);
                p /= sc;
                q /= sc;
                r /= sc;
                if (m == l) break;
                double u = std::fabs(at(m, m - 1)) * (std::fabs(q) + std::fabs(r));
                double v = std::fabs(p) *
                           (std::fabs(at(m - 1, m - 1)) + std::fabs(z) + std::fabs(at(m + 1, m + 1)));
                if (u <= eps * v) break;
            }
            for (index_t i = m + 2; i <= nn; ++i) {
                at(i, i - 2) = 0.0;
                if (i != m + 2) at(i, i - 3) = 0.0;
            }
            for (index_t k = m; k <= nn - 1; ++k) {
                if (k != m) {
                    p = at(k, k - 1);
                    q = at(k + 1, k - 1);
                    r = (k != nn - 1) ? at(k + 2, k - 1) : 0.0;
                    double x2 = std::fabs(p) + std::fabs(q) + std::fabs(r);
                    if (x2 != 0.0) {
                        p /= x2;
                        q /= x2;
                        r /= x2;
                    }
                    x = x2;
                } else {
                    x = 0.0;
                }
                double s = std::sqrt(p * p + q * q + r * r);
                if (p < 0.0) s = -s;
                if (s == 0.0) continue;
                if (k == m) {
                    if (l != m) at(k, k - 1) = -at(k, k - 1);
                } else {
                    at(k, k - 1) = -s * x;
                }
                p += s;
                x = p / s;
                double y2 = q / s;
                double z2 = r / s;
                q /= p;
                r /= p;
                for (index_t j = k; j <= nn; ++j) {
                    double pp = at(k, j) + q * at(k + 1, j);
                    if (k != nn - 1) {
                        pp += r * at(k + 2, j);
                        at(k + 2, j) -= pp * z2;
                    }
                    at(k + 1, j) -= pp * y2;
                    at(k, j) -= pp * x;
                }
                index_t mmin = (nn < k + 3) ? nn : k + 3;
                for (index_t i = l; i <= mmin; ++i) {
                    double pp = x * at(i, k) + y2 * at(i, k + 1);
                    if (k != nn - 1) {
                        pp += z2 * at(i, k + 2);
                        at(i, k + 2) -= pp * r;
                    }
                    at(i, k + 1) -= pp * q;
                    at(i, k) -= pp;
                }
            }
        }
    }
}

inline void dense_eigenvalues(std::vector<double> a, index_t n, DenseVector& wr,
                              DenseVector& wi) {
    balance_matrix(a, n);
    hessenberg_reduce(a, n);
    hessenberg_eigenvalues(a, n, wr, wi);
}

// ---- least-squares weight solve for the AAA loop ----

// The Loewner least-squares problem is solved in extended precision: the
// matrix mixes magnitudes across the whole sample window, and in plain double
// the greedy loop stalls one or two digits short of the fitting tolerances.

// Householder QR with column pivoting of a column-major nr x m matrix;
// returns R column-major m x m for L*P with P recorded in perm (perm[j] =
// original index of the column placed at position j). The input is destroyed.
inline std::vector<long double> qr_upper_factor(std::vector<long double>& L, index_t nr,
                                                index_t m, std::vector<index_t>& perm) {
    std::vector<long double> rdiag(static_cast<std::size_t>(m), 0.0L);
    perm.resize(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    for (index_t k = 0; k < m; ++k) {
        index_t pivot = k;
        long double pnorm = -1.0L;
        for (index_t j = k; j < m; ++j) {
            const long double* cj = &L[static_cast<std::size_t>(j) * nr];
            long double s = 0.0L;
            for (index_t i = k; i < nr; ++i) s += cj[i] * cj[i];
            if (s > pnorm) {
                pnorm = s;
                pivot = j;
            }
        }
        if (pivot != k) {
            for (index_t i = 0; i < nr; ++i)
                std::swap(L[static_cast<std::size_t>(k) * nr + i],
                          L[static_cast<std::size_t>(pivot) * nr + i]);
            std::swap(perm[k], perm[pivot]);
        }
        long double* ck = &L[static_cast<std::size_t>(k) * nr];
        long double colscale = 0.0L;
        for (index_t i = k; i < nr; ++i) colscale = std::max(colscale, std::fabs(ck[i]));
        if (colscale == 0.0L) continue;
        long double h = 0.0L;
        for (index_t i = k; i < nr; ++i) {
            ck[i] /= colscale;
            h += ck[i] * ck[i];
        }
        long double g = (ck[k] >= 0.0L) ? -std::sqrt(h) : std::sqrt(h);
        h -= ck[k] * g;
        ck[k] -= g;
        for (index_t j = k + 1; j < m; ++j) {
            long double* cj = &L[static_cast<std::size_t>(j) * nr];
            long double s = 0.0L;
            for (index_t i = k; i < nr; ++i) s += ck[i] * cj[i];
            s /= h;
            for (index_t i = k; i < nr; ++i) cj[i] -= s * ck[i];
        }
        rdiag[k] = colscale * g;
    }
    std::vector<long double> R(static_cast<std::size_t>(m) * m, 0.0L);
    for (index_t j = 0; j < m; ++j) {
        for (index_t i = 0; i < j; ++i)
            R[static_cast<std::size_t>(j) * m + i] = L[static_cast<std::size_t>(j) * nr + i];
        R[static_cast<std::size_t>(j) * m + j] = rdiag[j];
    }
    return R;
}

// right singular vector of the smallest singular value via one-sided Jacobi;
// B is column-major m x m and consumed by value
inline std::vector<long double> smallest_right_singular(std::vector<long double> B, index_t m) {
    std::vector<long double> V(static_cast<std::size_t>(m) * m, 0.0L);
    for (index_t j = 0; j < m; ++j) V[static_cast<std::size_t>(j) * m + j] = 1.0L;
    auto col = [&](std::vector<long double>& a, index_t j) {
        return &a[static_cast<std::size_t>(j) * m];
    };

    for (int sweep = 0; sweep < 90; ++sweep) {
        bool rotated = false;
        for (index_t p = 0; p < m; ++p)
            for (index_t q = p + 1; q < m; ++q) {
                long double* bp = col(B, p);
                long double* bq = col(B, q);
                long double app = 0.0L, aqq = 0.0L, apq = 0.0L;
                for (index_t i = 0; i < m; ++i) {
                    app += bp[i] * bp[i];
                    aqq += bq[i] * bq[i];
                    apq += bp[i] * bq[i];
                }
                if (apq == 0.0L || std::fabs(apq) <= 1e-22L * std::sqrt(app * aqq)) continue;
                rotated = true;
                long double tau = (aqq - app) / (2.0L * apq);
                long double tt =
                    (tau >= 0.0L ? 1.0L : -1.0L) / (std::fabs(tau) + std::sqrt(1.0L + tau * tau));
                long double cs = 1.0L / std::sqrt(1.0L + tt * tt);
                long double sn = cs * tt;
                long double* vp = col(V, p);
                long double* vq = col(V, q);
                for (index_t i = 0; i < m; ++i) {
                    long double b1 = bp[i], b2 = bq[i];
                    bp[i] = cs * b1 - sn * b2;
                    bq[i] = sn * b1 + cs * b2;
                    long double v1 = vp[i], v2 = vq[i];
                    vp[i] = cs * v1 - sn * v2;
                    vq[i] = sn * v1 + cs * v2;
                }
            }
        if (!rotated) break;
    }

    index_t jmin = 0;
    long double smin = std::numeric_limits<long double>::infinity();
    for (index_t j = 0; j < m; ++j) {
        long double s = 0.0L;
        for (index_t i = 0; i < m; ++i) {
            long double v = B[static_cast<std::size_t>(j) * m + i];
            s += v * v;
        }
        if (s < smin) {
            smin = s;
            jmin = j;
        }
    }
    std::vector<long double> w(static_cast<std::size_t>(m));
    for (index_t i = 0; i < m; ++i) w[i] = V[static_cast<std::size_t>(jmin) * m + i];
    // deterministic sign: largest component positive
    index_t imax = 0;
    for (index_t i = 1; i < m; ++i)
        if (std::fabs(w[i]) > std::fabs(w[imax])) imax = i;
    if (w[imax] < 0.0L)
        for (long double& v : w) v = -v;
    return w;
}

}  // namespace detail

// Greedy barycentric fit: repeatedly interpolate at the worst sample and
// re-solve the Loewner least-squares problem for the weights.
inline Barycentric aaa(const DenseVector& sample_xs, const DenseVector& sample_fs, double tol,
                       int max_terms) {
    const index_t N = static_cast<index_t>(sample_xs.size());
    if (N < 2) throw structural_error("aaa: need at least 2 samples");
    check_dims(sample_fs.size(), sample_xs.size(), "aaa samples");
    if (max_terms < 1) throw structural_error("aaa: max_terms < 1");
    for (index_t i = 0; i < N; ++i)
        if (!std::isfinite(sample_xs[i]) || !std::isfinite(sample_fs[i]))
            throw structural_error("aaa: non-finite sample");
    {
        std::vector<index_t> order(static_cast<std::size_t>(N));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](index_t a, index_t b) { return sample_xs[a] < sample_xs[b]; });
        for (index_t i = 0; i + 1 < N; ++i)
            if (sample_xs[order[i]] == sample_xs[order[i + 1]])
                throw structural_error("aaa: duplicate sample point");
    }

    double fmax = 0.0;
    double fmean = 0.0;
    for (index_t i = 0; i < N; ++i) {
        fmax = std::max(fmax, std::fabs(sample_fs[i]));
        fmean += sample_fs[i];
    }
    fmean /= N;

    std::vector<char> is_support(static_cast<std::size_t>(N), 0);
    Barycentric cur, best;
    double best_err = std::numeric_limits<double>::infinity();
    DenseVector resid(static_cast<std::size_t>(N));
    for (index_t i = 0; i < N; ++i) resid[i] = sample_fs[i] - fmean;

    for (int m = 1; m <= max_terms && m < N; ++m) {
        index_t pick = -1;
        double err = -1.0;
        for (index_t i = 0; i < N; ++i) {
            if (is_support[i]) continue;
            double e = std::fabs(resid[i]);
            if (e > err) {
                err = e;
                pick = i;
            }
        }
        if (pick == -1) break;
        is_support[pick] = 1;
        cur.support_points.push_back(sample_xs[pick]);
        cur.values.push_back(sample_fs[pick]);

        const index_t nr = N - m;
        if (nr < 1) break;
        std::vector<long double> loewner(static_cast<std::size_t>(nr) * m);
        {
            index_t row = 0;
            for (index_t i = 0; i < N; ++i) {
                if (is_support[i]) continue;
                for (index_t j = 0; j < m; ++j)
                    loewner[static_cast<std::size_t>(j) * nr + row] =
                        (static_cast<long double>(sample_fs[i]) - cur.values[j]) /
                        (static_cast<long double>(sample_xs[i]) - cur.support_points[j]);
                ++row;
            }
        }
        std::vector<index_t> perm;
        std::vector<long double> R = detail::qr_upper_factor(loewner, nr, m, perm);
        std::vector<long double> wp = detail::smallest_right_singular(std::move(R), m);
        cur.weights.assign(static_cast<std::size_t>(m), 0.0);
        for (index_t j = 0; j < m; ++j) cur.weights[perm[j]] = static_cast<double>(wp[j]);

        cur.max_error = 0.0;
        for (index_t i = 0; i < N; ++i) {
            if (is_support[i]) {
                resid[i] = 0.0;
                continue;
            }
            resid[i] = sample_fs[i] - cur.eval(sample_xs[i]);
            cur.max_error = std::max(cur.max_error, std::fabs(resid[i]));
        }
        if (cur.max_error < best_err) {
            best_err = cur.max_error;
            best = cur;
        }
        if (cur.max_error <= tol * fmax) {
            cur.converged = true;
            return cur;
        }
    }
    best.converged = false;
    return best;
}

// Partial-fraction form R(x) = c0 + sum c_i/(x - p_i). Poles come from the
// arrowhead pencil of the barycentric representation, solved by shift-invert
// and a dense QR eigenvalue sweep; residues from N(p)/D'(p).
inline PoleResidueForm poles_residues(const Barycentric& b) {
    const index_t m = b.terms();
    if (m < 1) throw structural_error("poles_residues: empty barycentric form");
    check_dims(b.values.size(), b.support_points.size(), "barycentric values");
    check_dims(b.weights.size(), b.support_points.size(), "barycentric weights");
    double wabs = 0.0;
    for (double w : b.weights) wabs += std::fabs(w);
    if (wabs == 0.0) throw structural_error("poles_residues: all weights zero");

    PoleResidueForm out;
    if (m == 1) {
        out.c0 = b.values[0];
        return out;
    }

    const index_t np = m + 1;
    double zmin = b.support_points[0], zmax = b.support_points[0];
    for (double z : b.support_points) {
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
    }
    const double spread = (zmax > zmin) ? zmax - zmin : std::max(1.0, std::fabs(zmax));
    const double zmid = 0.5 * (zmin + zmax);

    // shift-invert C = (E - sigma B)^-1 B for the arrowhead pencil
    //   E = [0 w^T; 1 diag(z)],  B = diag(0, 1, ..., 1)
    DenseVector wr, wi;
    bool factored = false;
    for (int attempt = 0; attempt < 10 && !factored; ++attempt) {
        const double sigma = zmid + spread * 0.618033988749895 * (attempt + 1);
        std::vector<double> G(static_cast<std::size_t>(np) * np, 0.0);
        for (index_t j = 0; j < m; ++j) {
            G[static_cast<std::size_t>(0) * np + (j + 1)] = b.weights[j];
            G[static_cast<std::size_t>(j + 1) * np + 0] = 1.0;
            G[static_cast<std::size_t>(j + 1) * np + (j + 1)] = b.support_points[j] - sigma;
        }
        double gnorm = 0.0;
        for (double v : G) gnorm = std::max(gnorm, std::fabs(v));

        // LU with partial pivoting
        std::vector<index_t> piv(static_cast<std::size_t>(np));
        std::iota(piv.begin(), piv.end(), 0);
        bool singular = false;
        for (index_t k = 0; k < np; ++k) {
            index_t pk = k;
            for (index_t i = k + 1; i < np; ++i)
                if (std::fabs(G[static_cast<std::size_t>(i) * np + k]) >
                    std::fabs(G[static_cast<std::size_t>(pk) * np + k]))
                    pk = i;
            if (std::fabs(G[static_cast<std::size_t>(pk) * np + k]) <= 1e-14 * gnorm) {
                singular = true;
                break;
            }
            if (pk != k) {
                for (index_t j = 0; j < np; ++j)
                    std::swap(G[static_cast<std::size_t>(k) * np + j],
                              G[static_cast<std::size_t>(pk) * np + j]);
                std::swap(piv[k], piv[pk]);
            }
            for (index_t i = k + 1; i < np; ++i) {
                double l = G[static_cast<std::size_t>(i) * np + k] /
                           G[static_cast<std::size_t>(k) * np + k];
                G[static_cast<std::size_t>(i) * np + k] = l;
                for (index_t j = k + 1; j < np; ++j)
                    G[static_cast<std::size_t>(i) * np + j] -=
                        l * G[static_cast<std::size_t>(k) * np + j];
            }
        }
        if (singular) continue;

        std::vector<double> C(static_cast<std::size_t>(np) * np, 0.0);
        DenseVector colv(static_cast<std::size_t>(np));
        for (index_t c = 1; c < np; ++c) {  // B e_0 = 0, so column 0 of C stays zero
            for (index_t i = 0; i < np; ++i) colv[i] = (piv[i] == c) ? 1.0 : 0.0;
            for (index_t i = 0; i < np; ++i)
                for (index_t j = 0; j < i; ++j)
                    colv[i] -= G[static_cast<std::size_t>(i) * np + j] * colv[j];
            for (index_t i = np; i-- > 0;) {
                for (index_t j = i + 1; j < np; ++j)
                    colv[i] -= G[static_cast<std::size_t>(i) * np + j] * colv[j];
                colv[i] /= G[static_cast<std::size_t>(i) * np + i];
            }
            for (index_t i = 0; i < np; ++i) C[static_cast<std::size_t>(i) * np + c] = colv[i];
        }

        detail::dense_eigenvalues(std::move(C), np, wr, wi);

        // keep the m-1 largest-modulus eigenvalues (the two structural zeros
        // of the pencil drop out), map theta -> pole = sigma + 1/theta
        std::vector<index_t> order(static_cast<std::size_t>(np));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](index_t a, index_t c) {
            return wr[a] * wr[a] + wi[a] * wi[a] > wr[c] * wr[c] + wi[c] * wi[c];
        });
        out.poles.clear();
        for (index_t k = 0; k < m - 1; ++k) {
            double tr = wr[order[k]], ti = wi[order[k]];
            double den = tr * tr + ti * ti;
            if (den == 0.0) throw numerical_error("poles_residues: zero eigenvalue selected");
            double pre = sigma + tr / den;
            double pim = -ti / den;
            if (std::fabs(pim) > 1e-13 * (1.0 + std::fabs(pre))) throw ComplexPoles(m);
            out.poles.push_back(pre);
        }
        factored = true;
    }
    if (!factored) throw numerical_error("poles_residues: arrowhead pencil is singular");

    // Newton polish on the barycentric denominator D(p) = sum w_j/(p - z_j),
    // in extended precision. The pencil gives poles to absolute accuracy
    // ~eps*spread; small poles need relative accuracy for the partial-fraction
    // form to reproduce r near the lower end of the sample window.
    DenseVector polished(out.poles.size());
    for (std::size_t pi = 0; pi < out.poles.size(); ++pi) {
        auto den = [&](long double x, long double& d, long double& dd) {
            d = 0.0L;
            dd = 0.0L;
            for (index_t j = 0; j < m; ++j) {
                long double dx = x - static_cast<long double>(b.support_points[j]);
                if (dx == 0.0L) return false;
                d += static_cast<long double>(b.weights[j]) / dx;
                dd -= static_cast<long double>(b.weights[j]) / (dx * dx);
            }
            return true;
        };
        long double p = out.poles[pi];
        long double d, dd;
        if (den(p, d, dd)) {
            long double best_p = p, best_d = std::fabs(d);
            for (int step = 0; step < 4; ++step) {
                if (dd == 0.0L) break;
                long double pnew = p - d / dd;
                if (!std::isfinite(static_cast<double>(pnew)) || !den(pnew, d, dd)) break;
                p = pnew;
                if (std::fabs(d) < best_d) {
                    best_d = std::fabs(d);
                    best_p = p;
                }
            }
            p = best_p;
        }
        polished[pi] = static_cast<double>(p);
    }
    out.poles = std::move(polished);

    std::sort(out.poles.begin(), out.poles.end());
    out.residues.resize(out.poles.size());
    for (std::size_t i = 0; i < out.poles.size(); ++i) {
        long double p = out.poles[i];
        long double num = 0.0L, dden = 0.0L;
        for (index_t j = 0; j < m; ++j) {
            long double dx = p - static_cast<long double>(b.support_points[j]);
            num += static_cast<long double>(b.weights[j]) * b.values[j] / dx;
            dden -= static_cast<long double>(b.weights[j]) / (dx * dx);
        }
        out.residues[i] = static_cast<double>(num / dden);
    }

    long double wsum = 0.0L, wfsum = 0.0L;
    for (index_t j = 0; j < m; ++j) {
        wsum += static_cast<long double>(b.weights[j]);
        wfsum += static_cast<long double>(b.weights[j]) * b.values[j];
    }
    if (std::fabs(static_cast<double>(wsum)) > 1e-13 * wabs) {
        out.c0 = static_cast<double>(wfsum / wsum);
    } else {
        // least squares on the interpolation data with the poles fixed
        double acc = 0.0;
        for (index_t j = 0; j < m; ++j) {
            double v = b.values[j];
            for (std::size_t i = 0; i < out.poles.size(); ++i)
                v -= out.residues[i] / (b.support_points[j] - out.poles[i]);
            acc += v;
        }
        out.c0 = acc / m;
    }
    return out;
}

// d(d+1) ||A||_inf / min(diag M), an upper bound for the generalized spectrum
// of (A, M) on simplicial meshes of topological dimension d.
inline double spectral_bound(const CsrMatrix& A, const CsrMatrix& M, int dim) {
    if (A.nrows != A.ncols || M.nrows != M.ncols || A.nrows != M.nrows)
        throw dimension_error("spectral_bound: operands must be square and conforming");
    if (dim < 1) throw structural_error("spectral_bound: dim < 1");
    DenseVector md = csr_diagonal(M);
    double mmin = std::numeric_limits<double>::infinity();
    for (double v : md) mmin = std::min(mmin, v);
    if (mmin <= 0.0) throw numerical_error("spectral_bound: nonpositive mass diagonal");
    return dim * (dim + 1) * norm_inf(A) / mmin;
}

namespace detail {

// lower bound for lambda_min(M^-1 A): dense when affordable, else Gershgorin
inline double generalized_lower_bound(const CsrMatrix& A, const CsrMatrix& M) {
    if (A.nrows <= 800) {
        SymEigResult g = generalized_sym_eig(dense_from_csr(A), dense_from_csr(M));
        return g.eigenvalues.front();
    }
    double a_lb = std::numeric_limits<double>::infinity();
    double m_ub = 0.0;
    for (index_t i = 0; i < A.nrows; ++i) {
        double adiag = 0.0, aoff = 0.0;
        for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
            if (A.col_indices[k] == i)
                adiag = A.values[k];
            else
                aoff += std::fabs(A.values[k]);
        }
        a_lb = std::min(a_lb, adiag - aoff);
        double mdiag = 0.0, moff = 0.0;
        for (index_t k = M.row_offsets[i]; k < M.row_offsets[i + 1]; ++k) {
            if (M.col_indices[k] == i)
                mdiag = M.values[k];
            else
                moff += std::fabs(M.values[k]);
        }
        m_ub = std::max(m_ub, mdiag + moff);
    }
    if (a_lb <= 0.0 || m_ub <= 0.0) return 0.0;
    return a_lb / m_ub;
}

}  // namespace detail

// Fits g(lambda) = 1/(alpha (rho lambda)^s + beta (rho lambda)^t) on the
// scaled spectral window, converts to poles/residues and prepares one AMG
// hierarchy per shifted matrix. Complex or positive poles trigger a refit at
// lower degree, up to 5 retries.
inline RationalPrecond ra_setup(const CsrMatrix& A, const CsrMatrix& M, double s, double t,
                                double alpha, double beta, int dim, double aaa_tol,
                                const AmgParams& amg_params = {}) {
    if (A.nrows != A.ncols || M.nrows != M.ncols || A.nrows != M.nrows)
        throw dimension_error("ra_setup: operands must be square and conforming");
    if (alpha < 0.0 || beta < 0.0) throw structural_error("ra_setup: negative weight");
    if (alpha == 0.0 && beta == 0.0) throw structural_error("ra_setup: alpha and beta both zero");
    if (s < -1.0 || s > 1.0 || t < -1.0 || t > 1.0)
        throw structural_error("ra_setup: exponents must lie in [-1, 1]");

    RationalPrecond rp;
    rp.A = A;
    rp.M = M;
    rp.rho = spectral_bound(A, M, dim);

    const double lam_lo =
        std::max(1e-14, detail::generalized_lower_bound(A, M) / rp.rho);
    if (lam_lo >= 1.0) throw numerical_error("ra_setup: degenerate spectral window");

    const index_t ns = 100000;
    DenseVector xs(static_cast<std::size_t>(ns)), fs(static_cast<std::size_t>(ns));
    const double loglo = std::log(lam_lo);
    for (index_t k = 0; k < ns; ++k) {
        double lam = std::exp(loglo * (1.0 - static_cast<double>(k) / (ns - 1)));
        xs[k] = lam;
        fs[k] = 1.0 / (alpha * std::pow(rp.rho * lam, s) + beta * std::pow(rp.rho * lam, t));
    }

    PoleResidueForm pr;
    int max_terms = 30;
    int retries = 0;
    for (;;) {
        Barycentric fit = aaa(xs, fs, aaa_tol, max_terms);
        try {
            pr = poles_residues(fit);
        } catch (const ComplexPoles& e) {
            if (++retries > 5) throw;
            max_terms = e.degree - 1;
            if (max_terms < 1) throw;
            continue;
        }
        if (!pr.poles.empty() && pr.poles.back() > 0.0) {
            if (++retries > 5)
                throw numerical_error("ra_setup: positive pole persists after retries");
            max_terms = fit.terms() - 1;
            if (max_terms < 1)
                throw numerical_error("ra_setup: positive pole at trivial degree");
            continue;
        }
        break;
    }

    rp.form.c0 = pr.c0;
    rp.form.residues.reserve(pr.residues.size());
    rp.form.poles.reserve(pr.poles.size());
    for (std::size_t i = 0; i < pr.poles.size(); ++i) {
        rp.form.residues.push_back(rp.rho * pr.residues[i]);
        rp.form.poles.push_back(rp.rho * pr.poles[i]);
    }

    DenseVector ones(static_cast<std::size_t>(A.nrows), 1.0);
    rp.inner_hierarchies.reserve(rp.form.poles.size());
    for (double p : rp.form.poles) {
        CsrMatrix shifted = add_scaled(A, -p, M);  // p <= 0 keeps this SPD
        rp.inner_hierarchies.push_back(setup_hierarchy(shifted, {ones}, amg_params));
    }

    DenseVector mdiag = csr_diagonal(M);
    rp.mass_inv_diag.resize(mdiag.size());
    for (std::size_t i = 0; i < mdiag.size(); ++i) {
        if (mdiag[i] <= 0.0)
            throw numerical_error("ra_setup: nonpositive mass diagonal at row " +
                                  std::to_string(i));
        rp.mass_inv_diag[i] = 1.0 / mdiag[i];
    }
    return rp;
}

// z = c0 M^-1 r + sum c_i (A - p_i M)^-1 r with PCG inner solves. A solve
// that misses the inner tolerance bumps the failure counter and contributes
// its final iterate anyway.
inline DenseVector ra_apply(const RationalPrecond& rp, const DenseVector& r) {
    check_dims(r.size(), static_cast<std::size_t>(rp.A.nrows), "ra_apply rhs");
    DenseVector z(r.size(), 0.0);

    if (rp.form.c0 != 0.0) {
        struct DiagOp final : LinearOperator {
            const DenseVector& d;
            explicit DiagOp(const DenseVector& d_) : d(d_) {}
            index_t dim() const override { return static_cast<index_t>(d.size()); }
            void apply(const DenseVector& x, DenseVector& y) const override {
                y.resize(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) y[i] = d[i] * x[i];
            }
        };
        CsrOperator mass(rp.M);
        DiagOp jac(rp.mass_inv_diag);
        SolveReport rep = pcg(mass, jac, r, rp.inner_tol, rp.inner_maxit);
        if (!rep.converged) ++rp.inner_failures;
        axpy(rp.form.c0, rep.solution, z);
    }

    for (std::size_t i = 0; i < rp.form.poles.size(); ++i) {
        const AmgHierarchy& h = rp.inner_hierarchies[i];
        CsrOperator shifted(h.levels.front().A);
        AmgPrecondOperator amg(h);
        SolveReport rep = pcg(shifted, amg, r, rp.inner_tol, rp.inner_maxit);
        if (!rep.converged) ++rp.inner_failures;
        axpy(rp.form.residues[i], rep.solution, z);
    }
    return z;
}

struct RationalPrecondOperator final : LinearOperator {
    const RationalPrecond& rp;
    explicit RationalPrecondOperator(const RationalPrecond& rp_) : rp(rp_) {}
    index_t dim() const override { return rp.A.nrows; }
    void apply(const DenseVector& x, DenseVector& y) const override { y = ra_apply(rp, x); }
};

// Dense reference F = M U diag(alpha lambda^s + beta lambda^t) U^T M built
// from the generalized eigendecomposition of (A, M).
inline DenseSymMatrix dense_fractional_operator(const CsrMatrix& A, const CsrMatrix& M,
                                                double s, double t, double alpha,
                                                double beta) {
    SymEigResult g = generalized_sym_eig(dense_from_csr(A), dense_from_csr(M));
    const index_t n = g.n;
    DenseSymMatrix Md = dense_from_csr(M);

    DenseVector fval(static_cast<std::size_t>(n));
    for (index_t k = 0; k < n; ++k)
        fval[k] = alpha * std::pow(g.eigenvalues[k], s) + beta * std::pow(g.eigenvalues[k], t);

    // W = U diag(f(lambda)) U^T
    DenseSymMatrix W(n);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < n; ++k) acc += g.vec(i, k) * fval[k] * g.vec(j, k);
            W.values[static_cast<std::size_t>(i) * n + j] = acc;
        }

    DenseSymMatrix MW(n), F(n);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < n; ++k) acc += Md.at(i, k) * W.at(k, j);
            MW.values[static_cast<std::size_t>(i) * n + j] = acc;
        }
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < n; ++k) acc += MW.at(i, k) * Md.at(k, j);
            F.values[static_cast<std::size_t>(i) * n + j] = acc;
        }
    return F;
}

}  // namespace famg
