#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include <famg/dense.hpp>
#include <famg/krylov.hpp>
#include <famg/problems.hpp>
#include <famg/rational.hpp>

#include "oracles.hpp"

using famg::Barycentric;
using famg::CsrMatrix;
using famg::DenseVector;
using famg::index_t;
using famg::PoleResidueForm;
using famg::RationalPrecond;

namespace {

DenseVector log_grid(double lo, double hi, index_t n) {
    DenseVector xs(static_cast<std::size_t>(n));
    const double la = std::log(lo), lb = std::log(hi);
    for (index_t k = 0; k < n; ++k)
        xs[k] = std::exp(la + (lb - la) * static_cast<double>(k) / (n - 1));
    xs.front() = lo;
    xs.back() = hi;
    return xs;
}

DenseVector map_values(const DenseVector& xs, double (*f)(double)) {
    DenseVector fs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = f(xs[i]);
    return fs;
}

double inv_sqrt(double x) { return 1.0 / std::sqrt(x); }

// worst-case |R(x) - target| helpers evaluate both forms directly
double eval_partial_fractions(const PoleResidueForm& pr, double x) {
    double v = pr.c0;
    for (std::size_t i = 0; i < pr.poles.size(); ++i) v += pr.residues[i] / (x - pr.poles[i]);
    return v;
}

}  // namespace

// ============================================================
// aaa
// ============================================================

TEST_CASE("aaa: recovers 1/(x+1) exactly with two support points", "[rational]") {
    const index_t N = 100;
    DenseVector xs(static_cast<std::size_t>(N)), fs(static_cast<std::size_t>(N));
    for (index_t i = 0; i < N; ++i) {
        xs[i] = static_cast<double>(i) / (N - 1);
        fs[i] = 1.0 / (xs[i] + 1.0);
    }
    Barycentric b = famg::aaa(xs, fs, 1e-13, 30);
    REQUIRE(b.converged);
    REQUIRE(b.terms() == 2);
    REQUIRE(b.max_error <= 1e-14);
}

TEST_CASE("aaa: inverse square root fits within 25 terms at 1e-12", "[rational]") {
    DenseVector xs = log_grid(1e-6, 1.0, 100000);
    DenseVector fs = map_values(xs, inv_sqrt);
    Barycentric b = famg::aaa(xs, fs, 1e-12, 30);
    REQUIRE(b.converged);
    REQUIRE(b.terms() <= 25);
    const double fmax = famg::norm_inf(fs);
    REQUIRE(b.max_error <= 1e-12 * fmax);

    SECTION("dense probes stay within 1.01x of the reported max error") {
        DenseVector probes = log_grid(1e-6, 1.0, 1000000);
        double worst = 0.0;
        for (double x : probes) worst = std::max(worst, std::fabs(inv_sqrt(x) - b.eval(x)));
        REQUIRE(worst <= b.max_error * 1.01);
    }

    SECTION("interpolation is exact at support points") {
        for (index_t j = 0; j < b.terms(); ++j) {
            double r = b.eval(b.support_points[j]);
            REQUIRE(std::fabs(r - b.values[j]) <= 1e-13 * std::fabs(b.values[j]));
        }
    }
}

TEST_CASE("aaa: returns best fit with converged=false when capped", "[rational]") {
    DenseVector xs = log_grid(1e-6, 1.0, 2000);
    DenseVector fs = map_values(xs, inv_sqrt);
    Barycentric b = famg::aaa(xs, fs, 1e-12, 4);
    REQUIRE_FALSE(b.converged);
    REQUIRE(b.terms() <= 4);
    REQUIRE(b.max_error > 0.0);
    // the cap still produces a usable low-accuracy fit
    REQUIRE(b.max_error <= 0.5 * famg::norm_inf(fs));
}

TEST_CASE("aaa: constant samples converge with a single term", "[rational]") {
    DenseVector xs = {0.1, 0.4, 0.7, 1.0};
    DenseVector fs(4, 2.0);
    Barycentric b = famg::aaa(xs, fs, 1e-13, 10);
    REQUIRE(b.converged);
    REQUIRE(b.terms() == 1);
    REQUIRE(b.max_error == 0.0);
    REQUIRE(b.eval(0.55) == 2.0);
}

TEST_CASE("aaa: input validation", "[rational]") {
    REQUIRE_THROWS_AS(famg::aaa({1.0}, {1.0}, 1e-12, 10), famg::structural_error);
    REQUIRE_THROWS_AS(famg::aaa({1.0, 1.0, 2.0}, {1.0, 1.0, 2.0}, 1e-12, 10),
                      famg::structural_error);
    double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(famg::aaa({1.0, 2.0}, {1.0, inf}, 1e-12, 10), famg::structural_error);
    REQUIRE_THROWS_AS(famg::aaa({1.0, 2.0}, {1.0, 2.0}, 1e-12, 0), famg::structural_error);
    REQUIRE_THROWS_AS(famg::aaa({1.0, 2.0, 3.0}, {1.0, 2.0}, 1e-12, 10), famg::dimension_error);
}

// ============================================================
// poles_residues
// ============================================================

TEST_CASE("poles_residues: 1/(x+1) gives pole -1, residue 1, c0 0", "[rational]") {
    const index_t N = 100;
    DenseVector xs(static_cast<std::size_t>(N)), fs(static_cast<std::size_t>(N));
    for (index_t i = 0; i < N; ++i) {
        xs[i] = static_cast<double>(i) / (N - 1);
        fs[i] = 1.0 / (xs[i] + 1.0);
    }
    Barycentric b = famg::aaa(xs, fs, 1e-13, 30);
    PoleResidueForm pr = famg::poles_residues(b);
    REQUIRE(pr.poles.size() == 1);
    REQUIRE(std::fabs(pr.poles[0] - (-1.0)) <= 1e-10);
    REQUIRE(std::fabs(pr.residues[0] - 1.0) <= 1e-10);
    REQUIRE(std::fabs(pr.c0) <= 1e-10);
}

TEST_CASE("poles_residues: constant form collapses to c0", "[rational]") {
    DenseVector xs = {0.1, 0.4, 0.7, 1.0};
    DenseVector fs(4, 2.0);
    Barycentric b = famg::aaa(xs, fs, 1e-13, 10);
    PoleResidueForm pr = famg::poles_residues(b);
    REQUIRE(pr.poles.empty());
    REQUIRE(pr.residues.empty());
    REQUIRE(pr.c0 == 2.0);
}

TEST_CASE("poles_residues: partial fractions reproduce the barycentric fit", "[rational]") {
    DenseVector xs = log_grid(1e-6, 1.0, 100000);
    DenseVector fs = map_values(xs, inv_sqrt);
    Barycentric b = famg::aaa(xs, fs, 1e-12, 30);
    PoleResidueForm pr = famg::poles_residues(b);
    REQUIRE(pr.poles.size() == static_cast<std::size_t>(b.terms() - 1));
    for (std::size_t i = 0; i + 1 < pr.poles.size(); ++i)
        REQUIRE(pr.poles[i] <= pr.poles[i + 1]);

    DenseVector probes = log_grid(1e-6, 1.0, 20011);
    double worst = 0.0;
    for (double x : probes)
        worst = std::max(worst, std::fabs(eval_partial_fractions(pr, x) - b.eval(x)));
    REQUIRE(worst <= 1e-9);
}

TEST_CASE("poles_residues: complex pair raises ComplexPoles with the degree", "[rational]") {
    // 1/(x^2 + 0.01) has poles at +-0.1i; the fit recovers them exactly
    const index_t N = 400;
    DenseVector xs(static_cast<std::size_t>(N)), fs(static_cast<std::size_t>(N));
    for (index_t i = 0; i < N; ++i) {
        xs[i] = static_cast<double>(i) / (N - 1);
        fs[i] = 1.0 / (xs[i] * xs[i] + 0.01);
    }
    Barycentric b = famg::aaa(xs, fs, 1e-13, 30);
    try {
        famg::poles_residues(b);
        FAIL("expected ComplexPoles");
    } catch (const famg::ComplexPoles& e) {
        REQUIRE(e.degree == b.terms());
        REQUIRE(std::string(e.what()).find("complex pole") != std::string::npos);
    }
}

TEST_CASE("poles_residues: input validation", "[rational]") {
    Barycentric empty;
    REQUIRE_THROWS_AS(famg::poles_residues(empty), famg::structural_error);
    Barycentric zero_w;
    zero_w.support_points = {0.0, 1.0};
    zero_w.values = {1.0, 2.0};
    zero_w.weights = {0.0, 0.0};
    REQUIRE_THROWS_AS(famg::poles_residues(zero_w), famg::structural_error);
}

// ============================================================
// spectral_bound
// ============================================================

TEST_CASE("spectral_bound: identity pair in one dimension gives 2", "[rational]") {
    CsrMatrix I = famg::csr_identity(5);
    REQUIRE(famg::spectral_bound(I, I, 1) == 2.0);
}

TEST_CASE("spectral_bound: dominates the dense generalized spectrum", "[rational]") {
    SECTION("one-dimensional pair") {
        famg::FractionalPair fp = famg::fractional_pair(1, 64);
        famg::SymEigResult g = famg::generalized_sym_eig(famg::dense_from_csr(fp.A),
                                                         famg::dense_from_csr(fp.M));
        double rho = famg::spectral_bound(fp.A, fp.M, 1);
        REQUIRE(rho >= g.eigenvalues.back());
    }
    SECTION("two-dimensional pair with looseness cap") {
        famg::FractionalPair fp = famg::fractional_pair(2, 16);
        famg::SymEigResult g = famg::generalized_sym_eig(famg::dense_from_csr(fp.A),
                                                         famg::dense_from_csr(fp.M));
        double rho = famg::spectral_bound(fp.A, fp.M, 2);
        REQUIRE(rho >= g.eigenvalues.back());
        REQUIRE(rho <= 50.0 * g.eigenvalues.back());
    }
}

TEST_CASE("spectral_bound: rejects nonpositive mass diagonal", "[rational]") {
    CsrMatrix I = famg::csr_identity(3);
    CsrMatrix Z = I;
    Z.values[1] = -2.0;
    REQUIRE_THROWS_AS(famg::spectral_bound(I, Z, 1), famg::numerical_error);
}

// ============================================================
// ra_setup / ra_apply
// ============================================================

TEST_CASE("ra_setup: zero exponents reduce to a scaled mass solve", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 32);
    const double alpha = 2.0, beta = 3.0;
    RationalPrecond rp = famg::ra_setup(fp.A, fp.M, 0.0, 0.0, alpha, beta, 1, 1e-12);
    REQUIRE(rp.form.poles.empty());
    REQUIRE(rp.inner_hierarchies.empty());
    REQUIRE(std::fabs(rp.form.c0 - 1.0 / (alpha + beta)) <= 1e-13);

    std::mt19937 rng(41);
    DenseVector r = oracle::random_vector(static_cast<index_t>(fp.A.nrows), rng);
    DenseVector z = famg::ra_apply(rp, r);
    DenseVector want = famg::dense_cholesky_solve(famg::dense_from_csr(fp.M), r);
    famg::scale(1.0 / (alpha + beta), want);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        num += (z[i] - want[i]) * (z[i] - want[i]);
        den += want[i] * want[i];
    }
    REQUIRE(std::sqrt(num) <= 1e-6 * std::sqrt(den));
}

TEST_CASE("ra_setup: sqrt pair stays within 25 poles and keeps shifts definite", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 65);  // 66 dofs
    RationalPrecond rp = famg::ra_setup(fp.A, fp.M, -0.5, 0.5, 1.0, 1.0, 1, 1e-12);
    REQUIRE(rp.form.poles.size() <= 25);
    REQUIRE(rp.form.poles.size() == rp.inner_hierarchies.size());
    for (double p : rp.form.poles) REQUIRE(p <= 0.0);
    for (const famg::AmgHierarchy& h : rp.inner_hierarchies) {
        // SPD check: dense Cholesky of the shifted matrix must succeed
        REQUIRE_NOTHROW(famg::DenseCholesky(famg::dense_from_csr(h.levels.front().A)));
    }
    REQUIRE(rp.rho == famg::spectral_bound(fp.A, fp.M, 1));
    REQUIRE(rp.inner_tol == 1e-6);
    REQUIRE(rp.inner_maxit == 100);
}

TEST_CASE("ra_setup: input validation", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 8);
    REQUIRE_THROWS_AS(famg::ra_setup(fp.A, fp.M, 0.5, 0.5, 0.0, 0.0, 1, 1e-12),
                      famg::structural_error);
    REQUIRE_THROWS_AS(famg::ra_setup(fp.A, fp.M, 0.5, 0.5, -1.0, 1.0, 1, 1e-12),
                      famg::structural_error);
    REQUIRE_THROWS_AS(famg::ra_setup(fp.A, fp.M, 1.5, 0.5, 1.0, 1.0, 1, 1e-12),
                      famg::structural_error);
    famg::FractionalPair other = famg::fractional_pair(1, 9);
    REQUIRE_THROWS_AS(famg::ra_setup(fp.A, other.M, 0.5, 0.5, 1.0, 1.0, 1, 1e-12),
                      famg::dimension_error);
}

TEST_CASE("ra_apply: inverts the dense fractional operator to 1e-4", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 64);
    const double s = -0.5, t = 0.5, alpha = 1.0, beta = 1.0;
    RationalPrecond rp = famg::ra_setup(fp.A, fp.M, s, t, alpha, beta, 1, 1e-12);
    famg::DenseSymMatrix F = famg::dense_fractional_operator(fp.A, fp.M, s, t, alpha, beta);

    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        DenseVector v = oracle::random_vector(static_cast<index_t>(fp.A.nrows), rng);
        DenseVector Fv = famg::dense_apply(F, v);
        DenseVector z = famg::ra_apply(rp, Fv);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            num += (z[i] - v[i]) * (z[i] - v[i]);
            den += v[i] * v[i];
        }
        REQUIRE(std::sqrt(num) <= 1e-4 * std::sqrt(den));
    }
}

TEST_CASE("ra_apply: nearly linear and symmetric at inner tolerance", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 48);
    RationalPrecond rp = famg::ra_setup(fp.A, fp.M, -0.5, 0.5, 1.0, 1e-3, 1, 1e-12);
    std::mt19937 rng(11);
    DenseVector r1 = oracle::random_vector(static_cast<index_t>(fp.A.nrows), rng);
    DenseVector r2 = oracle::random_vector(static_cast<index_t>(fp.A.nrows), rng);

    SECTION("linearity") {
        DenseVector sum = r1;
        famg::axpy(1.0, r2, sum);
        DenseVector z12 = famg::ra_apply(rp, sum);
        DenseVector z1 = famg::ra_apply(rp, r1);
        DenseVector z2 = famg::ra_apply(rp, r2);
        double dev = 0.0;
        for (std::size_t i = 0; i < z12.size(); ++i)
            dev = std::max(dev, std::fabs(z12[i] - z1[i] - z2[i]));
        REQUIRE(dev <= 1e-5 * std::max(famg::norm2(r1), famg::norm2(r2)));
    }

    SECTION("symmetry") {
        DenseVector z1 = famg::ra_apply(rp, r1);
        DenseVector z2 = famg::ra_apply(rp, r2);
        double lhs = famg::dot(z1, r2), rhs = famg::dot(r1, z2);
        REQUIRE(std::fabs(lhs - rhs) <= 1e-5 * famg::norm2(r1) * famg::norm2(r2));
    }
}

TEST_CASE("ra_apply: rejects mismatched dimensions", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 16);
    RationalPrecond rp = famg::ra_setup(fp.A, fp.M, 0.0, 0.0, 1.0, 1.0, 1, 1e-12);
    DenseVector bad(5, 1.0);
    REQUIRE_THROWS_AS(famg::ra_apply(rp, bad), famg::dimension_error);
}

TEST_CASE("rational precond: PCG on the dense fractional operator is parameter-robust",
          "[rational][slow]") {
    // 66 and 258 dofs, all weight combinations; iteration counts must stay
    // low and flat for the preconditioner to count as spectrally equivalent
    long iter_min = std::numeric_limits<long>::max(), iter_max = 0;
    for (index_t cells : {65, 257}) {
        famg::FractionalPair fp = famg::fractional_pair(1, cells);
        const index_t n = fp.A.nrows;
        std::mt19937 rng(static_cast<unsigned>(100 + cells));
        DenseVector b = oracle::random_vector(n, rng);
        for (double alpha : {1.0, 1e-3, 1e-6})
            for (double beta : {1.0, 1e-3, 1e-6}) {
                RationalPrecond rp =
                    famg::ra_setup(fp.A, fp.M, -0.5, 0.5, alpha, beta, 1, 1e-12);
                famg::DenseSymMatrix F =
                    famg::dense_fractional_operator(fp.A, fp.M, -0.5, 0.5, alpha, beta);
                famg::DenseSymOperator Fop(F);
                famg::RationalPrecondOperator Bop(rp);
                famg::SolveReport rep = famg::pcg(Fop, Bop, b, 1e-8, 100);
                INFO("n=" << n << " alpha=" << alpha << " beta=" << beta
                          << " iters=" << rep.iterations);
                REQUIRE(rep.converged);
                REQUIRE(rep.iterations <= 15);
                iter_min = std::min(iter_min, rep.iterations);
                iter_max = std::max(iter_max, rep.iterations);
            }
    }
    REQUIRE(iter_max - iter_min <= 5);
}

TEST_CASE("dense_fractional_operator: s=1,t=0 reproduces A plus M", "[rational]") {
    famg::FractionalPair fp = famg::fractional_pair(1, 12);
    famg::DenseSymMatrix F = famg::dense_fractional_operator(fp.A, fp.M, 1.0, 0.0, 1.0, 1.0);
    // alpha*lambda + beta = lambda + 1 pointwise, so F = A + M
    famg::DenseSymMatrix want = famg::dense_from_csr(famg::add_scaled(fp.A, 1.0, fp.M));
    for (index_t i = 0; i < F.n; ++i)
        for (index_t j = 0; j < F.n; ++j)
            REQUIRE(std::fabs(F.at(i, j) - want.at(i, j)) <= 1e-8 * (1.0 + std::fabs(want.at(i, j))));
}
