// famg command line harness: runs the library's benchmark problems and
// solves user-supplied Matrix Market systems with a choice of
// preconditioner. Emits one report row per solve as csv or json lines.
//
// Exit codes: 0 success, 2 parse or usage error, 3 dimension mismatch,
// 4 no convergence or solver breakdown.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "famg/amg.hpp"
#include "famg/krylov.hpp"
#include "famg/matrix_market.hpp"
#include "famg/metric_amg.hpp"
#include "famg/problems.hpp"
#include "famg/rational.hpp"

namespace {

using namespace famg;

constexpr int kExitParse = 2;
constexpr int kExitDims = 3;
constexpr int kExitNoConv = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- report rows ----

struct ReportRow {
    std::string problem;
    index_t n_dofs = 0;
    std::string solver;
    std::string params;
    long iters = 0;
    bool converged = false;
    std::optional<double> kappa;
    double setup_s = 0.0;
    double solve_s = 0.0;
};

// Fields never contain commas or quotes (paths stay out of rows), so both
// encodings get away without escaping. Timings are wall clock, millisecond
// resolution; everything else is deterministic for fixed flags.
void emit_rows(const std::vector<ReportRow>& rows, const std::string& format, std::ostream& os) {
    if (format == "csv") {
        os << "problem,n_dofs,solver,params,iters,converged,kappa,setup_s,solve_s\n";
        for (const ReportRow& r : rows)
            os << r.problem << ',' << r.n_dofs << ',' << r.solver << ',' << r.params << ','
               << r.iters << ',' << (r.converged ? "true" : "false") << ','
               << (r.kappa ? fmt("%.6g", *r.kappa) : "") << ',' << fmt("%.3f", r.setup_s) << ','
               << fmt("%.3f", r.solve_s) << '\n';
    } else {
        for (const ReportRow& r : rows)
            os << "{\"problem\":\"" << r.problem << "\",\"n_dofs\":" << r.n_dofs << ",\"solver\":\""
               << r.solver << "\",\"params\":\"" << r.params << "\",\"iters\":" << r.iters
               << ",\"converged\":" << (r.converged ? "true" : "false")
               << ",\"kappa\":" << (r.kappa ? fmt("%.6g", *r.kappa) : "null")
               << ",\"setup_s\":" << fmt("%.3f", r.setup_s)
               << ",\"solve_s\":" << fmt("%.3f", r.solve_s) << "}\n";
    }
}

// ---- config files ----

// Plain `key = value` lines; '#' and '%' start comments. Keys are the long
// option names of the chosen subcommand, '_' accepted for '-'. The tokens
// are injected ahead of the explicit flags, so flags override the file.
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error(path + ": cannot open config file");

    auto strip = [](std::string s) {
        const char* ws = " \t\r";
        const std::size_t first = s.find_first_not_of(ws);
        if (first == std::string::npos) return std::string();
        const std::size_t last = s.find_last_not_of(ws);
        return s.substr(first, last - first + 1);
    };

    std::vector<std::string> toks;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t cut = line.find_first_of("#%");
        if (cut != std::string::npos) line.erase(cut);
        const std::string body = strip(line);
        if (body.empty()) continue;
        const std::size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw parse_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(body.substr(0, eq));
        const std::string val = strip(body.substr(eq + 1));
        if (key.empty()) throw parse_error(path + ":" + std::to_string(lineno) + ": empty key");
        for (char& c : key)
            if (c == '_') c = '-';
        toks.push_back("--" + key + "=" + val);
    }
    return toks;
}

// ---- list flags ----

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(item);
    return items;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    for (const std::string& item : split_commas(text)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw parse_error(flag + ": bad number '" + item + "'");
        }
    }
    if (out.empty()) throw parse_error(flag + ": empty list");
    return out;
}

std::vector<index_t> parse_index_list(const std::string& text, const std::string& flag) {
    std::vector<index_t> out;
    for (double v : parse_double_list(text, flag)) {
        const index_t n = static_cast<index_t>(v);
        if (static_cast<double>(n) != v) throw parse_error(flag + ": bad integer '" + fmt("%g", v) + "'");
        out.push_back(n);
    }
    return out;
}

// ---- shared flag groups ----

struct AmgFlags {
    std::string type = "ua";
    std::string smoother = "gs";
    std::optional<double> theta;
    int max_levels = 10;
    int max_aggregation = 100;
    int presmooth = 1;
    int postsmooth = 1;
    int coarse_min_dim = 100;
    double jacobi_weight = 2.0 / 3.0;
};

void add_amg_flags(CLI::App* cmd, AmgFlags& f) {
    const auto last = CLI::MultiOptionPolicy::TakeLast;
    cmd->add_option("--amg", f.type, "hierarchy type")
        ->transform(CLI::IsMember({"ua", "sa"}))
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--theta", f.theta,
                    "strength threshold (default: 0 for ua, 0.08 for sa)")
        ->multi_option_policy(last);
    cmd->add_option("--smoother", f.smoother, "level smoother")
        ->transform(CLI::IsMember({"jacobi", "gs", "gs-back", "sgs"}))
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--max-levels", f.max_levels, "hierarchy depth cap")
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--max-aggregation", f.max_aggregation, "aggregate size cap")
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--presmooth", f.presmooth, "presmoothing steps")
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--postsmooth", f.postsmooth, "postsmoothing steps")
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--coarse-min-dim", f.coarse_min_dim, "direct-solve threshold")
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--jacobi-weight", f.jacobi_weight, "Jacobi smoother damping")
        ->capture_default_str()
        ->multi_option_policy(last);
}

AmgParams make_amg_params(const AmgFlags& f) {
    AmgParams p = f.type == "sa" ? AmgParams::sa_defaults() : AmgParams::ua_defaults();
    if (f.theta) p.strong_coupled = *f.theta;
    p.max_levels = f.max_levels;
    p.max_aggregation = f.max_aggregation;
    if (f.smoother == "jacobi")
        p.smoother = SmootherKind::Jacobi;
    else if (f.smoother == "gs-back")
        p.smoother = SmootherKind::GaussSeidelBackward;
    else if (f.smoother == "sgs")
        p.smoother = SmootherKind::SymGaussSeidel;
    else
        p.smoother = SmootherKind::GaussSeidelForward;
    p.presmooth_steps = f.presmooth;
    p.postsmooth_steps = f.postsmooth;
    p.coarse_min_dim = f.coarse_min_dim;
    p.jacobi_weight = f.jacobi_weight;
    return p;
}

struct OutputFlags {
    std::string format = "csv";
    std::string out_path;
    std::string config_path;  // consumed by the prescan in main
};

void add_output_flags(CLI::App* cmd, OutputFlags& o) {
    const auto last = CLI::MultiOptionPolicy::TakeLast;
    cmd->add_option("--output", o.format, "report format")
        ->transform(CLI::IsMember({"csv", "jsonl"}))
        ->capture_default_str()
        ->multi_option_policy(last);
    cmd->add_option("--out", o.out_path, "write the report here instead of stdout")
        ->multi_option_policy(last);
    cmd->add_option("--config", o.config_path,
                    "key = value file ('#'/'%' comments); explicit flags override it")
        ->multi_option_policy(last);
}

int emit_and_exit_code(const std::vector<ReportRow>& rows, const OutputFlags& o, bool all_converged) {
    std::ofstream ofs;
    std::ostream* os = &std::cout;
    if (!o.out_path.empty()) {
        ofs.open(o.out_path);
        if (!ofs) throw parse_error(o.out_path + ": cannot open output file");
        os = &ofs;
    }
    emit_rows(rows, o.format, *os);
    return all_converged ? 0 : kExitNoConv;
}

DenseVector seeded_vector(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseVector v(n);
    for (double& x : v) x = u(rng);
    return v;
}

// ---- elliptic ----

struct EllipticArgs {
    std::string n_list = "8,16,32";
    double tol = 1e-6;
    long maxit = 200;
    AmgFlags amg;
    OutputFlags out;
};

int run_elliptic(const EllipticArgs& a) {
    const std::vector<index_t> ns = parse_index_list(a.n_list, "--n");
    for (index_t n : ns)
        if (n < 2) throw parse_error("--n: values must be at least 2");

    std::vector<ReportRow> rows;
    bool all_ok = true;
    for (index_t n : ns) {
        EllipticSystem es = elliptic_3d(n);
        const AmgParams p = make_amg_params(a.amg);

        const auto t0 = Clock::now();
        AmgHierarchy h = setup_hierarchy(es.A, {DenseVector(static_cast<std::size_t>(es.A.nrows), 1.0)}, p);
        const double setup_s = seconds_since(t0);

        CsrOperator A(es.A);
        AmgPrecondOperator B(h);
        SolveReport rep = pcg(A, B, es.b, a.tol, a.maxit, /*estimate_cond=*/true);

        ReportRow row;
        row.problem = "elliptic";
        row.n_dofs = es.A.nrows;
        row.solver = "pcg+amg";
        row.params = "n=" + std::to_string(n) + ";amg=" + a.amg.type + ";tol=" + fmt("%g", a.tol);
        row.iters = rep.iterations;
        row.converged = rep.converged;
        row.kappa = rep.cond_estimate;
        row.setup_s = setup_s;
        row.solve_s = rep.solve_seconds;
        rows.push_back(row);
        all_ok = all_ok && rep.converged;
    }
    return emit_and_exit_code(rows, a.out, all_ok);
}

// ---- fractional ----

struct FractionalArgs {
    int dim = 1;
    index_t n = 64;
    double alpha = 1.0;
    double beta = 1.0;
    double s = -0.5;
    double t = 0.5;
    double aaa_tol = 1e-12;
    double tol = 1e-8;
    long maxit = 200;
    AmgFlags amg;
    OutputFlags out;
};

int run_fractional(const FractionalArgs& a) {
    if (a.n < 2) throw parse_error("--n: values must be at least 2");
    FractionalPair fp = fractional_pair(a.dim, a.n);
    if (fp.A.nrows > 2000)
        throw parse_error("fractional: the dense probe operator is limited to 2000 dofs, got " +
                          std::to_string(fp.A.nrows) + "; reduce --n");

    const AmgParams p = make_amg_params(a.amg);
    const auto t0 = Clock::now();
    RationalPrecond rp = ra_setup(fp.A, fp.M, a.s, a.t, a.alpha, a.beta, a.dim, a.aaa_tol, p);
    const double setup_s = seconds_since(t0);

    // The system solved is the dense spectral realization of the weighted
    // fractional sum, the operator the preconditioner approximates.
    DenseSymMatrix F = dense_fractional_operator(fp.A, fp.M, a.s, a.t, a.alpha, a.beta);
    DenseVector b(static_cast<std::size_t>(F.n), 1.0);

    DenseSymOperator A(F);
    RationalPrecondOperator B(rp);
    SolveReport rep = pcg(A, B, b, a.tol, a.maxit, /*estimate_cond=*/true);

    ReportRow row;
    row.problem = "fractional";
    row.n_dofs = fp.A.nrows;
    row.solver = "pcg+ra";
    row.params = "dim=" + std::to_string(a.dim) + ";n=" + std::to_string(a.n) + ";alpha=" +
                 fmt("%g", a.alpha) + ";beta=" + fmt("%g", a.beta) + ";s=" + fmt("%g", a.s) +
                 ";t=" + fmt("%g", a.t) + ";aaa_tol=" + fmt("%g", a.aaa_tol) +
                 ";np=" + std::to_string(rp.form.poles.size());
    row.iters = rep.iterations;
    row.converged = rep.converged;
    row.kappa = rep.cond_estimate;
    row.setup_s = setup_s;
    row.solve_s = rep.solve_seconds;
    return emit_and_exit_code({row}, a.out, rep.converged);
}

// ---- coupled ----

struct CoupledArgs {
    index_t n = 8;
    std::string rho_list = "1,1e4,1e8";
    double sigma3 = 1.0;
    double sigma1 = 1.0;
    double tol = 1e-6;
    AmgFlags amg;
    OutputFlags out;
};

int run_coupled(const CoupledArgs& a) {
    if (a.n < 2) throw parse_error("--n: values must be at least 2");
    const std::vector<double> rhos = parse_double_list(a.rho_list, "--rho-t");
    for (double r : rhos)
        if (r < 0.0) throw parse_error("--rho-t: values must be nonnegative");

    // The coupled operator is nearly singular along the matched constant,
    // so the load must be in its range: apply the diffusion part to a fixed
    // seeded vector. Using AD rather than A keeps the same right-hand side
    // for every rho_t, which makes the sweep's iteration counts comparable.
    std::vector<ReportRow> rows;
    bool all_ok = true;
    DenseVector b;
    for (double rho : rhos) {
        CoupledSystem cs = coupled_3d1d(a.n, a.sigma3, a.sigma1, rho);
        if (b.empty()) {
            CsrMatrix AD = cs.AD.flatten();
            b = spmv(AD, seeded_vector(static_cast<std::size_t>(AD.nrows), 12345));
        }
        SolveReport rep = solve_coupled(cs, b, a.tol, make_amg_params(a.amg));

        ReportRow row;
        row.problem = "coupled";
        row.n_dofs = cs.A.total_rows();
        row.solver = "pcg+metric";
        row.params = "n=" + std::to_string(a.n) + ";rho_t=" + fmt("%g", rho) + ";sigma3=" +
                     fmt("%g", a.sigma3) + ";sigma1=" + fmt("%g", a.sigma1) + ";tol=" +
                     fmt("%g", a.tol);
        row.iters = rep.iterations;
        row.converged = rep.converged;
        row.kappa = rep.cond_estimate;
        row.setup_s = rep.setup_seconds;
        row.solve_s = rep.solve_seconds;
        rows.push_back(row);
        all_ok = all_ok && rep.converged;
    }
    return emit_and_exit_code(rows, a.out, all_ok);
}

// ---- solve ----

struct SolveArgs {
    std::string matrix_path;
    std::string mass_path;
    std::string rhs_path;
    std::string pi_path;
    std::string precond = "amg";
    double tol = 1e-8;
    long maxit = 1000;
    int dim = 3;
    double alpha = 1.0;
    double beta = 1.0;
    double s = -0.5;
    double t = 0.5;
    double aaa_tol = 1e-12;
    std::string solution_path;
    AmgFlags amg;
    OutputFlags out;
};

CsrMatrix extract_block(const CsrMatrix& A, index_t r0, index_t r1, index_t c0, index_t c1) {
    std::vector<Triplet> trip;
    for (index_t i = r0; i < r1; ++i)
        for (index_t k = A.row_offsets[i]; k < A.row_offsets[i + 1]; ++k) {
            const index_t j = A.col_indices[k];
            if (j >= c0 && j < c1) trip.push_back({i - r0, j - c0, A.values[k]});
        }
    return csr_from_triplets(r1 - r0, c1 - c0, std::move(trip));
}

// One symmetric Gauss-Seidel sweep; the symmetric variant so pcg gets a
// symmetric preconditioner.
struct SymGsOperator final : LinearOperator {
    const CsrMatrix& A;
    explicit SymGsOperator(const CsrMatrix& A_) : A(A_) {}
    index_t dim() const override { return A.nrows; }
    void apply(const DenseVector& x, DenseVector& y) const override {
        y.assign(x.size(), 0.0);
        smoother_apply(SmootherKind::SymGaussSeidel, A, x, y, 1);
    }
};

int run_solve(const SolveArgs& a) {
    CsrMatrix A = read_matrix_market(a.matrix_path);
    if (A.nrows != A.ncols)
        throw dimension_error("solve: matrix is " + std::to_string(A.nrows) + "x" +
                              std::to_string(A.ncols) + ", need square");
    DenseVector b = a.rhs_path.empty() ? DenseVector(static_cast<std::size_t>(A.nrows), 1.0)
                                       : read_mm_vector(a.rhs_path);
    if (b.size() != static_cast<std::size_t>(A.nrows))
        throw dimension_error("solve: rhs has " + std::to_string(b.size()) + " entries, matrix has " +
                              std::to_string(A.nrows) + " rows");

    const AmgParams p = make_amg_params(a.amg);
    std::string extra_params;

    // Owners for whatever the chosen preconditioner references; they must
    // outlive the solve.
    AmgHierarchy h;
    RationalPrecond rp;
    CoupledSystem cs;
    MetricAmgPrecond mp;
    std::unique_ptr<LinearOperator> B;

    const auto t0 = Clock::now();
    if (a.precond == "none") {
        B = std::make_unique<IdentityOperator>(A.nrows);
    } else if (a.precond == "jacobi") {
        B = std::make_unique<JacobiOperator>(A);
    } else if (a.precond == "gs") {
        B = std::make_unique<SymGsOperator>(A);
    } else if (a.precond == "amg") {
        h = setup_hierarchy(A, {DenseVector(static_cast<std::size_t>(A.nrows), 1.0)}, p);
        B = std::make_unique<AmgPrecondOperator>(h);
    } else if (a.precond == "ra") {
        if (a.mass_path.empty()) throw parse_error("solve: --precond ra requires --mass");
        CsrMatrix M = read_matrix_market(a.mass_path);
        rp = ra_setup(A, M, a.s, a.t, a.alpha, a.beta, a.dim, a.aaa_tol, p);
        extra_params = ";np=" + std::to_string(rp.form.poles.size());
        B = std::make_unique<RationalPrecondOperator>(rp);
    } else {
        if (a.pi_path.empty()) throw parse_error("solve: --precond metric requires --pi");
        CsrMatrix Pi = read_matrix_market(a.pi_path);
        const index_t n1 = Pi.nrows;
        const index_t n3 = Pi.ncols;
        if (n3 + n1 != A.nrows)
            throw dimension_error("solve: coupling map implies " + std::to_string(n3 + n1) +
                                  " rows, matrix has " + std::to_string(A.nrows));
        // Rebuild the two-field structure from the flattened matrix. The
        // full 3d diagonal block stands in for the diffusion part when
        // picking Schwarz neighbor rings; its pattern contains the
        // diffusion stencil. rho_t > 0 turns the gauge projection on, the
        // premise of choosing this preconditioner.
        cs.Pi = std::move(Pi);
        cs.rho_t = 1.0;
        CsrMatrix A33 = extract_block(A, 0, n3, 0, n3);
        cs.A = BlockSystem({n3, n1}, {n3, n1});
        cs.A.set_block(0, 0, A33);
        cs.A.set_block(0, 1, extract_block(A, 0, n3, n3, n3 + n1));
        cs.A.set_block(1, 0, extract_block(A, n3, n3 + n1, 0, n3));
        cs.A.set_block(1, 1, extract_block(A, n3, n3 + n1, n3, n3 + n1));
        cs.AD = BlockSystem({n3, n1}, {n3, n1});
        cs.AD.set_block(0, 0, std::move(A33));
        cs.AD.set_block(1, 1, extract_block(A, n3, n3 + n1, n3, n3 + n1));
        mp = metric_amg_setup(cs, p);
        B = std::make_unique<MetricAmgPrecondOperator>(mp);
    }
    const double setup_s = seconds_since(t0);

    CsrOperator A_op(A);
    SolveReport rep = pcg(A_op, *B, b, a.tol, a.maxit, /*estimate_cond=*/true);
    if (!a.solution_path.empty()) write_mm_vector(rep.solution, a.solution_path);

    ReportRow row;
    row.problem = "solve";
    row.n_dofs = A.nrows;
    row.solver = "pcg+" + a.precond;
    row.params = "precond=" + a.precond + ";tol=" + fmt("%g", a.tol) +
                 ";maxit=" + std::to_string(a.maxit) + extra_params;
    row.iters = rep.iterations;
    row.converged = rep.converged;
    row.kappa = rep.cond_estimate;
    row.setup_s = setup_s;
    row.solve_s = rep.solve_seconds;
    return emit_and_exit_code({row}, a.out, rep.converged);
}

template <typename T>
CLI::Option* opt(CLI::App* cmd, const std::string& name, T& var, const std::string& help) {
    return cmd->add_option(name, var, help)
        ->capture_default_str()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse solver harness: multigrid, rational and metric preconditioning"};
    app.require_subcommand(1);
    app.footer("exit codes: 0 ok, 2 parse or usage error, 3 dimension mismatch, 4 no convergence");

    EllipticArgs ell;
    CLI::App* cmd_ell = app.add_subcommand("elliptic", "reaction-diffusion cube scaling run");
    opt(cmd_ell, "--n", ell.n_list, "grid points per axis, comma separated");
    opt(cmd_ell, "--tol", ell.tol, "relative preconditioned residual target");
    opt(cmd_ell, "--maxit", ell.maxit, "iteration cap");
    add_amg_flags(cmd_ell, ell.amg);
    add_output_flags(cmd_ell, ell.out);

    FractionalArgs fra;
    CLI::App* cmd_fra = app.add_subcommand(
        "fractional", "weighted fractional sum solved via rational approximation");
    opt(cmd_fra, "--dim", fra.dim, "mesh dimension")->transform(CLI::IsMember({1, 2, 3}));
    opt(cmd_fra, "--n", fra.n, "grid points per axis");
    opt(cmd_fra, "--alpha", fra.alpha, "weight on the s term");
    opt(cmd_fra, "--beta", fra.beta, "weight on the t term");
    opt(cmd_fra, "--s", fra.s, "first exponent, in [-1, 1]");
    opt(cmd_fra, "--t", fra.t, "second exponent, in [-1, 1]");
    opt(cmd_fra, "--aaa-tol", fra.aaa_tol, "rational fit tolerance");
    opt(cmd_fra, "--tol", fra.tol, "relative preconditioned residual target");
    opt(cmd_fra, "--maxit", fra.maxit, "iteration cap");
    add_amg_flags(cmd_fra, fra.amg);
    add_output_flags(cmd_fra, fra.out);

    CoupledArgs cpl;
    CLI::App* cmd_cpl = app.add_subcommand("coupled", "3d-1d interface sweep over rho_t");
    opt(cmd_cpl, "--n", cpl.n, "3d grid points per axis");
    opt(cmd_cpl, "--rho-t", cpl.rho_list, "interface weights, comma separated");
    opt(cmd_cpl, "--sigma3", cpl.sigma3, "3d diffusion coefficient");
    opt(cmd_cpl, "--sigma1", cpl.sigma1, "1d diffusion coefficient");
    opt(cmd_cpl, "--tol", cpl.tol, "relative preconditioned residual target");
    add_amg_flags(cmd_cpl, cpl.amg);
    add_output_flags(cmd_cpl, cpl.out);

    SolveArgs sol;
    CLI::App* cmd_sol = app.add_subcommand("solve", "solve a Matrix Market system");
    opt(cmd_sol, "--matrix", sol.matrix_path, "system matrix (.mtx, symmetric)")->required();
    opt(cmd_sol, "--mass", sol.mass_path, "mass matrix, needed by --precond ra");
    opt(cmd_sol, "--rhs", sol.rhs_path, "right-hand side (.mtx array); default: ones");
    opt(cmd_sol, "--pi", sol.pi_path, "3d-to-1d coupling map, needed by --precond metric");
    opt(cmd_sol, "--precond", sol.precond, "preconditioner")
        ->transform(CLI::IsMember({"none", "jacobi", "gs", "amg", "ra", "metric"}));
    opt(cmd_sol, "--tol", sol.tol, "relative preconditioned residual target");
    opt(cmd_sol, "--maxit", sol.maxit, "iteration cap");
    opt(cmd_sol, "--dim", sol.dim, "topological dimension, used by the ra spectral bound")
        ->transform(CLI::IsMember({1, 2, 3}));
    opt(cmd_sol, "--alpha", sol.alpha, "ra weight on the s term");
    opt(cmd_sol, "--beta", sol.beta, "ra weight on the t term");
    opt(cmd_sol, "--s", sol.s, "ra first exponent");
    opt(cmd_sol, "--t", sol.t, "ra second exponent");
    opt(cmd_sol, "--aaa-tol", sol.aaa_tol, "ra rational fit tolerance");
    opt(cmd_sol, "--write-solution", sol.solution_path, "write the solution vector here (.mtx array)");
    add_amg_flags(cmd_sol, sol.amg);
    add_output_flags(cmd_sol, sol.out);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // --config injection: translate the file into flags placed right
        // after the subcommand name, so explicit flags take precedence
        // under the take-last policy.
        static const char* subnames[] = {"elliptic", "fractional", "coupled", "solve"};
        if (!args.empty() &&
            std::find(std::begin(subnames), std::end(subnames), args[0]) != std::end(subnames)) {
            std::string cfg;
            for (std::size_t i = 1; i < args.size(); ++i) {
                if (args[i] == "--config" && i + 1 < args.size())
                    cfg = args[i + 1];
                else if (args[i].rfind("--config=", 0) == 0)
                    cfg = args[i].substr(9);
            }
            if (!cfg.empty()) {
                const std::vector<std::string> toks = config_tokens(cfg);
                args.insert(args.begin() + 1, toks.begin(), toks.end());
            }
        }

        std::reverse(args.begin(), args.end());
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : kExitParse;
        }

        if (app.got_subcommand(cmd_ell)) return run_elliptic(ell);
        if (app.got_subcommand(cmd_fra)) return run_fractional(fra);
        if (app.got_subcommand(cmd_cpl)) return run_coupled(cpl);
        return run_solve(sol);
    } catch (const parse_error& e) {
        std::cerr << "famg: " << e.what() << "\n";
        return kExitParse;
    } catch (const dimension_error& e) {
        std::cerr << "famg: " << e.what() << "\n";
        return kExitDims;
    } catch (const structural_error& e) {
        std::cerr << "famg: " << e.what() << "\n";
        return kExitParse;
    } catch (const numerical_error& e) {
        std::cerr << "famg: " << e.what() << "\n";
        return kExitNoConv;
    }
}
