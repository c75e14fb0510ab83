#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "csr.hpp"
#include "types.hpp"

namespace famg {

namespace detail {

inline std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] inline void mm_fail(const std::string& path, long line, const std::string& what) {
    throw parse_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// Reads a Matrix Market coordinate file (real, general or symmetric).
// Symmetric files are expanded to full storage. 1-based indices converted
// here; everything downstream is 0-based.
inline CsrMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error(path + ": cannot open");
    std::string line;
    long lineno = 0;

    if (!std::getline(in, line)) detail::mm_fail(path, 1, "empty file");
    ++lineno;
    std::istringstream hdr(line);
    std::string banner, object, format, field, symmetry;
    hdr >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") detail::mm_fail(path, lineno, "missing %%MatrixMarket banner");
    object = detail::lowercase(object);
    format = detail::lowercase(format);
    field = detail::lowercase(field);
    symmetry = detail::lowercase(symmetry);
    if (object != "matrix" || format != "coordinate")
        detail::mm_fail(path, lineno, "expected 'matrix coordinate', got '" + object + " " + format + "'");
    if (field != "real")
        detail::mm_fail(path, lineno, "unsupported field '" + field + "' (real only)");
    bool symmetric = (symmetry == "symmetric");
    if (!symmetric && symmetry != "general")
        detail::mm_fail(path, lineno, "unsupported symmetry '" + symmetry + "'");

    long nrows = -1, ncols = -1, nnz = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream sz(line);
        if (!(sz >> nrows >> ncols >> nnz) || nrows < 0 || ncols < 0 || nnz < 0)
            detail::mm_fail(path, lineno, "bad size line '" + line + "'");
        break;
    }
    if (nrows < 0) detail::mm_fail(path, lineno, "missing size line");

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    long seen = 0;
    while (seen < nnz) {
        if (!std::getline(in, line)) detail::mm_fail(path, lineno + 1, "unexpected end of file");
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream rec(line);
        long i, j;
        double v;
        if (!(rec >> i >> j >> v)) detail::mm_fail(path, lineno, "bad entry '" + line + "'");
        if (i < 1 || i > nrows || j < 1 || j > ncols)
            detail::mm_fail(path, lineno, "index out of range in '" + line + "'");
        trip.push_back({static_cast<index_t>(i - 1), static_cast<index_t>(j - 1), v});
        if (symmetric && i != j)
            trip.push_back({static_cast<index_t>(j - 1), static_cast<index_t>(i - 1), v});
        ++seen;
    }
    return csr_from_triplets(static_cast<index_t>(nrows), static_cast<index_t>(ncols),
                             std::move(trip));
}

// Writes coordinate format, general symmetry, 17 significant digits so a
// read-back reproduces the values bitwise.
inline void write_matrix_market(const CsrMatrix& A, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw parse_error(path + ": cannot open for writing");
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << A.nrows << " " << A.ncols << " " << A.nnz() << "\n";
    char buf[64];
    for (index_t r = 0; r < A.nrows; ++r)
        for (index_t k = A.row_offsets[r]; k < A.row_offsets[r + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", A.values[k]);
            out << (r + 1) << " " << (A.col_indices[k] + 1) << " " << buf << "\n";
        }
    if (!out) throw parse_error(path + ": write failed");
}

// Vectors travel as Matrix Market array files (m x 1, real general).
inline DenseVector read_mm_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error(path + ": cannot open");
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) detail::mm_fail(path, 1, "empty file");
    ++lineno;
    std::istringstream hdr(line);
    std::string banner, object, format, field, symmetry;
    hdr >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || detail::lowercase(format) != "array" ||
        detail::lowercase(field) != "real")
        detail::mm_fail(path, lineno, "expected '%%MatrixMarket matrix array real general'");

    long m = -1, n = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream sz(line);
        if (!(sz >> m >> n) || m < 0 || n != 1)
            detail::mm_fail(path, lineno, "bad size line '" + line + "' (want m 1)");
        break;
    }
    if (m < 0) detail::mm_fail(path, lineno, "missing size line");

    DenseVector x;
    x.reserve(static_cast<std::size_t>(m));
    while (static_cast<long>(x.size()) < m) {
        if (!std::getline(in, line)) detail::mm_fail(path, lineno + 1, "unexpected end of file");
        ++lineno;
        if (!line.empty() && line[0] == '%') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream rec(line);
        double v;
        if (!(rec >> v)) detail::mm_fail(path, lineno, "bad value '" + line + "'");
        x.push_back(v);
    }
    return x;
}

inline void write_mm_vector(const DenseVector& x, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw parse_error(path + ": cannot open for writing");
    out << "%%MatrixMarket matrix array real general\n";
    out << x.size() << " 1\n";
    char buf[64];
    for (double v : x) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << "\n";
    }
    if (!out) throw parse_error(path + ": write failed");
}

}  // namespace famg
