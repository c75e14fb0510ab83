#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace famg {

using index_t = int;
using DenseVector = std::vector<double>;

// Error taxonomy. Structural problems (bad indices, shape mismatches) are
// distinguished from numerical failures (loss of positivity, breakdown,
// no convergence) so callers can map them to exit codes.
struct structural_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void check_dims(std::size_t got, std::size_t want, const char* where) {
    if (got != want)
        throw dimension_error(std::string(where) + ": size " + std::to_string(got) +
                              ", expected " + std::to_string(want));
}

inline double dot(const DenseVector& x, const DenseVector& y) {
    check_dims(y.size(), x.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const DenseVector& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const DenseVector& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

// y += a*x
inline void axpy(double a, const DenseVector& x, DenseVector& y) {
    check_dims(y.size(), x.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(double a, DenseVector& x) {
    for (double& v : x) v *= a;
}

}  // namespace famg
