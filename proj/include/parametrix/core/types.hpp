#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace parametrix {

/// Largest supported state dimension. Vectors and matrices are stored inline
/// (no heap traffic) up to this size, which matters in the quadrature loops.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Error hierarchy. Every numerical failure carries enough context to locate
// the offending evaluation; the CLI maps ArgumentError to exit code 2 and the
// rest to exit code 3.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad radius, empty grid, t <= s, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A coefficient returned a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// ODE integration produced a non-finite state.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_valid_time)
        : Error(what), last_valid_time_(last_valid_time) {}
    [[nodiscard]] double last_valid_time() const { return last_valid_time_; }

private:
    double last_valid_time_;
};

/// Spatial/time quadrature failed its tail check.
class QuadratureError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix failed the positive-definiteness certificate.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// Euler-Maruyama produced a non-finite state.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t path)
        : Error(what), path_(path) {}
    [[nodiscard]] std::size_t path_index() const { return path_; }

private:
    std::size_t path_;
};

inline std::string format_point(double t, const Vec& x) {
    std::ostringstream os;
    os << "(t=" << t << ", x=[";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "])";
    return os.str();
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline Vec zeros(int d) { return Vec::Zero(d); }

inline Vec constant_vec(int d, double value) { return Vec::Constant(d, value); }

}  // namespace parametrix
