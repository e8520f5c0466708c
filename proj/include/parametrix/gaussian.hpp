#pragma once

// Gaussian kernels g_lambda and the flow-centred bold-g, the frozen Gaussian
// proxy with its exact moments and analytic derivatives, and the
// Chapman-Kolmogorov convolution check.

#include "parametrix/core/spatial_integral.hpp"
#include "parametrix/flow.hpp"

#include <limits>
#include <optional>

namespace parametrix {

/// g_lambda(t, x) = t^{-d/2} exp(-lambda |x|^2 / t).
inline double g_lambda(double lambda, double t, const Vec& x) {
    if (!(t > 0.0)) throw ArgumentError("g_lambda: duration must be positive, got " + std::to_string(t));
    const double d = static_cast<double>(x.size());
    return std::pow(t, -0.5 * d) * std::exp(-lambda * x.squaredNorm() / t);
}

// ---------------------------------------------------------------------------
// Flow-centred envelope
// ---------------------------------------------------------------------------

/// Evaluates bold-g_lambda(s,x,t,y) = g_lambda(t-s, theta^(1)_{t,s}(x) - y) with
/// the flow of the drift mollified at radius one.
class FlowEnvelope {
public:
    explicit FlowEnvelope(const ProblemSpec& spec, int steps = kDefaultFlowSteps)
        : drift_(mollify_drift(spec, 1.0).as_function()), steps_(steps) {}

    /// Uses the given drift as is (for drifts already known to equal their mollification).
    FlowEnvelope(DriftFn drift, int steps) : drift_(std::move(drift)), steps_(steps) {}

    [[nodiscard]] Vec center(double s, const Vec& x, double t) const {
        if (s == t) return x;
        return solve_flow(drift_, s, t, x, std::abs(t - s) / steps_);
    }

    /// theta^(1)_{s,t}(y), the backward flow.
    [[nodiscard]] Vec backward(double s, double t, const Vec& y) const { return center(t, y, s); }

    [[nodiscard]] double operator()(double lambda, double s, const Vec& x, double t, const Vec& y) const {
        if (!(s < t)) throw ArgumentError("flow_gaussian: need s < t");
        return g_lambda(lambda, t - s, Vec(center(s, x, t) - y));
    }

    /// Same envelope when the flow centre is already known.
    [[nodiscard]] static double at_center(double lambda, double s, const Vec& center, double t, const Vec& y) {
        return g_lambda(lambda, t - s, Vec(center - y));
    }

    [[nodiscard]] const DriftFn& drift() const { return drift_; }
    [[nodiscard]] int steps() const { return steps_; }

private:
    DriftFn drift_;
    int steps_;
};

inline double flow_gaussian(double lambda, const ProblemSpec& spec, double s, const Vec& x, double t, const Vec& y) {
    return FlowEnvelope(spec)(lambda, s, x, t, y);
}

// ---------------------------------------------------------------------------
// Frozen Gaussian proxy
// ---------------------------------------------------------------------------

/// Mean shift and covariance of the process with coefficients frozen along
/// theta_{.,tau}(xi) on [s, t], with its Cholesky certificate.
struct FrozenGaussian {
    double tau = 0.0, s = 0.0, t = 0.0;
    Vec xi;
    Vec mean;   // vartheta = int_s^t b(r, theta_{r,tau}(xi)) dr
    Mat cov;    // C = int_s^t sigma sigma^T(r, theta_{r,tau}(xi)) dr
    Mat precision;
    double log_norm = 0.0;  // log sqrt((2 pi)^d det C)

    /// Symmetrizes cov and certifies positive definiteness.
    void finalize() {
        const int d = static_cast<int>(cov.rows());
        cov = 0.5 * (cov + cov.transpose()).eval();
        Eigen::LLT<Mat> llt(cov);
        if (llt.info() != Eigen::Success)
            throw DegeneracyError("frozen_moments: covariance is not positive definite on [" + std::to_string(s) +
                                  ", " + std::to_string(t) + "]");
        const Mat L = llt.matrixL();
        double log_det = 0.0;
        for (int i = 0; i < d; ++i) {
            if (!(L(i, i) > 0.0)) throw DegeneracyError("frozen_moments: non-positive pivot in covariance factor");
            log_det += 2.0 * std::log(L(i, i));
        }
        precision = llt.solve(Mat::Identity(d, d));
        precision = 0.5 * (precision + precision.transpose()).eval();
        log_norm = 0.5 * (d * std::log(2.0 * kPi) + log_det);
    }
};

/// Flow from a freezing point (tau, xi) together with the running integral of
/// sigma sigma^T along it, both integrated by the same RK4 stages. Queries
/// between grid points use cubic Hermite interpolation.
class FrozenPath {
public:
    FrozenPath(const ProblemSpec& spec, double tau, const Vec& xi, double lo, double hi, double h)
        : tau_(tau), xi_(xi) {
        if (!(lo <= tau && tau <= hi)) throw ArgumentError("FrozenPath: freezing time outside [lo, hi]");
        if (!(h > 0.0)) throw ArgumentError("FrozenPath: step must be positive");
        forward_ = build(spec, xi, tau, hi, h);
        backward_ = build(spec, xi, tau, lo, h);
    }

    [[nodiscard]] Vec flow_at(double r) const { return leg(r).state(r); }
    [[nodiscard]] Mat cov_integral_at(double r) const { return leg(r).cov_integral(r); }

    [[nodiscard]] FrozenGaussian moments(double s, double t) const {
        if (!(s < t)) throw ArgumentError("frozen_moments: need s < t");
        FrozenGaussian fz;
        fz.tau = tau_;
        fz.xi = xi_;
        fz.s = s;
        fz.t = t;
        fz.mean = flow_at(t) - flow_at(s);
        fz.cov = cov_integral_at(t) - cov_integral_at(s);
        fz.finalize();
        return fz;
    }

private:
    struct Leg {
        double start = 0.0, step = 0.0;
        std::vector<Vec> theta, velocity;
        std::vector<Mat> cov, cov_rate;

        [[nodiscard]] std::pair<std::size_t, double> locate(double r) const {
            const std::size_t n = theta.size() - 1;
            if (n == 0 || step == 0.0) return {0, 0.0};
            double pos = std::clamp((r - start) / step, 0.0, static_cast<double>(n));
            const std::size_t k = std::min(static_cast<std::size_t>(pos), n - 1);
            return {k, pos - static_cast<double>(k)};
        }

        template <class T>
        T hermite(const std::vector<T>& v, const std::vector<T>& dv, double r) const {
            if (v.size() == 1) return v.front();
            auto [k, u] = locate(r);
            const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
            const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
            return h00 * v[k] + h10 * step * dv[k] + h01 * v[k + 1] + h11 * step * dv[k + 1];
        }

        [[nodiscard]] Vec state(double r) const { return hermite(theta, velocity, r); }
        [[nodiscard]] Mat cov_integral(double r) const { return hermite(cov, cov_rate, r); }
    };

    [[nodiscard]] const Leg& leg(double r) const { return r >= tau_ ? forward_ : backward_; }

    static Leg build(const ProblemSpec& spec, const Vec& xi, double from, double to, double h) {
        Leg leg;
        leg.start = from;
        const int d = spec.dimension;
        const double len = std::abs(to - from);
        const int n = len > 0.0 ? std::max(1, static_cast<int>(std::ceil(len / h - 1e-9))) : 0;
        leg.step = n > 0 ? (to - from) / n : 0.0;
        leg.theta.reserve(n + 1);
        leg.velocity.reserve(n + 1);
        leg.cov.reserve(n + 1);
        leg.cov_rate.reserve(n + 1);

        Vec x = xi;
        Mat c = Mat::Zero(d, d);
        const double dt = leg.step;
        for (int k = 0; k <= n; ++k) {
            const double r = (k == n) ? to : from + k * dt;
            const Vec b1 = detail::checked_drift(spec.drift, r, x, r);
            const Mat a1 = spec.covariance_rate(r, x);
            leg.theta.push_back(x);
            leg.velocity.push_back(b1);
            leg.cov.push_back(c);
            leg.cov_rate.push_back(a1);
            if (k == n) break;
            const Vec x2 = x + 0.5 * dt * b1;
            const Vec b2 = detail::checked_drift(spec.drift, r + 0.5 * dt, x2, r);
            const Vec x3 = x + 0.5 * dt * b2;
            const Vec b3 = detail::checked_drift(spec.drift, r + 0.5 * dt, x3, r);
            const Vec x4 = x + dt * b3;
            const Vec b4 = detail::checked_drift(spec.drift, r + dt, x4, r);
            const Mat a2 = spec.covariance_rate(r + 0.5 * dt, x2);
            const Mat a3 = spec.covariance_rate(r + 0.5 * dt, x3);
            const Mat a4 = spec.covariance_rate(r + dt, x4);
            x += (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            c += (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            if (!x.allFinite()) throw IntegrationError("frozen path: non-finite flow state", r);
        }
        return leg;
    }

    double tau_;
    Vec xi_;
    Leg forward_, backward_;
};

/// Moments of the frozen process for freezing point (tau, xi) on [s, t].
inline FrozenGaussian frozen_moments(const ProblemSpec& spec, double tau, const Vec& xi, double s, double t,
                                     double h) {
    if (!(s < t)) throw ArgumentError("frozen_moments: need s < t");
    const FrozenPath path(spec, tau, xi, std::min(s, tau), std::max(t, tau), h);
    return path.moments(s, t);
}

inline FrozenGaussian frozen_moments(const ProblemSpec& spec, double tau, const Vec& xi, double s, double t) {
    return frozen_moments(spec, tau, xi, s, t, (std::max(t, tau) - std::min(s, tau)) / kDefaultFlowSteps);
}

/// Value, x-gradient and x-Hessian of the frozen density at (x, y).
/// The y-derivatives follow from grad_y = -grad_x and hess_y = hess_x.
struct GaussianJet {
    double value = 0.0;
    Vec grad_x;
    Mat hess_x;
};

inline double frozen_density(const FrozenGaussian& fz, const Vec& x, const Vec& y) {
    const Vec u = fz.mean + x - y;
    return std::exp(-0.5 * u.dot(fz.precision * u) - fz.log_norm);
}

inline GaussianJet frozen_jet(const FrozenGaussian& fz, const Vec& x, const Vec& y) {
    GaussianJet jet;
    const Vec u = fz.mean + x - y;
    const Vec pu = fz.precision * u;
    jet.value = std::exp(-0.5 * u.dot(pu) - fz.log_norm);
    jet.grad_x = -jet.value * pu;
    jet.hess_x = jet.value * (pu * pu.transpose() - fz.precision);
    return jet;
}

enum class Variable { x, y };

/// Analytic derivative tensor of order 0, 1 or 2, returned as a matrix
/// (1x1, d x 1 or d x d).
inline Mat frozen_derivative(const FrozenGaussian& fz, const Vec& x, const Vec& y, int order, Variable var) {
    const GaussianJet jet = frozen_jet(fz, x, y);
    switch (order) {
        case 0: return Mat::Constant(1, 1, jet.value);
        case 1: return var == Variable::x ? Mat(jet.grad_x) : Mat(-jet.grad_x);
        case 2: return jet.hess_x;
        default: throw ArgumentError("frozen_derivative: order must be 0, 1 or 2");
    }
}

/// p~_1(s,x,t,y): frozen at the terminal point (t, y), so the Gaussian is
/// centred through the backward flow, vartheta + x - y = x - theta_{s,t}(y).
inline FrozenGaussian forward_frozen(const ProblemSpec& spec, double s, double t, const Vec& y, int steps) {
    if (!(s < t)) throw ArgumentError("forward frozen density: need s < t");
    const FrozenPath path(spec, t, y, s, t, (t - s) / steps);
    return path.moments(s, t);
}

/// p~_0(s,x,t,y): frozen at the initial point (s, x).
inline FrozenGaussian backward_frozen(const ProblemSpec& spec, double s, const Vec& x, double t, int steps) {
    if (!(s < t)) throw ArgumentError("backward frozen density: need s < t");
    const FrozenPath path(spec, s, x, s, t, (t - s) / steps);
    return path.moments(s, t);
}

// ---------------------------------------------------------------------------
// Chapman-Kolmogorov convolution inequality
// ---------------------------------------------------------------------------

struct PointPair {
    Vec x, y;
};

struct ConvolutionFit {
    double constant = 0.0;   // sup over the grid of integral / bold-g_{eps lambda}
    double epsilon = 1.0;
    PointPair witness;
};

/// Integral of bold-g_lambda(s,x,r,z) bold-g_lambda(r,z,t,y) over z.
inline double ck_integral(const FlowEnvelope& env, double lambda, double s, double r, double t, const Vec& x,
                          const Vec& y, const SpatialScheme& scheme = {}) {
    if (!(s < r && r < t)) throw ArgumentError("ck_convolution: need s < r < t");
    const Vec fwd = env.center(s, x, r);
    const Vec bwd = env.backward(r, t, y);
    const Vec mid = ((t - r) * fwd + (r - s) * bwd) / (t - s);
    const double scale = std::sqrt(2.0 * (r - s) * (t - r) / ((t - s) * 2.0 * lambda));
    return integrate_with_gaussian_proposal(
        [&](const Vec& z) {
            return FlowEnvelope::at_center(lambda, s, fwd, r, z) * env(lambda, r, z, t, y);
        },
        mid, scale, scheme);
}

/// Smallest C with int bold-g_lambda bold-g_lambda dz <= C bold-g_{eps lambda}(s,x,t,y)
/// over the grid, for the given eps in (0, 1].
inline ConvolutionFit ck_convolution_constant(const FlowEnvelope& env, double lambda, double s, double r, double t,
                                              const std::vector<PointPair>& grid, double epsilon,
                                              const SpatialScheme& scheme = {}) {
    if (grid.empty()) throw ArgumentError("ck_convolution_constant: empty grid");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ArgumentError("ck_convolution_constant: eps outside (0, 1]");
    std::vector<double> ratio(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        const auto& p = grid[i];
        const double integral = ck_integral(env, lambda, s, r, t, p.x, p.y, scheme);
        ratio[i] = integral / env(epsilon * lambda, s, p.x, t, p.y);
    });
    ConvolutionFit fit;
    fit.epsilon = epsilon;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (ratio[i] > fit.constant) {
            fit.constant = ratio[i];
            fit.witness = grid[i];
        }
    }
    return fit;
}

}  // namespace parametrix

