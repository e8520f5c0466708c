#pragma once

// Deterministic flow of the (mollified) drift: d/dt theta_{t,s}(x) = b(t, theta_{t,s}(x)).

#include "parametrix/core/parallel.hpp"
#include "parametrix/model.hpp"

#include <algorithm>
#include <ostream>
#include <vector>

namespace parametrix {

inline constexpr int kDefaultFlowSteps = 1000;

namespace detail {

inline Vec checked_drift(const DriftFn& b, double t, const Vec& x, double last_valid) {
    Vec v = b(t, x);
    if (!v.allFinite())
        throw IntegrationError("flow: non-finite drift at " + format_point(t, x), last_valid);
    return v;
}

/// One classical RK4 step of size h (may be negative).
inline Vec rk4_step(const DriftFn& b, double t, const Vec& x, double h) {
    const Vec k1 = checked_drift(b, t, x, t);
    const Vec k2 = checked_drift(b, t + 0.5 * h, x + 0.5 * h * k1, t);
    const Vec k3 = checked_drift(b, t + 0.5 * h, x + 0.5 * h * k2, t);
    const Vec k4 = checked_drift(b, t + h, x + h * k3, t);
    Vec next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw IntegrationError("flow: non-finite state after " + format_point(t, x), t);
    return next;
}

inline int steps_for(double s, double t, double h) {
    if (!(h > 0.0)) throw ArgumentError("solve_flow: step must be positive");
    return std::max(1, static_cast<int>(std::ceil(std::abs(t - s) / h - 1e-9)));
}

}  // namespace detail

/// Discretized flow theta_{r,s}(x0) on a uniform time grid from s to t.
struct FlowTrajectory {
    double s = 0.0;
    double t = 0.0;
    double step = 0.0;  // signed
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> velocities;  // drift at each state, for Hermite interpolation

    [[nodiscard]] const Vec& start() const { return states.front(); }
    [[nodiscard]] const Vec& end() const { return states.back(); }

    /// State at an arbitrary time between s and t (cubic Hermite between grid points).
    [[nodiscard]] Vec at(double r) const {
        const std::size_t n = times.size() - 1;
        if (n == 0) return states.front();
        double pos = (r - s) / step;
        pos = std::clamp(pos, 0.0, static_cast<double>(n));
        std::size_t k = std::min(static_cast<std::size_t>(pos), n - 1);
        const double u = pos - static_cast<double>(k);
        const double h = step;
        const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
        const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
        return h00 * states[k] + h10 * h * velocities[k] + h01 * states[k + 1] + h11 * h * velocities[k + 1];
    }
};

/// Integrates the flow from (s, x) to time t with `steps` uniform RK4 steps.
/// t < s integrates backward.
inline FlowTrajectory trace_flow(const DriftFn& drift, double s, double t, const Vec& x, int steps) {
    if (steps < 1) throw ArgumentError("trace_flow: need at least one step");
    FlowTrajectory tr;
    tr.s = s;
    tr.t = t;
    tr.step = (t - s) / steps;
    tr.times.reserve(steps + 1);
    tr.states.reserve(steps + 1);
    tr.velocities.reserve(steps + 1);
    Vec state = x;
    for (int k = 0; k <= steps; ++k) {
        const double r = (k == steps) ? t : s + k * tr.step;
        tr.times.push_back(r);
        tr.states.push_back(state);
        tr.velocities.push_back(detail::checked_drift(drift, r, state, r));
        if (k < steps) state = detail::rk4_step(drift, r, state, tr.step);
    }
    return tr;
}

/// theta_{t,s}(x) by fixed-step RK4 with step at most h.
inline Vec solve_flow(const DriftFn& drift, double s, double t, const Vec& x, double h) {
    if (s == t) return x;
    const int n = detail::steps_for(s, t, h);
    const double step = (t - s) / n;
    Vec state = x;
    for (int k = 0; k < n; ++k) state = detail::rk4_step(drift, s + k * step, state, step);
    return state;
}

/// theta_{t,s}(x) with the default step |t - s| / 1000.
inline Vec solve_flow(const DriftFn& drift, double s, double t, const Vec& x) {
    if (s == t) return x;
    return solve_flow(drift, s, t, x, std::abs(t - s) / kDefaultFlowSteps);
}

/// CSV dump: header "r,theta_1,...,theta_d", one row per grid time.
inline void write_flow_csv(std::ostream& os, const FlowTrajectory& tr) {
    const auto d = tr.states.empty() ? 0 : tr.states.front().size();
    os << "r";
    for (Eigen::Index i = 0; i < d; ++i) os << ",theta_" << (i + 1);
    os << "\n";
    os.precision(17);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        os << tr.times[k];
        for (Eigen::Index i = 0; i < d; ++i) os << "," << tr.states[k][i];
        os << "\n";
    }
}

// ---------------------------------------------------------------------------
// Flow equivalence across mollification radii
// ---------------------------------------------------------------------------

struct FlowSample {
    double s = 0.0, t = 0.0;
    Vec x, y;
};

struct FlowEquivalenceReport {
    double constant = 1.0;
    FlowSample witness;
    double witness_epsilon = 1.0;
};

/// Smallest C >= 1 such that, for every sample and every eps in eps_list,
///   |theta^1_{t,s}(x) - y| + |t-s|,  |theta^eps_{t,s}(x) - y| + |t-s|,
///   |x - theta^eps_{s,t}(y)| + |t-s|
/// are pairwise within a factor C of each other.
inline FlowEquivalenceReport flow_equivalence(const ProblemSpec& spec, const std::vector<double>& eps_list,
                                              const std::vector<FlowSample>& grid,
                                              int steps = kDefaultFlowSteps) {
    if (grid.empty()) throw ArgumentError("flow_equivalence_constant: empty grid");
    if (eps_list.empty()) throw ArgumentError("flow_equivalence_constant: empty radius list");
    for (double e : eps_list)
        if (!(e > 0.0 && e <= 1.0)) throw ArgumentError("flow_equivalence_constant: radius outside (0, 1]");
    for (const auto& g : grid)
        if (std::abs(g.t - g.s) > spec.horizon + 1e-12)
            throw ArgumentError("flow_equivalence_constant: |t - s| exceeds the horizon");

    const DriftFn b1 = mollify_drift(spec, 1.0).as_function();
    std::vector<DriftFn> beps;
    for (double e : eps_list) beps.push_back(mollify_drift(spec, e).as_function());

    std::vector<double> ratio(grid.size() * eps_list.size(), 1.0);
    parallel_for(grid.size(), [&](std::size_t i) {
        const auto& g = grid[i];
        const double dt = std::abs(g.t - g.s);
        auto hstep = [&](double a, double b) { return std::max(std::abs(b - a), 1e-12) / steps; };
        const double q1 = (solve_flow(b1, g.s, g.t, g.x, hstep(g.s, g.t)) - g.y).norm() + dt;
        for (std::size_t k = 0; k < beps.size(); ++k) {
            const double qf = (solve_flow(beps[k], g.s, g.t, g.x, hstep(g.s, g.t)) - g.y).norm() + dt;
            const double qb = (g.x - solve_flow(beps[k], g.t, g.s, g.y, hstep(g.s, g.t))).norm() + dt;
            auto r = [](double a, double b) { return std::max(a / b, b / a); };
            ratio[i * beps.size() + k] = std::max({r(q1, qf), r(qf, qb), r(q1, qb)});
        }
    });
    FlowEquivalenceReport rep;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        if (ratio[i] > rep.constant) {
            rep.constant = ratio[i];
            rep.witness = grid[i / eps_list.size()];
            rep.witness_epsilon = eps_list[i % eps_list.size()];
        }
    }
    return rep;
}

inline double flow_equivalence_constant(const ProblemSpec& spec, const std::vector<double>& eps_list,
                                        const std::vector<FlowSample>& grid) {
    return flow_equivalence(spec, eps_list, grid).constant;
}

/// Sampled sup of the operator norm of the drift Jacobian (central differences).
inline double sampled_gradient_sup(const DriftFn& drift, int d, const std::vector<Vec>& points, double t = 0.0,
                                   double h = 1e-5) {
    double sup = 0.0;
    for (const Vec& x : points) {
        Mat jac(d, d);
        for (int k = 0; k < d; ++k) {
            Vec e = Vec::Zero(d);
            e[k] = h;
            jac.col(k) = (drift(t, x + e) - drift(t, x - e)) / (2.0 * h);
        }
        sup = std::max(sup, jac.operatorNorm());
    }
    return sup;
}

}  // namespace parametrix
