#pragma once

// Empirical certification of Gaussian envelopes: two-sided bounds, derivative
// envelopes with time-exponent regression, kernel envelopes, scaling, the
// control inequality, the chaining construction and Hoelder continuity of
// derivatives.

#include "parametrix/oracle.hpp"
#include "parametrix/parametrix.hpp"

#include <limits>
#include <map>

namespace parametrix {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::vector<double> dyadic_ladder(int count = 6) {
    std::vector<double> out;
    for (int k = 0; k < count; ++k) out.push_back(std::ldexp(1.0, -k));
    return out;
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// One sample of a fit. x2/y2 are the partner points of Hoelder pairs.
struct GridPoint {
    double s = 0.0, t = 0.0;
    Vec x, y;
    Vec center;  // theta^(1)_{t,s}(x) or x for flow-less centring
    Vec x2, y2;
    Vec center2;
    bool boundary = false;

    [[nodiscard]] double duration() const { return t - s; }
};

/// Parabolic grid: for each duration tau and start x, y = theta_{t,s}(x) + sqrt(tau) w
/// with w on a uniform lattice in [-W, W]^d. Level k uses (points - 1) 2^k + 1
/// nodes per axis, so coarser lattices are nested in finer ones.
struct GridSpec {
    double s = 0.0;
    std::vector<double> durations{0.25, 0.5, 1.0};
    std::vector<Vec> starts;
    double half_width = 3.0;
    int points = 13;

    [[nodiscard]] int points_at(int level) const { return (points - 1) * (1 << level) + 1; }
};

inline std::vector<GridPoint> parabolic_grid(const FlowEnvelope& env, const GridSpec& gs, int level = 0) {
    if (gs.durations.empty() || gs.starts.empty() || gs.points < 2)
        throw ArgumentError("grid: need at least one duration, one start point and two lattice points");
    const int n = gs.points_at(level);
    const int d = static_cast<int>(gs.starts.front().size());
    std::vector<GridPoint> out;
    for (double tau : gs.durations) {
        if (!(tau > 0.0)) throw ArgumentError("grid: durations must be positive");
        for (const Vec& x : gs.starts) {
            const Vec c = env.center(gs.s, x, gs.s + tau);
            std::vector<int> idx(d, 0);
            while (true) {
                GridPoint g;
                g.s = gs.s;
                g.t = gs.s + tau;
                g.x = x;
                g.center = c;
                Vec w(d);
                for (int k = 0; k < d; ++k) {
                    w[k] = -gs.half_width + 2.0 * gs.half_width * idx[k] / (n - 1);
                    g.boundary = g.boundary || idx[k] == 0 || idx[k] == n - 1;
                }
                g.y = c + std::sqrt(tau) * w;
                out.push_back(std::move(g));
                int k = 0;
                while (k < d && ++idx[k] == n) idx[k++] = 0;
                if (k == d) break;
            }
        }
    }
    return out;
}

/// Replaces flow centres by the start points (naive centring g_lambda(t-s, x-y)).
inline std::vector<GridPoint> flowless(std::vector<GridPoint> grid) {
    for (auto& g : grid) {
        g.center = g.x;
        if (g.x2.size()) g.center2 = g.x2;
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Ladder fits
// ---------------------------------------------------------------------------

enum class Side { upper, lower };

struct LadderEntry {
    double lambda = 0.0;
    double C = kInf;
    bool admissible = false;
};

struct EnvelopeFit {
    std::string target;
    Side side = Side::upper;
    double lambda = 0.0;
    double C = kInf;         // on the fine grid
    double C_coarse = kInf;  // on the coarse grid
    double stability = 0.0;  // C / C_coarse
    bool admissible = false; // worst ratio attained in the interior of the lattice
    GridPoint witness;
    std::size_t coarse_points = 0, fine_points = 0;
    std::optional<double> time_exponent;
    std::optional<double> expected_exponent;
    std::vector<LadderEntry> ladder;
    double stability_lo = 0.5, stability_hi = 2.0;
    double exponent_tolerance = 0.15;

    [[nodiscard]] bool stable() const { return stability >= stability_lo && stability <= stability_hi; }

    [[nodiscard]] bool exponent_ok() const {
        if (!time_exponent || !expected_exponent) return true;
        return std::abs(*time_exponent - *expected_exponent) <= exponent_tolerance;
    }

    [[nodiscard]] bool pass() const { return std::isfinite(C) && admissible && stable() && exponent_ok(); }
};

struct RatioSweep {
    double C = 0.0;
    GridPoint witness;
};

/// Worst ratio over the grid; ties keep the earliest point.
template <class Ratio>
RatioSweep sweep(const std::vector<GridPoint>& grid, Ratio&& ratio) {
    std::vector<double> r(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) { r[i] = ratio(grid[i]); });
    RatioSweep out;
    out.witness = grid.front();
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double v = std::isnan(r[i]) ? kInf : r[i];
        if (v > out.C) {
            out.C = v;
            out.witness = grid[i];
        }
    }
    return out;
}

/// Tries every lambda of the ladder on the coarse grid, keeps the admissible
/// one (finite, interior witness) minimizing C lambda^{-d/2}, then refits it
/// on the fine grid. `ratio(lambda, point)` must already include any time factor.
template <class Ratio>
EnvelopeFit fit_over_ladder(const std::string& target, Side side, const std::vector<double>& ladder,
                            const std::vector<GridPoint>& coarse, const std::vector<GridPoint>& fine, Ratio&& ratio) {
    if (coarse.empty() || fine.empty()) throw ArgumentError(target + ": empty grid");
    if (ladder.empty()) throw ArgumentError(target + ": empty lambda ladder");
    const double d = static_cast<double>(coarse.front().x.size());
    EnvelopeFit fit;
    fit.target = target;
    fit.side = side;
    fit.coarse_points = coarse.size();
    fit.fine_points = fine.size();
    double best_score = kInf, fallback_score = kInf;
    std::optional<std::size_t> best, fallback;
    std::vector<RatioSweep> sweeps;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        const double lambda = ladder[k];
        RatioSweep sw = sweep(coarse, [&](const GridPoint& g) { return ratio(lambda, g); });
        LadderEntry e{lambda, sw.C, std::isfinite(sw.C) && !sw.witness.boundary};
        fit.ladder.push_back(e);
        const double score = sw.C * std::pow(lambda, -0.5 * d);
        if (e.admissible && score < best_score) {
            best_score = score;
            best = k;
        }
        if (std::isfinite(sw.C) && score < fallback_score) {
            fallback_score = score;
            fallback = k;
        }
        sweeps.push_back(std::move(sw));
    }
    const std::size_t pick = best ? *best : (fallback ? *fallback : 0);
    fit.admissible = best.has_value();
    fit.lambda = ladder[pick];
    fit.C_coarse = sweeps[pick].C;
    fit.witness = sweeps[pick].witness;
    if (!std::isfinite(fit.C_coarse)) {
        fit.C = kInf;
        return fit;
    }
    const RatioSweep fine_sweep = sweep(fine, [&](const GridPoint& g) { return ratio(fit.lambda, g); });
    fit.C = fine_sweep.C;
    fit.witness = fine_sweep.witness;
    fit.admissible = fit.admissible && !fine_sweep.witness.boundary;
    fit.stability = fit.C_coarse > 0.0 ? fit.C / fit.C_coarse : (fit.C == 0.0 ? 1.0 : kInf);
    return fit;
}

/// Least-squares slope of log q against log tau.
inline double loglog_slope(const std::vector<double>& tau, const std::vector<double>& q) {
    if (tau.size() != q.size() || tau.size() < 2) throw ArgumentError("regression: need at least two samples");
    double mx = 0, my = 0;
    const double n = static_cast<double>(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!(q[i] > 0.0) || !std::isfinite(q[i])) throw ArgumentError("regression: non-positive sample");
        mx += std::log(tau[i]) / n;
        my += std::log(q[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double dx = std::log(tau[i]) - mx;
        sxy += dx * (std::log(q[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Regresses the exponent of sup_{grid at tau} ratio(point) in tau.
template <class Ratio>
double regress_time_exponent(const std::vector<GridPoint>& grid, Ratio&& ratio) {
    std::map<double, double> sup;
    std::vector<double> r(grid.size(), 0.0);
    parallel_for(grid.size(), [&](std::size_t i) { r[i] = ratio(grid[i]); });
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double& v = sup[grid[i].duration()];
        v = std::max(v, r[i]);
    }
    std::vector<double> tau, q;
    for (auto [k, v] : sup) {
        tau.push_back(k);
        q.push_back(v);
    }
    return loglog_slope(tau, q);
}

// ---------------------------------------------------------------------------
// Two-sided bounds
// ---------------------------------------------------------------------------

struct FitOptions {
    std::vector<double> ladder = dyadic_ladder();
    double stability_lo = 0.5, stability_hi = 2.0;
    double exponent_tolerance = 0.15;
    double noise_floor = 0.0;        // subtracted from derivative magnitudes before fitting
    bool require_grad_sigma = true;  // grad_y envelopes need a bounded sigma gradient
};

struct TwoSidedFit {
    EnvelopeFit upper, lower;

    [[nodiscard]] bool pass() const { return upper.pass() && lower.pass(); }
    [[nodiscard]] double constant() const { return std::max(upper.C, lower.C); }
};

/// C0^{-1} g_{1/lambda} <= p <= C0 g_lambda, flow-centred through each
/// point's `center`.
inline TwoSidedFit fit_two_sided(const DensityField& density, const std::vector<GridPoint>& coarse,
                                 const std::vector<GridPoint>& fine, const FitOptions& opt = {}) {
    auto value_cache = [&](const std::vector<GridPoint>& grid) {
        std::vector<double> v(grid.size());
        parallel_for(grid.size(), [&](std::size_t i) { v[i] = density(grid[i].s, grid[i].x, grid[i].t, grid[i].y); });
        return v;
    };
    const std::vector<double> pc = value_cache(coarse), pf = value_cache(fine);
    auto lookup = [&](const GridPoint& g) {
        if (&g >= coarse.data() && &g < coarse.data() + coarse.size()) return pc[&g - coarse.data()];
        return pf[&g - fine.data()];
    };
    TwoSidedFit out;
    out.upper = fit_over_ladder("two_sided.upper", Side::upper, opt.ladder, coarse, fine,
                                [&](double lambda, const GridPoint& g) {
                                    return lookup(g) / g_lambda(lambda, g.duration(), Vec(g.center - g.y));
                                });
    out.lower = fit_over_ladder("two_sided.lower", Side::lower, opt.ladder, coarse, fine,
                                [&](double lambda, const GridPoint& g) {
                                    const double p = lookup(g);
                                    if (!(p > 0.0)) return kInf;
                                    return g_lambda(1.0 / lambda, g.duration(), Vec(g.center - g.y)) / p;
                                });
    for (EnvelopeFit* f : {&out.upper, &out.lower}) {
        f->stability_lo = opt.stability_lo;
        f->stability_hi = opt.stability_hi;
    }
    return out;
}

/// Upper constant at a fixed lambda (no admissibility selection).
inline RatioSweep upper_constant(const DensityField& density, const std::vector<GridPoint>& grid, double lambda) {
    return sweep(grid, [&](const GridPoint& g) {
        return density(g.s, g.x, g.t, g.y) / g_lambda(lambda, g.duration(), Vec(g.center - g.y));
    });
}

// ---------------------------------------------------------------------------
// Derivative envelopes
// ---------------------------------------------------------------------------

enum class Target { grad_x, hess_x, grad_y };

inline std::string to_string(Target t) {
    switch (t) {
        case Target::grad_x: return "grad_x";
        case Target::hess_x: return "hess_x";
        case Target::grad_y: return "grad_y";
    }
    return "unknown";
}

inline int order_of(Target t) { return t == Target::hess_x ? 2 : 1; }

using DerivativeFn = std::function<Mat(Target, double, const Vec&, double, const Vec&)>;

/// Euclidean norm for gradients, spectral norm for Hessians.
inline double tensor_norm(const Mat& m) { return m.cols() == 1 ? m.norm() : m.operatorNorm(); }

inline DerivativeFn fd_derivatives(DensityField field) {
    return [field = std::move(field)](Target tg, double s, const Vec& x, double t, const Vec& y) {
        const Variable v = tg == Target::grad_y ? Variable::y : Variable::x;
        return fd_derivative(field, v, order_of(tg), s, x, t, y);
    };
}

/// Analytic derivatives of the linear-Gaussian density (rate k, scale c).
inline DerivativeFn exact_linear_derivatives(double rate, double scale) {
    return [=](Target tg, double s, const Vec& x, double t, const Vec& y) -> Mat {
        const double tau = t - s;
        const double var = std::abs(rate) < 1e-14 ? scale * scale * tau
                                                  : scale * scale * std::expm1(2.0 * rate * tau) / (2.0 * rate);
        const double e = std::exp(rate * tau);
        const Vec u = e * x - y;
        const double p = exact_linear_density(rate, scale, s, x, t, y);
        const int d = static_cast<int>(x.size());
        switch (tg) {
            case Target::grad_x: return Mat(-e * p * u / var);
            case Target::grad_y: return Mat(p * u / var);
            case Target::hess_x:
                return Mat(e * e * p * (u * u.transpose() / (var * var) - Mat::Identity(d, d) / var));
        }
        return Mat();
    };
}

inline DerivativeFn frozen_derivatives(const ProblemSpec& spec, int steps = 200) {
    return [spec, steps](Target tg, double s, const Vec& x, double t, const Vec& y) {
        const FrozenGaussian fz = forward_frozen(spec, s, t, y, steps);
        return frozen_derivative(fz, x, y, order_of(tg), tg == Target::grad_y ? Variable::y : Variable::x);
    };
}

inline void check_derivative_preconditions(const ProblemSpec& spec, Target tg, const FitOptions& opt) {
    if (tg == Target::hess_x && !(spec.beta > 0.0 && spec.beta <= 1.0))
        throw ArgumentError("hess_x envelope requires a drift Hoelder exponent beta in (0,1], got beta=" +
                            std::to_string(spec.beta));
    if (tg == Target::grad_y && opt.require_grad_sigma && !spec.grad_sigma)
        throw ArgumentError("grad_y envelope requires a bounded gradient of sigma (grad_sigma) in the scenario");
}

/// |grad^j p| <= C (t-s)^{-j/2} g_lambda, plus the regressed exponent of
/// sup |grad^j p| / g_lambda in t - s (expected -j/2).
inline std::map<Target, EnvelopeFit> fit_derivative_envelopes(const ProblemSpec& spec, const DerivativeFn& deriv,
                                                               const std::vector<GridPoint>& coarse,
                                                               const std::vector<GridPoint>& fine,
                                                               const std::vector<Target>& targets,
                                                               const FitOptions& opt = {}) {
    for (Target tg : targets) check_derivative_preconditions(spec, tg, opt);
    std::map<Target, EnvelopeFit> out;
    for (Target tg : targets) {
        const int j = order_of(tg);
        auto magnitude = [&](const GridPoint& g) {
            return std::max(0.0, tensor_norm(deriv(tg, g.s, g.x, g.t, g.y)) - opt.noise_floor);
        };
        std::vector<double> mc(coarse.size()), mf(fine.size());
        parallel_for(coarse.size(), [&](std::size_t i) { mc[i] = magnitude(coarse[i]); });
        parallel_for(fine.size(), [&](std::size_t i) { mf[i] = magnitude(fine[i]); });
        auto lookup = [&](const GridPoint& g) {
            if (&g >= coarse.data() && &g < coarse.data() + coarse.size()) return mc[&g - coarse.data()];
            return mf[&g - fine.data()];
        };
        EnvelopeFit fit = fit_over_ladder(to_string(tg), Side::upper, opt.ladder, coarse, fine,
                                          [&](double lambda, const GridPoint& g) {
                                              const double tau = g.duration();
                                              return lookup(g) * std::pow(tau, 0.5 * j) /
                                                     g_lambda(lambda, tau, Vec(g.center - g.y));
                                          });
        fit.stability_lo = opt.stability_lo;
        fit.stability_hi = opt.stability_hi;
        fit.exponent_tolerance = opt.exponent_tolerance;
        fit.expected_exponent = -0.5 * j;
        const double lambda = fit.lambda;
        fit.time_exponent = regress_time_exponent(fine, [&](const GridPoint& g) {
            return lookup(g) / g_lambda(lambda, g.duration(), Vec(g.center - g.y));
        });
        out.emplace(tg, std::move(fit));
    }
    return out;
}

/// |H| <= C (t-s)^{-1+alpha/2} g_lambda with the regressed exponent of
/// sup |H| / g_lambda (expected -1 + alpha/2).
inline EnvelopeFit fit_kernel_envelope(const ProblemSpec& spec, const std::vector<GridPoint>& coarse,
                                       const std::vector<GridPoint>& fine, const FitOptions& opt = {},
                                       int steps = 200) {
    auto magnitude = [&](const GridPoint& g) { return std::abs(kernel_H(spec, g.s, g.x, g.t, g.y, steps)); };
    std::vector<double> mc(coarse.size()), mf(fine.size());
    parallel_for(coarse.size(), [&](std::size_t i) { mc[i] = magnitude(coarse[i]); });
    parallel_for(fine.size(), [&](std::size_t i) { mf[i] = magnitude(fine[i]); });
    auto lookup = [&](const GridPoint& g) {
        if (&g >= coarse.data() && &g < coarse.data() + coarse.size()) return mc[&g - coarse.data()];
        return mf[&g - fine.data()];
    };
    const double expo = -1.0 + 0.5 * spec.alpha;
    EnvelopeFit fit = fit_over_ladder("kernel_H", Side::upper, opt.ladder, coarse, fine,
                                      [&](double lambda, const GridPoint& g) {
                                          const double tau = g.duration();
                                          return lookup(g) * std::pow(tau, -expo) /
                                                 g_lambda(lambda, tau, Vec(g.center - g.y));
                                      });
    fit.stability_lo = opt.stability_lo;
    fit.stability_hi = opt.stability_hi;
    fit.exponent_tolerance = opt.exponent_tolerance;
    fit.expected_exponent = expo;
    const double lambda = fit.lambda;
    fit.time_exponent = regress_time_exponent(fine, [&](const GridPoint& g) {
        return lookup(g) / g_lambda(lambda, g.duration(), Vec(g.center - g.y));
    });
    return fit;
}

// ---------------------------------------------------------------------------
// Chapman-Kolmogorov convolution over an eps ladder
// ---------------------------------------------------------------------------

struct ConvolutionCertificate {
    double lambda = 0.0, epsilon = 0.0;
    double C = kInf, C_coarse = kInf, stability = 0.0;
    PointPair witness;
    bool found = false;
    double tolerance = 0.10;

    [[nodiscard]] bool pass() const { return found; }
};

/// Walks eps down the ladder and returns the first eps whose constant is
/// finite and agrees within `tolerance` between the coarse grid with the base
/// quadrature and the fine grid with 1.5x the spatial nodes.
inline ConvolutionCertificate ck_fit(const FlowEnvelope& env, double lambda, double s, double r, double t,
                                     const std::vector<PointPair>& coarse, const std::vector<PointPair>& fine,
                                     const std::vector<double>& eps_ladder, const SpatialScheme& scheme = {},
                                     double tolerance = 0.10) {
    ConvolutionCertificate out;
    out.lambda = lambda;
    out.tolerance = tolerance;
    SpatialScheme fine_scheme = scheme;
    fine_scheme.nodes = scheme.nodes + scheme.nodes / 2;
    for (double eps : eps_ladder) {
        const ConvolutionFit c = ck_convolution_constant(env, lambda, s, r, t, coarse, eps, scheme);
        const ConvolutionFit f = ck_convolution_constant(env, lambda, s, r, t, fine, eps, fine_scheme);
        out.epsilon = eps;
        out.C_coarse = c.constant;
        out.C = f.constant;
        out.witness = f.witness;
        out.stability = c.constant > 0.0 ? f.constant / c.constant : kInf;
        if (std::isfinite(f.constant) && std::abs(out.stability - 1.0) <= tolerance) {
            out.found = true;
            return out;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

/// Coefficients of the process rescaled to unit time: with lambda = t - s,
/// b^(u, z) = sqrt(lambda) b(s + lambda u, sqrt(lambda) z), sigma^(u, z) = sigma(s + lambda u, sqrt(lambda) z).
inline ProblemSpec rescale_problem(const ProblemSpec& spec, double s, double lambda) {
    if (!(lambda > 0.0)) throw ArgumentError("rescale_problem: lambda must be positive");
    ProblemSpec out = spec;
    const double r = std::sqrt(lambda);
    out.name = spec.name + "@rescaled";
    out.horizon = 1.0;
    out.drift = [b = spec.drift, s, lambda, r](double u, const Vec& z) -> Vec { return r * b(s + lambda * u, r * z); };
    out.diffusion = [sg = spec.diffusion, s, lambda, r](double u, const Vec& z) -> Mat {
        return sg(s + lambda * u, r * z);
    };
    if (spec.grad_sigma) {
        out.grad_sigma = [g = *spec.grad_sigma, s, lambda, r](double u, const Vec& z) {
            auto v = g(s + lambda * u, r * z);
            for (auto& m : v) m *= r;
            return v;
        };
    }
    return out;
}

struct ScalingReport {
    double lambda = 0.0;
    double original = 0.0, rescaled = 0.0;  // p and lambda^{-d/2} p^
    double discrepancy = 0.0;
    double flow_lhs = 0.0, flow_rhs = 0.0, flow_discrepancy = 0.0;
};

/// Compares p(s,x,t,y) with lambda^{-d/2} p^(0, x/sqrt(lambda), 1, y/sqrt(lambda)),
/// and |theta^_{1,0}(x^) - y^|^2 with |theta_{t,s}(x) - y|^2 / lambda.
inline ScalingReport scaling_check(const ProblemSpec& spec, const DensityField& density,
                                   const DensityField& rescaled_density, double s, const Vec& x, double t,
                                   const Vec& y, int flow_steps = kDefaultFlowSteps) {
    if (!(s < t)) throw ArgumentError("scaling_check: need s < t");
    ScalingReport rep;
    const double lambda = t - s;
    const double r = std::sqrt(lambda);
    const double d = static_cast<double>(x.size());
    rep.lambda = lambda;
    rep.original = density(s, x, t, y);
    rep.rescaled = std::pow(lambda, -0.5 * d) * rescaled_density(0.0, Vec(x / r), 1.0, Vec(y / r));
    rep.discrepancy = std::abs(rep.original - rep.rescaled);
    const ProblemSpec hat = rescale_problem(spec, s, lambda);
    const Vec th = solve_flow(hat.drift, 0.0, 1.0, Vec(x / r), 1.0 / flow_steps);
    const Vec tf = solve_flow(spec.drift, s, t, x, lambda / flow_steps);
    rep.flow_lhs = (th - y / r).squaredNorm();
    rep.flow_rhs = (tf - y).squaredNorm() / lambda;
    rep.flow_discrepancy = std::abs(rep.flow_lhs - rep.flow_rhs);
    return rep;
}

// ---------------------------------------------------------------------------
// Control inequality
// ---------------------------------------------------------------------------

struct ControlResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double C = kInf;
    bool found = false;
    std::size_t z_points = 0;
};

/// Geometric ladder 1, q, q^2, ... with q = 2^{1/16}.
inline std::vector<double> fine_ladder(double max_value = 1e6) {
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double c = std::exp2(k / 16.0);
        if (c > max_value) break;
        out.push_back(c);
    }
    return out;
}

/// Uniform lattice with `points` nodes per axis on center + [-W, W]^d.
inline std::vector<Vec> box_lattice(const Vec& center, double half_width, int points) {
    const int d = static_cast<int>(center.size());
    std::vector<Vec> out;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec z(d);
        for (int k = 0; k < d; ++k) z[k] = center[k] - half_width + 2.0 * half_width * idx[k] / (points - 1);
        out.push_back(z);
        int k = 0;
        while (k < d && ++idx[k] == points) idx[k++] = 0;
        if (k == d) break;
    }
    return out;
}

/// lhs = E l(X_{t,s}(x)) from the cloud; rhs(C) = C sup_z exp(ln l(z) - |z - theta|^2 / C);
/// returns the smallest ladder C with lhs <= rhs.
inline ControlResult control_inequality_check(const std::function<double(const Vec&)>& ell, const Vec& theta,
                                              const SampleCloud& cloud, const std::vector<Vec>& z_grid,
                                              const std::vector<double>& ladder = fine_ladder()) {
    if (cloud.n_paths == 0) throw ArgumentError("control_inequality_check: empty cloud");
    if (z_grid.empty()) throw ArgumentError("control_inequality_check: empty z grid");
    ControlResult res;
    res.z_points = z_grid.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < cloud.n_paths; ++i) acc += ell(cloud.point(i));
    res.lhs = acc / static_cast<double>(cloud.n_paths);
    std::vector<double> log_ell(z_grid.size()), dist2(z_grid.size());
    for (std::size_t k = 0; k < z_grid.size(); ++k) {
        const double l = ell(z_grid[k]);
        if (!(l > 0.0)) throw ArgumentError("control_inequality_check: l must be positive on the z grid");
        log_ell[k] = std::log(l);
        dist2[k] = (z_grid[k] - theta).squaredNorm();
    }
    for (double c : ladder) {
        double sup = -kInf;
        for (std::size_t k = 0; k < z_grid.size(); ++k) sup = std::max(sup, log_ell[k] - dist2[k] / c);
        const double rhs = c * std::exp(sup);
        if (res.lhs <= rhs) {
            res.C = c;
            res.rhs = rhs;
            res.found = true;
            return res;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Chaining
// ---------------------------------------------------------------------------

struct ChainLink {
    double distance = 0.0;  // |xi_{j+1} - theta_{t_{j+1},t_j}(xi_j)|
    double excess = 0.0;    // max(0, distance - budget)
};

/// Chain between x and y in unit-time coordinates (x / sqrt(t-s), y / sqrt(t-s)).
struct ChainCertificate {
    int M = 1;
    double L = 0.0;      // sampled sup |grad b_1| of the rescaled drift
    double gamma = 0.0;  // 1 / (2 (e^L + 1))
    double budget = 0.0; // 1 / (2 sqrt(M))
    double gap = 0.0;    // |theta^_{1,0}(x^) - y^|
    double time_scale = 1.0, space_scale = 1.0;
    bool trivial = false;
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<ChainLink> links;
    std::optional<int> failed_link;

    [[nodiscard]] bool pass() const { return !failed_link.has_value(); }
    [[nodiscard]] double max_distance() const {
        double m = 0.0;
        for (const auto& l : links) m = std::max(m, l.distance);
        return m;
    }
};

struct ChainOptions {
    int flow_steps = 200;         // RK4 steps per link
    int gradient_samples = 41;    // per axis, for the sampled Lipschitz constant
};

/// Greedy construction: at each link, push xi_j along the flow and correct
/// toward the backward flow of y by 1/(remaining links) of the mismatch,
/// capped at the link budget 1/(2 sqrt(M)). M is the smallest integer greater
/// than 4 e^{2L} |theta_{1,0}(x) - y|^2.
inline ChainCertificate build_chain(const ProblemSpec& spec, double s, double t, const Vec& x, const Vec& y,
                                    const ChainOptions& opt = {}) {
    if (!(s < t)) throw ArgumentError("build_chain: need s < t");
    const double lambda = t - s;
    const double r = std::sqrt(lambda);
    const ProblemSpec hat = rescale_problem(spec, s, lambda);
    const DriftFn b1 = mollify_drift(hat, 1.0).as_function();
    const Vec xh = x / r, yh = y / r;
    const int d = spec.dimension;

    ChainCertificate cert;
    cert.time_scale = lambda;
    cert.space_scale = r;
    const FlowTrajectory fwd = trace_flow(b1, 0.0, 1.0, xh, opt.flow_steps);
    const FlowTrajectory bwd = trace_flow(b1, 1.0, 0.0, yh, opt.flow_steps);
    cert.gap = (fwd.end() - yh).norm();

    // Lipschitz constant sampled over a box covering both flows and the segment, padded by one.
    Vec lo = xh.cwiseMin(yh), hi = xh.cwiseMax(yh);
    for (const auto& v : fwd.states) lo = lo.cwiseMin(v), hi = hi.cwiseMax(v);
    for (const auto& v : bwd.states) lo = lo.cwiseMin(v), hi = hi.cwiseMax(v);
    lo.array() -= 1.0;
    hi.array() += 1.0;
    std::vector<Vec> probes;
    {
        const int n = opt.gradient_samples;
        std::vector<int> idx(d, 0);
        while (true) {
            Vec z(d);
            for (int k = 0; k < d; ++k) z[k] = lo[k] + (hi[k] - lo[k]) * idx[k] / (n - 1);
            probes.push_back(z);
            int k = 0;
            while (k < d && ++idx[k] == n) idx[k++] = 0;
            if (k == d) break;
        }
    }
    for (double u : {0.0, 0.5, 1.0}) cert.L = std::max(cert.L, sampled_gradient_sup(b1, d, probes, u));
    cert.gamma = 1.0 / (2.0 * (std::exp(cert.L) + 1.0));
    cert.M = static_cast<int>(std::floor(4.0 * std::exp(2.0 * cert.L) * cert.gap * cert.gap)) + 1;
    cert.budget = 1.0 / (2.0 * std::sqrt(static_cast<double>(cert.M)));

    if (cert.gap <= 1.0) {
        cert.trivial = true;
        cert.times = {0.0, 1.0};
        cert.points = {xh, yh};
        cert.links.push_back({(yh - fwd.end()).norm(), 0.0});
        return cert;
    }

    const int M = cert.M;
    cert.times.resize(M + 1);
    cert.points.resize(M + 1);
    cert.points[0] = xh;
    for (int j = 0; j <= M; ++j) cert.times[j] = static_cast<double>(j) / M;
    const int link_steps = std::max(1, opt.flow_steps / M);
    for (int j = 0; j < M; ++j) {
        const double a = cert.times[j], b = cert.times[j + 1];
        const Vec pushed = solve_flow(b1, a, b, cert.points[j], (b - a) / link_steps);
        Vec next;
        if (j == M - 1) {
            next = yh;
        } else {
            const Vec target = solve_flow(b1, 1.0, b, yh, (1.0 - b) / std::max(1, link_steps * (M - j - 1)));
            Vec corr = (target - pushed) / static_cast<double>(M - j);
            const double n = corr.norm();
            if (n > cert.budget) corr *= cert.budget / n;
            next = pushed + corr;
        }
        cert.points[j + 1] = next;
        ChainLink link;
        link.distance = (next - pushed).norm();
        link.excess = std::max(0.0, link.distance - cert.budget);
        if (link.excess > 1e-12 && !cert.failed_link) cert.failed_link = j;
        cert.links.push_back(link);
    }
    return cert;
}

// ---------------------------------------------------------------------------
// Hoelder continuity of derivatives
// ---------------------------------------------------------------------------

enum class HolderForm {
    grad_x_in_x,  // |grad_x p(x) - grad_x p(x')|, gamma in (0,1)
    grad_x_in_y,  // |grad_x p(y) - grad_x p(y')|, gamma in (0,alpha)
    hess_x_in_x,  // second-order form in x (needs beta > 0)
    grad_y_in_y,  // |grad_y p(y) - grad_y p(y')|, gamma in (0, alpha ^ beta)
};

inline std::string to_string(HolderForm f) {
    switch (f) {
        case HolderForm::grad_x_in_x: return "holder.grad_x.x";
        case HolderForm::grad_x_in_y: return "holder.grad_x.y";
        case HolderForm::hess_x_in_x: return "holder.hess_x.x";
        case HolderForm::grad_y_in_y: return "holder.grad_y.y";
    }
    return "unknown";
}

struct HolderReport {
    EnvelopeFit fit;
    double gamma = 0.0;
    double diagonal_C = 0.0, off_diagonal_C = 0.0;  // split at |h|^2 = (t-s)/4

    [[nodiscard]] double split_ratio() const {
        if (diagonal_C <= 0.0 || off_diagonal_C <= 0.0) return 1.0;
        return std::max(diagonal_C / off_diagonal_C, off_diagonal_C / diagonal_C);
    }
    [[nodiscard]] bool pass() const { return fit.pass(); }
};

/// Pairs for a Hoelder check: each base point of the parabolic grid gets
/// partners displaced by sqrt(tau) delta along every axis, for every delta in
/// `offsets` (positive and negative).
inline std::vector<GridPoint> holder_pairs(const FlowEnvelope& env, const GridSpec& gs, int level,
                                           const std::vector<double>& offsets, bool move_x) {
    std::vector<GridPoint> base = parabolic_grid(env, gs, level);
    std::vector<GridPoint> out;
    const int d = static_cast<int>(gs.starts.front().size());
    for (const auto& g : base) {
        const double rt = std::sqrt(g.duration());
        for (double delta : offsets) {
            for (int sign : {-1, 1}) {
                for (int k = 0; k < d; ++k) {
                    GridPoint p = g;
                    Vec h = Vec::Zero(d);
                    h[k] = sign * rt * delta;
                    if (move_x) {
                        p.x2 = g.x + h;
                        p.y2 = g.y;
                        p.center2 = env.center(g.s, p.x2, g.t);
                    } else {
                        p.x2 = g.x;
                        p.y2 = g.y + h;
                        p.center2 = g.center;
                    }
                    out.push_back(std::move(p));
                }
            }
        }
    }
    return out;
}

inline HolderReport holder_continuity_check(const ProblemSpec& spec, const DerivativeFn& deriv, HolderForm form,
                                            double gamma, const std::vector<GridPoint>& coarse,
                                            const std::vector<GridPoint>& fine, const FitOptions& opt = {}) {
    const double alpha = spec.alpha, beta = spec.beta;
    switch (form) {
        case HolderForm::grad_x_in_x:
            if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("holder: gamma must lie in (0,1)");
            break;
        case HolderForm::grad_x_in_y:
            if (!(gamma > 0.0 && gamma < alpha)) throw ArgumentError("holder: gamma must lie in (0,alpha)");
            break;
        case HolderForm::hess_x_in_x:
            if (!(beta > 0.0)) throw ArgumentError("holder: second-order form requires beta in (0,1]");
            break;
        case HolderForm::grad_y_in_y:
            if (!(gamma > 0.0 && gamma < std::min(alpha, beta)))
                throw ArgumentError("holder: gamma must lie in (0, min(alpha, beta))");
            if (opt.require_grad_sigma && !spec.grad_sigma)
                throw ArgumentError("holder: grad_y form requires grad_sigma in the scenario");
            break;
    }
    const Target tg = form == HolderForm::hess_x_in_x ? Target::hess_x
                      : form == HolderForm::grad_y_in_y ? Target::grad_y
                                                        : Target::grad_x;
    auto diff = [&](const GridPoint& g) {
        return tensor_norm(Mat(deriv(tg, g.s, g.x, g.t, g.y) - deriv(tg, g.s, g.x2, g.t, g.y2)));
    };
    auto weight = [&](const GridPoint& g) {
        const double tau = g.duration();
        const double h = (g.x - g.x2).norm() + (g.y - g.y2).norm();
        if (form == HolderForm::hess_x_in_x)
            return h / std::pow(tau, 1.5) + (std::pow(h, alpha) + std::pow(h, beta)) / tau;
        return std::pow(h, gamma) / std::pow(tau, 0.5 * (1.0 + gamma));
    };
    std::vector<double> dc(coarse.size()), df(fine.size());
    parallel_for(coarse.size(), [&](std::size_t i) { dc[i] = diff(coarse[i]); });
    parallel_for(fine.size(), [&](std::size_t i) { df[i] = diff(fine[i]); });
    auto lookup = [&](const GridPoint& g) {
        if (&g >= coarse.data() && &g < coarse.data() + coarse.size()) return dc[&g - coarse.data()];
        return df[&g - fine.data()];
    };
    auto ratio = [&](double lambda, const GridPoint& g) {
        const double w = weight(g);
        if (w == 0.0) return 0.0;
        const double env = g_lambda(lambda, g.duration(), Vec(g.center - g.y)) +
                           g_lambda(lambda, g.duration(), Vec(g.center2 - g.y2));
        return std::max(0.0, lookup(g) - opt.noise_floor) / (w * env);
    };
    HolderReport rep;
    rep.gamma = gamma;
    rep.fit = fit_over_ladder(to_string(form), Side::upper, opt.ladder, coarse, fine, ratio);
    rep.fit.stability_lo = opt.stability_lo;
    rep.fit.stability_hi = opt.stability_hi;
    for (const auto& g : fine) {
        const double h2 = (g.x - g.x2).squaredNorm() + (g.y - g.y2).squaredNorm();
        const double r = ratio(rep.fit.lambda, g);
        if (h2 <= 0.25 * g.duration())
            rep.diagonal_C = std::max(rep.diagonal_C, r);
        else
            rep.off_diagonal_C = std::max(rep.off_diagonal_C, r);
    }
    return rep;
}

}  // namespace parametrix
