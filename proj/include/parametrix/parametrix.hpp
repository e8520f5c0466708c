#pragma once

// Parametrix kernel H, the time-space convolution, the truncated forward
// series and the Duhamel residual.

#include "parametrix/density.hpp"
#include "parametrix/gaussian.hpp"
#include "parametrix/oracle.hpp"

namespace parametrix {

struct SeriesConfig {
    int N = 2;
    int time_nodes = 24;
    SpatialScheme space{};
    int flow_steps = 200;      // RK4 steps over the outermost interval; inner layers reuse the step size
    double inflation = 2.0;    // proposal variance factor on top of kappa0 * bridge variance
    int inner_time_nodes = 0;  // 0: same as time_nodes
    int inner_space_nodes = 0; // 0: same as space.nodes
    double time_exponent = 0.0; // exponent of the time substitution; 0: spec alpha
};

/// Frozen density and parametrix kernel for a fixed terminal point (t, y).
/// One frozen path serves every (r, z) with r in [lo, t].
class TerminalKernel {
public:
    TerminalKernel(const ProblemSpec& spec, double t, const Vec& y, double lo, double step)
        : spec_(&spec), t_(t), y_(y), path_(spec, t, y, lo, t, step) {}

    [[nodiscard]] FrozenGaussian moments(double r) const { return path_.moments(r, t_); }

    /// theta_{r,t}(y)
    [[nodiscard]] Vec backward_flow(double r) const { return path_.flow_at(r); }

    [[nodiscard]] double frozen(double r, const Vec& z) const { return frozen_density(moments(r), z, y_); }

    /// H(r,z,t,y) = tr(A hess_z p~_1) + B . grad_z p~_1 with coefficient
    /// differences taken against the backward flow point theta_{r,t}(y).
    [[nodiscard]] double H(double r, const Vec& z) const {
        const FrozenGaussian fz = moments(r);
        const Vec anchor = path_.flow_at(r);
        const Mat A = spec_->a(r, z) - spec_->a(r, anchor);
        const Vec B = spec_->b(r, z) - spec_->b(r, anchor);
        const GaussianJet jet = frozen_jet(fz, z, y_);
        return (A.cwiseProduct(jet.hess_x)).sum() + B.dot(jet.grad_x);
    }

    [[nodiscard]] double t() const { return t_; }
    [[nodiscard]] const Vec& y() const { return y_; }

private:
    const ProblemSpec* spec_;
    double t_;
    Vec y_;
    FrozenPath path_;
};

inline double kernel_H(const ProblemSpec& spec, double s, const Vec& x, double t, const Vec& y,
                       int steps = kDefaultFlowSteps) {
    if (!(s < t)) throw ArgumentError("kernel_H: need s < t");
    return TerminalKernel(spec, t, y, s, (t - s) / steps).H(s, x);
}

/// int_s^t int f(r, z) g(r, z) dz dr where f carries the initial point (s, x)
/// and g the terminal point (t, y). Time uses Gauss-Legendre in
/// u = ((t-r)/(t-s))^{q/2}, which removes a (t-r)^{-1+q/2} endpoint singularity;
/// space uses a Gaussian proposal at the bridge mean of the forward flow from
/// (s, x) and the backward flow from (t, y).
template <class F, class G>
double time_space_convolve(const ProblemSpec& spec, F&& f, G&& g, double s, const Vec& x, double t, const Vec& y,
                           const SeriesConfig& cfg, int time_nodes = 0, int space_nodes = 0) {
    if (!(s < t)) throw ArgumentError("time_space_convolve: need s < t");
    const int nt = time_nodes > 0 ? time_nodes : cfg.time_nodes;
    SpatialScheme space = cfg.space;
    if (space_nodes > 0) space.nodes = space_nodes;
    const double q = cfg.time_exponent > 0.0 ? cfg.time_exponent : spec.alpha;
    const double len = t - s;
    const FlowTrajectory fwd = trace_flow(spec.drift, s, t, x, cfg.flow_steps);
    const FlowTrajectory bwd = trace_flow(spec.drift, t, s, y, cfg.flow_steps);

    const QuadratureRule& rule = gauss_legendre(nt);
    std::vector<double> slot(nt, 0.0);
    parallel_for(static_cast<std::size_t>(nt), [&](std::size_t k) {
        const double u = 0.5 * (rule.nodes[k] + 1.0);
        const double w = 0.5 * rule.weights[k];
        const double p = 2.0 / q;
        const double r = t - len * std::pow(u, p);
        const double jac = len * p * std::pow(u, p - 1.0);
        if (!(r > s && r < t)) return;
        const Vec mid = ((t - r) * fwd.at(r) + (r - s) * bwd.at(r)) / len;
        const double var = cfg.inflation * spec.kappa0 * (r - s) * (t - r) / len;
        double inner = 0.0;
        try {
            inner = integrate_with_gaussian_proposal([&](const Vec& z) { return f(r, z) * g(r, z); }, mid,
                                                     std::sqrt(var), space, k);
        } catch (const QuadratureError& e) {
            throw QuadratureError(std::string(e.what()) + " at r=" + std::to_string(r) + " in convolution over [" +
                                  std::to_string(s) + ", " + std::to_string(t) + "]");
        }
        slot[k] = w * jac * inner;
    });
    double total = 0.0;
    for (double v : slot) total += v;
    return total;
}

/// Smallest N with -1 + N alpha / 2 > d / 2.
inline int choose_truncation(int d, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0) || d < 1) throw ArgumentError("choose_truncation: need alpha in (0,1], d >= 1");
    int n = 0;
    while (!(-1.0 + n * alpha / 2.0 > d / 2.0 + 1e-12)) ++n;
    return n;
}

struct SeriesValue {
    double value = 0.0;
    int N = 0;
    double remainder_order = 0.0;  // (t-s)^{-1 + N alpha / 2}
};

/// Truncated forward series p~_1 + sum_{j=1}^{N-1} p~_1 (x) H^{(x) j}, evaluated
/// through S_n = p~_1 + S_{n-1} (x) H, so each layer is one convolution.
class ParametrixSeries {
public:
    ParametrixSeries(ProblemSpec spec, SeriesConfig cfg) : spec_(std::move(spec)), cfg_(cfg) {
        if (cfg_.N < 0) throw ArgumentError("parametrix_series: N must be >= 0");
        if (cfg_.time_nodes < 1 || cfg_.flow_steps < 1) throw ArgumentError("parametrix_series: bad quadrature sizes");
    }

    [[nodiscard]] SeriesValue operator()(double s, const Vec& x, double t, const Vec& y) const {
        if (!(s < t)) throw ArgumentError("parametrix_series: need s < t");
        if (t - s > spec_.horizon + 1e-12) throw ArgumentError("parametrix_series: t - s exceeds the horizon");
        SeriesValue out;
        out.N = cfg_.N;
        out.remainder_order = std::pow(t - s, -1.0 + cfg_.N * spec_.alpha / 2.0);
        out.value = partial(cfg_.N, s, x, t, y, (t - s) / cfg_.flow_steps, true);
        return out;
    }

    [[nodiscard]] double value(double s, const Vec& x, double t, const Vec& y) const {
        return (*this)(s, x, t, y).value;
    }

    [[nodiscard]] DensityField field() const {
        return {[this](double s, const Vec& x, double t, const Vec& y) { return value(s, x, t, y); },
                Provenance::series, "series(N=" + std::to_string(cfg_.N) + ")"};
    }

    [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
    [[nodiscard]] const SeriesConfig& config() const { return cfg_; }

private:
    double partial(int n, double s, const Vec& x, double t, const Vec& y, double step, bool outer) const {
        const int steps = std::max(4, static_cast<int>(std::ceil((t - s) / step - 1e-9)));
        const TerminalKernel kernel(spec_, t, y, s, (t - s) / steps);
        const double head = kernel.frozen(s, x);
        if (n <= 1) return head;
        SeriesConfig layer = cfg_;
        layer.flow_steps = steps;
        const int nt = outer ? cfg_.time_nodes : (cfg_.inner_time_nodes > 0 ? cfg_.inner_time_nodes : cfg_.time_nodes);
        const int nz = outer ? cfg_.space.nodes : (cfg_.inner_space_nodes > 0 ? cfg_.inner_space_nodes : cfg_.space.nodes);
        const double tail = time_space_convolve(
            spec_, [&](double r, const Vec& z) { return partial(n - 1, s, x, r, z, step, false); },
            [&](double r, const Vec& z) { return kernel.H(r, z); }, s, x, t, y, layer, nt, nz);
        return head + tail;
    }

    ProblemSpec spec_;
    SeriesConfig cfg_;
};

inline SeriesValue parametrix_series(const ProblemSpec& spec, const SeriesConfig& cfg, double s, const Vec& x,
                                     double t, const Vec& y) {
    return ParametrixSeries(spec, cfg)(s, x, t, y);
}

enum class Freezing { backward, forward };

/// Residual of the Duhamel identity for a candidate density p:
///   forward  (tau, xi) = (t, y): p - p~_1 - p (x) H
///   backward (tau, xi) = (s, x): p - p~_0 - p~_0 (x) (L - L~) p
/// with z-derivatives of p taken by finite differences in the backward case.
inline double duhamel_residual(const ProblemSpec& spec, const DensityField& density, Freezing freezing, double s,
                               const Vec& x, double t, const Vec& y, const SeriesConfig& cfg) {
    if (!(s < t)) throw ArgumentError("duhamel_residual: need s < t");
    const double step = (t - s) / cfg.flow_steps;
    const double p = density(s, x, t, y);
    if (freezing == Freezing::forward) {
        const TerminalKernel kernel(spec, t, y, s, step);
        const double conv = time_space_convolve(
            spec, [&](double r, const Vec& z) { return density(s, x, r, z); },
            [&](double r, const Vec& z) { return kernel.H(r, z); }, s, x, t, y, cfg);
        return p - kernel.frozen(s, x) - conv;
    }
    const FrozenPath path(spec, s, x, s, t, step);
    const double head = frozen_density(path.moments(s, t), x, y);
    const double conv = time_space_convolve(
        spec, [&](double r, const Vec& z) { return frozen_density(path.moments(s, r), x, z); },
        [&](double r, const Vec& z) {
            const Vec anchor = path.flow_at(r);
            const Mat A = spec.a(r, z) - spec.a(r, anchor);
            const Vec B = spec.b(r, z) - spec.b(r, anchor);
            const Mat grad = fd_derivative(density, Variable::x, 1, r, z, t, y);
            const Mat hess = fd_derivative(density, Variable::x, 2, r, z, t, y);
            return A.cwiseProduct(hess).sum() + B.dot(grad.col(0));
        },
        s, x, t, y, cfg);
    return p - head - conv;
}

}  // namespace parametrix
