#pragma once

// SDE coefficients, structural constants and spatial mollification of the drift.

#include "parametrix/core/expression.hpp"
#include "parametrix/core/quadrature.hpp"
#include "parametrix/core/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace parametrix {

using DriftFn = std::function<Vec(double, const Vec&)>;
using DiffusionFn = std::function<Mat(double, const Vec&)>;
/// Spatial derivative of the diffusion matrix: entry k is d sigma / d x_k.
using DiffusionGradFn = std::function<std::vector<Mat>(double, const Vec&)>;

/// Coefficients of dX = b(t,X) dt + sigma(t,X) dW together with the constants
/// (T, alpha, beta, kappa0, kappa1, d) that the two-sided bounds depend on.
struct ProblemSpec {
    std::string name = "custom";
    int dimension = 1;
    double horizon = 1.0;
    DriftFn drift;
    DiffusionFn diffusion;
    double kappa0 = 1.0;  // ellipticity
    double alpha = 1.0;   // Hoelder exponent of sigma
    double kappa1 = 1.0;  // drift growth
    double beta = 1.0;    // Hoelder exponent of the drift
    std::optional<DiffusionGradFn> grad_sigma;
    double kappa2 = 0.0;

    [[nodiscard]] Vec b(double t, const Vec& x) const { return drift(t, x); }
    [[nodiscard]] Mat sigma(double t, const Vec& x) const { return diffusion(t, x); }

    /// sigma sigma^T, the covariance rate of the martingale part.
    [[nodiscard]] Mat covariance_rate(double t, const Vec& x) const {
        const Mat s = diffusion(t, x);
        return s * s.transpose();
    }

    /// a = sigma sigma^T / 2, the second-order coefficient of the generator.
    [[nodiscard]] Mat a(double t, const Vec& x) const { return 0.5 * covariance_rate(t, x); }
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace presets {

inline Mat identity(int d) { return Mat::Identity(d, d); }

/// b(t,x) = rate * x, sigma = scale * I. rate = scale = 1 is the OU process.
inline ProblemSpec linear(int d, double rate = 1.0, double scale = 1.0) {
    ProblemSpec p;
    p.name = "linear";
    p.dimension = d;
    p.drift = [rate](double, const Vec& x) -> Vec { return rate * x; };
    p.diffusion = [scale, d](double, const Vec&) -> Mat { return scale * identity(d); };
    p.kappa0 = std::max(scale * scale, 1.0 / (scale * scale));
    p.alpha = 1.0;
    p.kappa1 = std::max(std::abs(rate), 1e-12);
    p.beta = 1.0;
    p.grad_sigma = [d](double, const Vec&) { return std::vector<Mat>(d, Mat::Zero(d, d)); };
    p.kappa2 = 0.0;
    return p;
}

inline ProblemSpec ou(int d) {
    ProblemSpec p = linear(d, 1.0, 1.0);
    p.name = "ou";
    return p;
}

/// Constant coefficients b = b0, sigma = s0.
inline ProblemSpec constant(const Vec& b0, const Mat& s0) {
    ProblemSpec p;
    p.name = "constant";
    p.dimension = static_cast<int>(b0.size());
    p.drift = [b0](double, const Vec&) -> Vec { return b0; };
    p.diffusion = [s0](double, const Vec&) -> Mat { return s0; };
    const Mat cov = s0 * s0.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    p.kappa0 = std::max({1.0, hi, 1.0 / lo});
    p.alpha = 1.0;
    p.kappa1 = std::max(b0.norm(), 1e-12);
    p.beta = 1.0;
    const int d = p.dimension;
    p.grad_sigma = [d](double, const Vec&) { return std::vector<Mat>(d, Mat::Zero(d, d)); };
    return p;
}

inline ProblemSpec zero_drift(int d) {
    ProblemSpec p = constant(Vec::Zero(d), identity(d));
    p.name = "zero-drift";
    return p;
}

/// b(t,x)_i = c1 + c2 |x|^beta for every component i, sigma = I.
inline ProblemSpec holder_drift(int d, double c1, double c2, double beta) {
    ProblemSpec p;
    p.name = "holder-drift";
    p.dimension = d;
    p.drift = [=](double, const Vec& x) -> Vec {
        return Vec::Constant(d, c1 + c2 * std::pow(x.norm(), beta));
    };
    p.diffusion = [d](double, const Vec&) -> Mat { return identity(d); };
    p.kappa0 = 1.0;
    p.alpha = 1.0;
    p.kappa1 = std::sqrt(static_cast<double>(d)) * std::max({std::abs(c1), std::abs(c2), 1e-12});
    p.beta = beta;
    p.grad_sigma = [d](double, const Vec&) { return std::vector<Mat>(d, Mat::Zero(d, d)); };
    return p;
}

/// b = 0, sigma(x) = (1 + gamma min(|x|^alpha, 1)) I. No gradient of sigma is
/// attached: it is unbounded at the origin for alpha < 1.
inline ProblemSpec rough_sigma(int d, double gamma, double alpha) {
    ProblemSpec p;
    p.name = "rough-sigma";
    p.dimension = d;
    p.drift = [d](double, const Vec&) -> Vec { return Vec::Zero(d); };
    p.diffusion = [=](double, const Vec& x) -> Mat {
        return (1.0 + gamma * std::min(std::pow(x.norm(), alpha), 1.0)) * identity(d);
    };
    p.kappa0 = (1.0 + std::abs(gamma)) * (1.0 + std::abs(gamma));
    p.alpha = alpha;
    p.kappa1 = 1e-12;
    p.beta = 1.0;
    return p;
}

}  // namespace presets

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

/// Number of Gauss-Legendre nodes per axis used for the convolution with the bump.
inline constexpr int kMollifierNodes = 16;

/// Discrete stencil of the unit-mass bump exp(-1/(1-|u|^2)) on the unit ball.
struct MollifierStencil {
    std::vector<Vec> offsets;    // points u in the open unit ball
    std::vector<double> weights; // rho(u) * quadrature weight, summing to one
    double normalization = 0.0;  // integral of the unnormalized bump

    static const MollifierStencil& for_dimension(int d) {
        static std::mutex mutex;
        static std::map<int, std::unique_ptr<MollifierStencil>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[d];
        if (!slot) slot = std::make_unique<MollifierStencil>(build(d));
        return *slot;
    }

    static double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

private:
    static MollifierStencil build(int d) {
        MollifierStencil st;
        for_each_tensor_node(gauss_legendre(kMollifierNodes), d, [&](const Vec& u, double w) {
            const double rho = bump(u.squaredNorm());
            if (rho <= 0.0) return;
            st.offsets.push_back(u);
            st.weights.push_back(w * rho);
            st.normalization += w * rho;
        });
        for (double& w : st.weights) w /= st.normalization;
        return st;
    }
};

/// b_eps(t,x) = int b(t, x - eps u) rho(u) du, realized with the fixed stencil.
class MollifiedDrift {
public:
    MollifiedDrift(DriftFn base, int dimension, double epsilon)
        : base_(std::move(base)), dimension_(dimension), epsilon_(epsilon),
          stencil_(&MollifierStencil::for_dimension(dimension)) {
        if (!(epsilon > 0.0 && epsilon <= 1.0))
            throw ArgumentError("mollify_drift: epsilon must lie in (0, 1], got " + std::to_string(epsilon));
    }

    [[nodiscard]] Vec operator()(double t, const Vec& x) const {
        Vec acc = Vec::Zero(dimension_);
        for (std::size_t i = 0; i < stencil_->offsets.size(); ++i) {
            const Vec z = x - epsilon_ * stencil_->offsets[i];
            const Vec v = base_(t, z);
            if (!v.allFinite())
                throw EvaluationError("mollify_drift: non-finite drift at " + format_point(t, z));
            acc += stencil_->weights[i] * v;
        }
        return acc;
    }

    [[nodiscard]] double epsilon() const { return epsilon_; }
    [[nodiscard]] int dimension() const { return dimension_; }
    [[nodiscard]] const MollifierStencil& stencil() const { return *stencil_; }

    [[nodiscard]] DriftFn as_function() const {
        auto self = std::make_shared<MollifiedDrift>(*this);
        return [self](double t, const Vec& x) { return (*self)(t, x); };
    }

private:
    DriftFn base_;
    int dimension_;
    double epsilon_;
    const MollifierStencil* stencil_;
};

inline MollifiedDrift mollify_drift(const ProblemSpec& spec, double epsilon) {
    return MollifiedDrift(spec.drift, spec.dimension, epsilon);
}

/// Same problem with the drift replaced by its mollification b_eps.
inline ProblemSpec mollified(const ProblemSpec& spec, double epsilon) {
    ProblemSpec out = spec;
    out.drift = mollify_drift(spec, epsilon).as_function();
    out.name = spec.name + "@eps=" + std::to_string(epsilon);
    return out;
}

/// Sampled sup of |b_eps - b| and of |grad b_eps| (central differences) over
/// the given points at time t. The gradient constant is reported as
/// c = sup|grad b_eps| / eps^(beta - 1).
struct MollificationReport {
    double max_deviation = 0.0;
    double deviation_bound = 0.0;  // kappa1 eps^beta
    double max_gradient = 0.0;
    double gradient_constant = 0.0;
};

inline MollificationReport check_mollification(const ProblemSpec& spec, const MollifiedDrift& moll,
                                               const std::vector<Vec>& points, double t = 0.0) {
    MollificationReport rep;
    const double eps = moll.epsilon();
    rep.deviation_bound = spec.kappa1 * std::pow(eps, spec.beta);
    const double h = 1e-4 * eps;
    const int d = spec.dimension;
    for (const Vec& x : points) {
        rep.max_deviation = std::max(rep.max_deviation, (moll(t, x) - spec.b(t, x)).norm());
        Mat jac(d, d);
        for (int k = 0; k < d; ++k) {
            Vec e = Vec::Zero(d);
            e[k] = h;
            jac.col(k) = (moll(t, x + e) - moll(t, x - e)) / (2.0 * h);
        }
        rep.max_gradient = std::max(rep.max_gradient, jac.operatorNorm());
    }
    rep.gradient_constant = rep.max_gradient / std::pow(eps, spec.beta - 1.0);
    return rep;
}

// ---------------------------------------------------------------------------
// Assumption validation (sampling based)
// ---------------------------------------------------------------------------

struct AssumptionSample {
    double t = 0.0;
    Vec x, y, xi;
};

struct AssumptionViolation {
    std::string condition;
    double ratio = 0.0;
    AssumptionSample witness;
};

/// Worst-case ratios over the samples, each normalized so that a value above
/// one is a violation of the corresponding condition.
struct AssumptionReport {
    double ellipticity_ratio = 0.0;   // max(<a xi,xi>/(k0|xi|^2), |xi|^2/(k0 <a xi,xi>))
    double sigma_holder_ratio = 0.0;  // |sigma(x)-sigma(y)| / (k0 |x-y|^alpha)
    double drift_origin_ratio = 0.0;  // |b(t,0)| / k1
    double drift_growth_ratio = 0.0;  // |b(x)-b(y)| / (k1 max(|x-y|^beta, |x-y|))
    std::vector<AssumptionViolation> violations;

    [[nodiscard]] bool ok() const { return violations.empty(); }
};

inline AssumptionReport validate_assumptions(const ProblemSpec& spec, const std::vector<AssumptionSample>& grid) {
    AssumptionReport rep;
    const int d = spec.dimension;
    auto flag = [&](const char* cond, double ratio, const AssumptionSample& s) {
        if (ratio > 1.0 + 1e-12) rep.violations.push_back({cond, ratio, s});
    };
    for (const auto& smp : grid) {
        bool finite = true;
        for (const Vec* p : {&smp.x, &smp.y})
            finite = finite && spec.b(smp.t, *p).allFinite() && spec.sigma(smp.t, *p).allFinite();
        if (!finite) {
            rep.violations.push_back({"finite-coefficients", std::numeric_limits<double>::infinity(), smp});
            continue;
        }
        const Mat cov = spec.covariance_rate(smp.t, smp.x);
        const double q = smp.xi.dot(cov * smp.xi);
        const double n2 = smp.xi.squaredNorm();
        if (n2 > 0.0) {
            const double upper = q / (spec.kappa0 * n2);
            const double lower = q > 0.0 ? n2 / (spec.kappa0 * q) : std::numeric_limits<double>::infinity();
            const double r = std::max(upper, lower);
            rep.ellipticity_ratio = std::max(rep.ellipticity_ratio, r);
            flag("ellipticity", r, smp);
        }
        const double dist = (smp.x - smp.y).norm();
        if (dist > 0.0) {
            const Mat ds = spec.sigma(smp.t, smp.x) - spec.sigma(smp.t, smp.y);
            const double r = ds.operatorNorm() / (spec.kappa0 * std::pow(dist, spec.alpha));
            rep.sigma_holder_ratio = std::max(rep.sigma_holder_ratio, r);
            flag("sigma-hoelder", r, smp);

            const double db = (spec.b(smp.t, smp.x) - spec.b(smp.t, smp.y)).norm();
            const double rg = db / (spec.kappa1 * std::max(std::pow(dist, spec.beta), dist));
            rep.drift_growth_ratio = std::max(rep.drift_growth_ratio, rg);
            flag("drift-growth", rg, smp);
        }
        const double r0 = spec.b(smp.t, Vec::Zero(d)).norm() / spec.kappa1;
        rep.drift_origin_ratio = std::max(rep.drift_origin_ratio, r0);
        flag("drift-origin", r0, smp);
    }
    return rep;
}

}  // namespace parametrix
