#pragma once

// Ground truth: closed-form Gaussian densities, Euler-Maruyama sample clouds
// with a product-kernel density estimate, and finite-difference derivatives.

#include "parametrix/core/parallel.hpp"
#include "parametrix/core/philox.hpp"
#include "parametrix/density.hpp"
#include "parametrix/gaussian.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <tuple>

namespace parametrix {

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Density of dX = k X dt + c dW in R^d: Gaussian with mean e^{k tau} x and
/// variance c^2 (e^{2 k tau} - 1) / (2k) per axis (c^2 tau when k = 0).
inline double exact_linear_density(double rate, double scale, double s, const Vec& x, double t, const Vec& y) {
    if (!(s < t)) throw ArgumentError("exact density: need s < t");
    const double tau = t - s;
    const double var = std::abs(rate) < 1e-14 ? scale * scale * tau
                                              : scale * scale * std::expm1(2.0 * rate * tau) / (2.0 * rate);
    const double d = static_cast<double>(x.size());
    const Vec u = std::exp(rate * tau) * x - y;
    return std::pow(2.0 * kPi * var, -0.5 * d) * std::exp(-0.5 * u.squaredNorm() / var);
}

/// OU transition density (b = x, sigma = I):
/// (pi (e^{2 tau} - 1))^{-d/2} exp(-|e^tau x - y|^2 / (e^{2 tau} - 1)).
inline double exact_ou_density(double s, const Vec& x, double t, const Vec& y) {
    if (!(s < t)) throw ArgumentError("exact_ou_density: need s < t");
    const double tau = t - s;
    const double v = std::expm1(2.0 * tau);
    const double d = static_cast<double>(x.size());
    const Vec u = std::exp(tau) * x - y;
    return std::pow(kPi * v, -0.5 * d) * std::exp(-u.squaredNorm() / v);
}

inline double exact_heat_density(double s, const Vec& x, double t, const Vec& y) {
    return exact_linear_density(0.0, 1.0, s, x, t, y);
}

inline DensityField exact_ou_field() {
    return {[](double s, const Vec& x, double t, const Vec& y) { return exact_ou_density(s, x, t, y); },
            Provenance::exact, "exact-ou"};
}

inline DensityField exact_linear_field(double rate, double scale) {
    return {[=](double s, const Vec& x, double t, const Vec& y) {
                return exact_linear_density(rate, scale, s, x, t, y);
            },
            Provenance::exact, "exact-linear"};
}

/// Exact density of a constant-coefficient problem.
inline DensityField exact_constant_field(const Vec& b0, const Mat& s0) {
    const ProblemSpec spec = presets::constant(b0, s0);
    return {[spec](double s, const Vec& x, double t, const Vec& y) {
                return frozen_density(frozen_moments(spec, s, x, s, t, t - s), x, y);
            },
            Provenance::exact, "exact-constant"};
}

/// Frozen Gaussian p~_1 as a density field.
inline DensityField frozen_field(const ProblemSpec& spec, int steps = 200) {
    return {[spec, steps](double s, const Vec& x, double t, const Vec& y) {
                return frozen_density(forward_frozen(spec, s, t, y, steps), x, y);
            },
            Provenance::frozen, "frozen"};
}

// ---------------------------------------------------------------------------
// Euler-Maruyama
// ---------------------------------------------------------------------------

struct SampleCloud {
    int dimension = 1;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    int n_steps = 0;
    double s = 0.0, t = 0.0;
    std::string scheme = "euler-maruyama";
    std::vector<double> points;  // n_paths x d, row-major

    [[nodiscard]] Vec point(std::size_t i) const {
        Vec v(dimension);
        for (int k = 0; k < dimension; ++k) v[k] = points[i * dimension + k];
        return v;
    }
};

/// Terminal points of n_paths Euler-Maruyama paths. Path i draws its normals
/// from the Philox stream (seed, i), so the cloud does not depend on the
/// worker count. `diffusion_override` replaces sigma (used for degenerate tests).
inline SampleCloud simulate_paths(const ProblemSpec& spec, double s, const Vec& x, double t, std::size_t n_paths,
                                  int n_steps, std::uint64_t seed,
                                  const std::optional<DiffusionFn>& diffusion_override = std::nullopt) {
    if (n_paths < 1 || n_steps < 1) throw ArgumentError("simulate_paths: n_paths and n_steps must be >= 1");
    if (!(s < t)) throw ArgumentError("simulate_paths: need s < t");
    const int d = spec.dimension;
    if (x.size() != d) throw ArgumentError("simulate_paths: start point has wrong dimension");
    SampleCloud cloud;
    cloud.dimension = d;
    cloud.n_paths = n_paths;
    cloud.seed = seed;
    cloud.n_steps = n_steps;
    cloud.s = s;
    cloud.t = t;
    cloud.points.assign(n_paths * d, 0.0);
    const DiffusionFn& sigma = diffusion_override ? *diffusion_override : spec.diffusion;
    const double h = (t - s) / n_steps;
    const double sq = std::sqrt(h);

    parallel_for(n_paths, [&](std::size_t i) {
        NormalStream normals(seed, i);
        Vec state = x;
        Vec dw(d);
        for (int k = 0; k < n_steps; ++k) {
            const double r = s + k * h;
            for (int j = 0; j < d; ++j) dw[j] = sq * normals.next();
            state += h * spec.drift(r, state) + sigma(r, state) * dw;
            if (!state.allFinite())
                throw SimulationError("simulate_paths: non-finite state at step " + std::to_string(k), i);
        }
        for (int j = 0; j < d; ++j) cloud.points[i * d + j] = state[j];
    });
    return cloud;
}

// ---------------------------------------------------------------------------
// Kernel density estimate
// ---------------------------------------------------------------------------

struct KdeEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Product Gaussian kernel estimate with per-axis bandwidth
/// multiplier * n^{-1/(d+4)} * std_k.
class KernelDensity {
public:
    explicit KernelDensity(const SampleCloud& cloud, double multiplier = 1.0) : cloud_(&cloud) {
        if (cloud.n_paths == 0) throw ArgumentError("mc_density: empty cloud");
        const int d = cloud.dimension;
        const double n = static_cast<double>(cloud.n_paths);
        bandwidth_ = Vec(d);
        for (int k = 0; k < d; ++k) {
            double mean = 0.0, m2 = 0.0;
            for (std::size_t i = 0; i < cloud.n_paths; ++i) {
                const double v = cloud.points[i * d + k];
                const double delta = v - mean;
                mean += delta / static_cast<double>(i + 1);
                m2 += delta * (v - mean);
            }
            const double sd = cloud.n_paths > 1 ? std::sqrt(m2 / (n - 1.0)) : 1.0;
            bandwidth_[k] = multiplier * std::pow(n, -1.0 / (d + 4.0)) * (sd > 0.0 ? sd : 1.0);
        }
    }

    /// Fixed bandwidth h on every axis.
    KernelDensity(const SampleCloud& cloud, const Vec& bandwidth) : cloud_(&cloud), bandwidth_(bandwidth) {
        if (cloud.n_paths == 0) throw ArgumentError("mc_density: empty cloud");
    }

    [[nodiscard]] KdeEstimate operator()(const Vec& y) const {
        const int d = cloud_->dimension;
        const std::size_t n = cloud_->n_paths;
        double norm = 1.0;
        for (int k = 0; k < d; ++k) norm *= 1.0 / (std::sqrt(2.0 * kPi) * bandwidth_[k]);
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double q = 0.0;
            for (int k = 0; k < d; ++k) {
                const double z = (y[k] - cloud_->points[i * d + k]) / bandwidth_[k];
                q += z * z;
            }
            const double kv = norm * std::exp(-0.5 * q);
            sum += kv;
            sum2 += kv * kv;
        }
        const double nn = static_cast<double>(n);
        KdeEstimate est;
        est.value = sum / nn;
        const double var = n > 1 ? std::max(0.0, (sum2 / nn - est.value * est.value) / (nn - 1.0)) : 0.0;
        est.standard_error = std::sqrt(var);
        return est;
    }

    [[nodiscard]] const Vec& bandwidth() const { return bandwidth_; }

private:
    const SampleCloud* cloud_;
    Vec bandwidth_;
};

inline double mc_density(const SampleCloud& cloud, const Vec& y, double multiplier = 1.0) {
    return KernelDensity(cloud, multiplier)(y).value;
}

/// Monte Carlo oracle as a density field. Clouds are cached per (s, x, t) and
/// every cloud uses the same seed (common random numbers), which keeps finite
/// differences in x smooth.
class MonteCarloOracle {
public:
    struct Options {
        std::size_t n_paths = 200000;
        int n_steps = 200;
        std::uint64_t seed = 1;
        double bandwidth_multiplier = 1.0;
    };

    MonteCarloOracle(ProblemSpec spec, Options opt) : spec_(std::move(spec)), opt_(opt) {}

    [[nodiscard]] KdeEstimate estimate(double s, const Vec& x, double t, const Vec& y) const {
        const Entry& e = entry(s, x, t);
        return (*e.kde)(y);
    }

    [[nodiscard]] const SampleCloud& cloud(double s, const Vec& x, double t) const { return *entry(s, x, t).cloud; }

    [[nodiscard]] DensityField field() const {
        return {[this](double s, const Vec& x, double t, const Vec& y) { return estimate(s, x, t, y).value; },
                Provenance::oracle, "oracle"};
    }

    [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
    [[nodiscard]] const Options& options() const { return opt_; }

private:
    struct Entry {
        std::unique_ptr<SampleCloud> cloud;
        std::unique_ptr<KernelDensity> kde;
    };

    const Entry& entry(double s, const Vec& x, double t) const {
        std::vector<double> key{s, t};
        for (Eigen::Index i = 0; i < x.size(); ++i) key.push_back(x[i]);
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        Entry e;
        e.cloud = std::make_unique<SampleCloud>(simulate_paths(spec_, s, x, t, opt_.n_paths, opt_.n_steps, opt_.seed));
        e.kde = std::make_unique<KernelDensity>(*e.cloud, opt_.bandwidth_multiplier);
        return cache_.emplace(key, std::move(e)).first->second;
    }

    ProblemSpec spec_;
    Options opt_;
    mutable std::mutex mutex_;
    mutable std::map<std::vector<double>, Entry> cache_;
};

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline double default_fd_step(int order, double duration) {
    return (order == 1 ? 1e-3 : 1e-2) * std::sqrt(duration);
}

namespace detail {

inline Mat fd_raw(const std::function<double(const Vec&)>& f, const Vec& p, int order, double h) {
    const int d = static_cast<int>(p.size());
    auto shift = [&](int i, double a, int j = -1, double b = 0.0) {
        Vec q = p;
        q[i] += a;
        if (j >= 0) q[j] += b;
        return f(q);
    };
    if (order == 1) {
        Mat g(d, 1);
        for (int i = 0; i < d; ++i) g(i, 0) = (shift(i, h) - shift(i, -h)) / (2.0 * h);
        return g;
    }
    Mat hess(d, d);
    const double f0 = f(p);
    for (int i = 0; i < d; ++i) {
        hess(i, i) = (shift(i, h) - 2.0 * f0 + shift(i, -h)) / (h * h);
        for (int j = i + 1; j < d; ++j) {
            const double v = (shift(i, h, j, h) - shift(i, h, j, -h) - shift(i, -h, j, h) + shift(i, -h, j, -h)) /
                             (4.0 * h * h);
            hess(i, j) = hess(j, i) = v;
        }
    }
    return hess;
}

}  // namespace detail

/// Central-difference gradient (order 1) or Hessian (order 2) of the field in
/// x or y, with one Richardson step: (4 D(h/2) - D(h)) / 3.
/// A non-positive step selects the default for the order.
inline Mat fd_derivative(const DensityField& field, Variable var, int order, double s, const Vec& x, double t,
                         const Vec& y, double step = 0.0) {
    if (order != 1 && order != 2) throw ArgumentError("fd_derivative: order must be 1 or 2");
    const double h = step > 0.0 ? step : default_fd_step(order, t - s);
    std::function<double(const Vec&)> f;
    if (var == Variable::x)
        f = [&](const Vec& p) { return field(s, p, t, y); };
    else
        f = [&](const Vec& p) { return field(s, x, t, p); };
    const Vec& p = var == Variable::x ? x : y;
    const Mat coarse = detail::fd_raw(f, p, order, h);
    const Mat fine = detail::fd_raw(f, p, order, 0.5 * h);
    return (4.0 * fine - coarse) / 3.0;
}

// ---------------------------------------------------------------------------
// PXCLOUD1 binary format
// ---------------------------------------------------------------------------

inline constexpr char kCloudMagic[8] = {'P', 'X', 'C', 'L', 'O', 'U', 'D', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    char buf[sizeof(T)];
    if (!is.read(buf, sizeof(T))) throw ArgumentError("read_cloud: truncated stream");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace detail

/// Header: magic, d (int64), n_paths (int64), seed (uint64), s, t (float64);
/// then n_paths * d float64 values.
inline void write_cloud(std::ostream& os, const SampleCloud& c) {
    os.write(kCloudMagic, 8);
    detail::put_le<std::int64_t>(os, c.dimension);
    detail::put_le<std::int64_t>(os, static_cast<std::int64_t>(c.n_paths));
    detail::put_le<std::uint64_t>(os, c.seed);
    detail::put_le<double>(os, c.s);
    detail::put_le<double>(os, c.t);
    for (double v : c.points) detail::put_le<double>(os, v);
}

inline SampleCloud read_cloud(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCloudMagic, 8) != 0)
        throw ArgumentError("read_cloud: bad magic, expected PXCLOUD1");
    SampleCloud c;
    const auto d = detail::get_le<std::int64_t>(is);
    const auto n = detail::get_le<std::int64_t>(is);
    if (d < 1 || d > kMaxDim || n < 0) throw ArgumentError("read_cloud: invalid header");
    c.dimension = static_cast<int>(d);
    c.n_paths = static_cast<std::size_t>(n);
    c.seed = detail::get_le<std::uint64_t>(is);
    c.s = detail::get_le<double>(is);
    c.t = detail::get_le<double>(is);
    c.points.resize(c.n_paths * c.dimension);
    for (double& v : c.points) v = detail::get_le<double>(is);
    return c;
}

}  // namespace parametrix
