#include "parametrix/parametrix.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace parametrix;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(ExactDensity, OuValue) {
    // the quoted 0.22313 is rounded low; the closed form gives 0.223206
    EXPECT_NEAR(exact_ou_density(0.0, v1(0.0), 1.0, v1(0.0)), 0.22313, 1e-4);
    EXPECT_NEAR(exact_ou_density(0.0, v1(0.0), 1.0, v1(0.0)), 1.0 / std::sqrt(kPi * std::expm1(2.0)), 1e-15);
    EXPECT_NEAR(exact_linear_density(1.0, 1.0, 0.0, v1(0.3), 0.7, v1(-0.1)),
                exact_ou_density(0.0, v1(0.3), 0.7, v1(-0.1)), 1e-15);
}

TEST(ExactDensity, OuNormalizes) {
    double sum = 0.0;
    const double h = 0.01;
    for (int i = -1000; i <= 1000; ++i) sum += h * exact_ou_density(0.0, v1(0.5), 0.6, v1(i * h));
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(ExactDensity, ShortTimeLimit) {
    const double tau = 1e-6;
    EXPECT_NEAR(exact_ou_density(0.0, v1(0.2), tau, v1(0.2)) * std::sqrt(2.0 * kPi * tau), 1.0, 1e-4);
}

TEST(ExactDensity, SymmetricGradientsVanish) {
    EXPECT_NEAR(fd_derivative(exact_ou_field(), Variable::x, 1, 0.0, v1(0.0), 1.0, v1(0.0))(0, 0), 0.0, 1e-12);
    const DensityField heat{exact_heat_density, Provenance::exact, "heat"};
    EXPECT_NEAR(fd_derivative(heat, Variable::y, 1, 0.0, v1(0.4), 1.0, v1(0.4))(0, 0), 0.0, 1e-12);
}

TEST(FrozenGaussian, ConstantCoefficientMoments) {
    Mat s0(2, 2);
    s0 << 1.0, 0.2, 0.0, 0.8;
    const ProblemSpec c = presets::constant(v2(0.5, -1.0), s0);
    const FrozenGaussian fz = frozen_moments(c, 0.0, v2(0, 0), 0.0, 2.0);
    EXPECT_TRUE(fz.mean.isApprox(v2(1.0, -2.0), 1e-12));
    EXPECT_TRUE(fz.cov.isApprox(2.0 * s0 * s0.transpose(), 1e-12));
    // peak value at y = x + b0 (t - s)
    const double peak = 1.0 / std::sqrt(std::pow(2.0 * kPi, 2) * fz.cov.determinant());
    EXPECT_NEAR(frozen_density(fz, v2(0.1, 0.1), v2(1.1, -1.9)), peak, 1e-12);
}

TEST(FrozenGaussian, OuFrozenAtStart) {
    const ProblemSpec ou = presets::ou(1);
    const FrozenGaussian fz = frozen_moments(ou, 0.0, v1(2.0), 0.0, 1.0);
    EXPECT_NEAR(fz.mean[0], 2.0 * (std::exp(1.0) - 1.0), 1e-9);
    EXPECT_NEAR(fz.cov(0, 0), 1.0, 1e-12);
}

TEST(FrozenGaussian, StandardNormalValue) {
    const FrozenGaussian fz = frozen_moments(presets::zero_drift(1), 0.0, v1(0.0), 0.0, 1.0);
    EXPECT_NEAR(frozen_density(fz, v1(0.0), v1(1.0)), 0.24197, 5e-6);
}

TEST(FrozenGaussian, Normalizes) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    const FrozenGaussian fz = forward_frozen(rs, 0.0, 0.5, v1(0.3), 200);
    SpatialScheme scheme;
    const double mass = integrate_with_gaussian_proposal([&](const Vec& x) { return frozen_density(fz, x, v1(0.3)); },
                                                         v1(0.3), std::sqrt(fz.cov(0, 0)), scheme);
    EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(FrozenGaussian, SingularCovarianceThrows) {
    ProblemSpec p = presets::zero_drift(1);
    p.diffusion = [](double, const Vec&) -> Mat { return Mat::Zero(1, 1); };
    EXPECT_THROW(frozen_moments(p, 0.0, v1(0.0), 0.0, 1.0), DegeneracyError);
}

TEST(FrozenGaussian, AnalyticDerivativesMatchFiniteDifferences) {
    const ProblemSpec hd = presets::holder_drift(2, 0.3, 1.0, 0.5);
    const FrozenGaussian fz = forward_frozen(hd, 0.0, 0.4, v2(0.2, -0.5), 400);
    const DensityField frozen{[&](double, const Vec& x, double, const Vec& y) { return frozen_density(fz, x, y); },
                              Provenance::frozen, "frozen"};
    const Vec x = v2(-0.3, 0.1), y = v2(0.2, -0.5);
    for (Variable var : {Variable::x, Variable::y}) {
        const Mat g = frozen_derivative(fz, x, y, 1, var);
        const Mat gfd = fd_derivative(frozen, var, 1, 0.0, x, 0.4, y);
        EXPECT_LE((g - gfd).cwiseAbs().maxCoeff(), 1e-5);
    }
    const Mat h = frozen_derivative(fz, x, y, 2, Variable::x);
    const Mat hfd = fd_derivative(frozen, Variable::x, 2, 0.0, x, 0.4, y);
    EXPECT_LE((h - hfd).cwiseAbs().maxCoeff(), 1e-3);
    // grad_x = -grad_y, hess_x = hess_y
    EXPECT_TRUE(frozen_derivative(fz, x, y, 1, Variable::x).isApprox(-frozen_derivative(fz, x, y, 1, Variable::y)));
}

TEST(Kernel, VanishesForConstantCoefficients) {
    const ProblemSpec c = presets::constant(v1(0.7), Mat::Constant(1, 1, 1.3));
    for (double x : {-1.0, 0.0, 2.0}) EXPECT_EQ(kernel_H(c, 0.0, v1(x), 0.5, v1(0.3)), 0.0);
}

TEST(Kernel, VanishesAtFreezingPoint) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    const TerminalKernel k(rs, 1.0, v1(0.4), 0.0, 0.005);
    EXPECT_EQ(k.H(0.3, k.backward_flow(0.3)), 0.0);
    EXPECT_NE(k.H(0.3, v1(0.1)), 0.0);
}

TEST(Convolution, ZeroIntegrand) {
    const ProblemSpec ou = presets::ou(1);
    const double v = time_space_convolve(
        ou, [](double, const Vec&) { return 0.0; }, [](double, const Vec&) { return 1.0; }, 0.0, v1(0.0), 1.0,
        v1(0.0), SeriesConfig{});
    EXPECT_EQ(v, 0.0);
}

TEST(Truncation, SmallestAdmissibleN) {
    EXPECT_EQ(choose_truncation(1, 1.0), 4);
    EXPECT_EQ(choose_truncation(1, 0.5), 7);
    EXPECT_EQ(choose_truncation(2, 1.0), 5);
    EXPECT_THROW(choose_truncation(1, 0.0), ArgumentError);
}

TEST(Series, ConstantCoefficientsAreExact) {
    const ProblemSpec c = presets::constant(v1(0.5), Mat::Constant(1, 1, 1.2));
    for (int N : {0, 1, 2, 3}) {
        SeriesConfig cfg;
        cfg.N = N;
        cfg.time_nodes = 8;
        const ParametrixSeries series(c, cfg);
        for (double y : {-1.0, 0.4, 2.0}) {
            const double exact = std::exp(-0.5 * std::pow(y - 0.1 - 0.5 * 0.8, 2) / (1.44 * 0.8)) /
                                 std::sqrt(2.0 * kPi * 1.44 * 0.8);
            EXPECT_NEAR(series.value(0.0, v1(0.1), 0.8, v1(y)), exact, 1e-8) << "N=" << N;
        }
    }
}

TEST(Series, OuTwoTermsNearExact) {
    SeriesConfig cfg;
    cfg.N = 2;
    const ParametrixSeries series(presets::ou(1), cfg);
    const SeriesValue v = series(0.0, v1(0.0), 0.25, v1(0.0));
    const double exact = exact_ou_density(0.0, v1(0.0), 0.25, v1(0.0));
    EXPECT_NEAR(v.value / exact, 1.0, 0.05);
    EXPECT_EQ(v.N, 2);
    EXPECT_NEAR(v.remainder_order, 1.0, 1e-15);
}

TEST(Series, RejectsBadArguments) {
    const ParametrixSeries series(presets::ou(1), SeriesConfig{});
    EXPECT_THROW((void)series(0.5, v1(0), 0.5, v1(0)), ArgumentError);
    EXPECT_THROW((void)series(0.0, v1(0), 1.5, v1(0)), ArgumentError);
    SeriesConfig bad;
    bad.N = -1;
    EXPECT_THROW(ParametrixSeries(presets::ou(1), bad), ArgumentError);
}

TEST(Duhamel, OuForwardResidualIsSmall) {
    SeriesConfig cfg;
    const double p = exact_ou_density(0.0, v1(0.0), 0.5, v1(0.0));
    const double r = duhamel_residual(presets::ou(1), exact_ou_field(), Freezing::forward, 0.0, v1(0.0), 0.5, v1(0.0), cfg);
    EXPECT_LE(std::abs(r), 1e-2 * p);
}

TEST(Duhamel, ConstantCoefficientResidualVanishes) {
    const ProblemSpec c = presets::constant(v1(0.3), Mat::Identity(1, 1));
    const DensityField exact = exact_constant_field(v1(0.3), Mat::Identity(1, 1));
    SeriesConfig cfg;
    for (Freezing f : {Freezing::forward, Freezing::backward})
        EXPECT_NEAR(duhamel_residual(c, exact, f, 0.0, v1(0.2), 0.6, v1(0.5), cfg), 0.0, 1e-8);
}

TEST(Simulation, BrownianMoments) {
    const std::size_t n = 20000;
    const SampleCloud c = simulate_paths(presets::zero_drift(2), 0.0, v2(0, 0), 1.0, n, 20, 42);
    Vec mean = Vec::Zero(2);
    Mat cov = Mat::Zero(2, 2);
    for (std::size_t i = 0; i < n; ++i) mean += c.point(i);
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec d = c.point(i) - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    const double band = 3.0 / std::sqrt(static_cast<double>(n));
    EXPECT_LE(mean.cwiseAbs().maxCoeff(), band);
    EXPECT_LE((cov - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 3.0 * std::sqrt(2.0) * band);
}

TEST(Simulation, OuVariance) {
    const std::size_t n = 100000;
    const SampleCloud c = simulate_paths(presets::ou(1), 0.0, v1(0.0), 1.0, n, 200, 7);
    double m1 = 0, m2 = 0, m4 = 0;
    for (std::size_t i = 0; i < n; ++i) m1 += c.points[i];
    m1 /= n;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = c.points[i] - m1;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n - 1.0;
    m4 /= n;
    const double se = std::sqrt((m4 - m2 * m2) / n);
    const double target = std::expm1(2.0) / 2.0;
    EXPECT_NEAR(target, 3.1945, 5e-5);
    // Euler bias at 200 steps is about 1% of the variance; allow it on top of 3 standard errors.
    EXPECT_NEAR(m2, target, 3.0 * se + 0.02 * target);
}

TEST(Simulation, DegenerateDiffusionFollowsFlow) {
    const DiffusionFn zero = [](double, const Vec&) -> Mat { return Mat::Zero(1, 1); };
    for (int steps : {50, 100}) {
        const SampleCloud c = simulate_paths(presets::ou(1), 0.0, v1(1.0), 1.0, 4, steps, 1, zero);
        for (std::size_t i = 0; i < 4; ++i)
            EXPECT_NEAR(c.points[i], std::exp(1.0), 2.0 * std::exp(1.0) / steps);
    }
}

TEST(Simulation, IndependentOfWorkerCount) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    const SampleCloud a = simulate_paths(rs, 0.0, v1(0.2), 1.0, 3000, 30, 9);
    set_worker_count(4);
    const SampleCloud b = simulate_paths(rs, 0.0, v1(0.2), 1.0, 3000, 30, 9);
    set_worker_count(1);
    EXPECT_EQ(a.points, b.points);
}

TEST(Simulation, RejectsBadInput) {
    const ProblemSpec ou = presets::ou(1);
    EXPECT_THROW(simulate_paths(ou, 0.0, v1(0), 1.0, 0, 10, 1), ArgumentError);
    EXPECT_THROW(simulate_paths(ou, 1.0, v1(0), 1.0, 10, 10, 1), ArgumentError);
    EXPECT_THROW(simulate_paths(ou, 0.0, v2(0, 0), 1.0, 10, 10, 1), ArgumentError);
    ProblemSpec blow = ou;
    blow.drift = [](double, const Vec& x) -> Vec { return (x.array().square() * 1e3).matrix(); };
    EXPECT_THROW(simulate_paths(blow, 0.0, v1(5.0), 1.0, 2, 10, 1), SimulationError);
}

TEST(Kde, SinglePoint) {
    SampleCloud c;
    c.dimension = 2;
    c.n_paths = 1;
    c.points = {0.3, -0.2};
    const double h = 0.25;
    const KernelDensity kde(c, Vec::Constant(2, h));
    EXPECT_NEAR(kde(v2(0.3, -0.2)).value, 1.0 / (2.0 * kPi * h * h), 1e-12);
}

TEST(Kde, BandwidthShrinksWithPaths) {
    const ProblemSpec bm = presets::zero_drift(1);
    const SampleCloud small = simulate_paths(bm, 0.0, v1(0.0), 1.0, 1000, 4, 1);
    const SampleCloud large = simulate_paths(bm, 0.0, v1(0.0), 1.0, 32000, 4, 1);
    const double ratio = KernelDensity(small).bandwidth()[0] / KernelDensity(large).bandwidth()[0];
    EXPECT_NEAR(ratio, 2.0, 0.1);  // 32^{1/5}
}

TEST(Kde, RejectsEmptyCloud) {
    SampleCloud c;
    EXPECT_THROW(KernelDensity{c}, ArgumentError);
}

TEST(Oracle, MatchesOuAndCachesClouds) {
    MonteCarloOracle::Options o;
    o.n_paths = 100000;
    o.n_steps = 100;
    const MonteCarloOracle oracle(presets::ou(1), o);
    const KdeEstimate e = oracle.estimate(0.0, v1(0.0), 0.5, v1(0.0));
    const double exact = exact_ou_density(0.0, v1(0.0), 0.5, v1(0.0));
    EXPECT_NEAR(e.value, exact, 0.03 * exact);
    const SampleCloud* first = &oracle.cloud(0.0, v1(0.0), 0.5);
    EXPECT_EQ(first, &oracle.cloud(0.0, v1(0.0), 0.5));
}

TEST(CloudFormat, RoundTrip) {
    const SampleCloud c = simulate_paths(presets::ou(2), 0.0, v2(0.1, 0.2), 0.7, 50, 10, 123);
    std::stringstream buf;
    write_cloud(buf, c);
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 8), "PXCLOUD1");
    EXPECT_EQ(bytes.size(), 8u + 8 * 5 + 50 * 2 * 8);
    const SampleCloud r = read_cloud(buf);
    EXPECT_EQ(r.dimension, 2);
    EXPECT_EQ(r.n_paths, 50u);
    EXPECT_EQ(r.seed, 123u);
    EXPECT_EQ(r.s, 0.0);
    EXPECT_EQ(r.t, 0.7);
    EXPECT_EQ(r.points, c.points);
}

TEST(CloudFormat, RejectsBadMagic) {
    std::stringstream buf("NOTACLOUD and more bytes here................................");
    EXPECT_THROW(read_cloud(buf), ArgumentError);
}
