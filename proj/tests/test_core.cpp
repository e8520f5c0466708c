#include "parametrix/core/expression.hpp"
#include "parametrix/core/parallel.hpp"
#include "parametrix/core/spatial_integral.hpp"
#include "parametrix/gaussian.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace parametrix;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(Philox, KnownAnswerZero) {
    const Philox4x32 gen(0);
    const auto out = gen({0u, 0u, 0u, 0u});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const Philox4x32 gen(0xffffffffffffffffull);
    const auto out = gen({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(NormalStream, ReproducibleAndIndependentStreams) {
    NormalStream a(7, 3), b(7, 3), c(7, 4);
    double sa = 0, sc = 0;
    for (int i = 0; i < 100; ++i) {
        const double x = a.next();
        EXPECT_EQ(x, b.next());
        sa += x;
        sc += c.next();
    }
    EXPECT_NE(sa, sc);
}

TEST(NormalStream, Moments) {
    NormalStream s(11, 0);
    const int n = 200000;
    double m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = s.next();
        m1 += x;
        m2 += x * x;
    }
    m1 /= n;
    m2 /= n;
    EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Quadrature, LegendreExactForPolynomials) {
    const auto& r = gauss_legendre(8);
    for (int p = 0; p <= 15; ++p) {
        double sum = 0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i) sum += r.weights[i] * std::pow(r.nodes[i], p);
        const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
        EXPECT_NEAR(sum, exact, 1e-13) << "degree " << p;
    }
}

TEST(Quadrature, HermiteMoments) {
    const auto& r = gauss_hermite(12);
    const double mass = std::sqrt(2.0 * kPi);
    double m0 = 0, m2 = 0, m4 = 0, m3 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        m0 += r.weights[i];
        m2 += r.weights[i] * std::pow(r.nodes[i], 2);
        m3 += r.weights[i] * std::pow(r.nodes[i], 3);
        m4 += r.weights[i] * std::pow(r.nodes[i], 4);
    }
    EXPECT_NEAR(m0 / mass, 1.0, 1e-13);
    EXPECT_NEAR(m2 / mass, 1.0, 1e-12);
    EXPECT_NEAR(m3 / mass, 0.0, 1e-12);
    EXPECT_NEAR(m4 / mass, 3.0, 1e-11);
}

TEST(Quadrature, RejectsEmptyRules) {
    EXPECT_THROW(gauss_legendre(0), ArgumentError);
    EXPECT_THROW(gauss_hermite(0), ArgumentError);
}

TEST(Parallel, ResultIndependentOfWorkerCount) {
    auto run = [](std::size_t workers) {
        set_worker_count(workers);
        std::vector<double> slot(1000);
        parallel_for(slot.size(), [&](std::size_t i) { slot[i] = std::sin(0.37 * i) / (1.0 + i); });
        set_worker_count(1);
        double acc = 0;
        for (double v : slot) acc += v;
        return acc;
    };
    const double one = run(1);
    EXPECT_EQ(one, run(3));
    EXPECT_EQ(one, run(8));
}

TEST(Parallel, PropagatesExceptions) {
    set_worker_count(4);
    EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                     if (i == 57) throw EvaluationError("boom");
                 }),
                 EvaluationError);
    set_worker_count(1);
}

TEST(Parallel, NestedRegionsRunSerially) {
    set_worker_count(4);
    std::vector<int> hits(64, 0);
    parallel_for(8, [&](std::size_t i) { parallel_for(8, [&](std::size_t j) { hits[i * 8 + j] += 1; }); });
    set_worker_count(1);
    EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 64);
}

TEST(Expression, Evaluates) {
    const Vec x = v2(2.0, -3.0);
    EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3", 2)(0.0, x), 7.0);
    EXPECT_DOUBLE_EQ(Expression::parse("-x2 + t", 2)(0.5, x), 3.5);
    EXPECT_DOUBLE_EQ(Expression::parse("abs(x2)", 2)(0.0, x), 3.0);
    EXPECT_DOUBLE_EQ(Expression::parse("pow(x1, 0.5)", 2)(0.0, x), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(Expression::parse("min(x1, x2)", 2)(0.0, x), -3.0);
    EXPECT_DOUBLE_EQ(Expression::parse("exp(0)/(1+1)", 2)(0.0, x), 0.5);
    EXPECT_DOUBLE_EQ(Expression::parse("(x1 - 1) * (x1 + 1)", 2)(0.0, x), 3.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2e-1 * 10", 1)(0.0, v1(0)), 2.0);
}

TEST(Expression, ReportsColumn) {
    try {
        (void)Expression::parse("1 + * x1", 1);
        FAIL() << "expected ExpressionError";
    } catch (const ExpressionError& e) {
        EXPECT_EQ(e.column(), 5u);
    }
    EXPECT_THROW((void)Expression::parse("x3", 2), ExpressionError);
    EXPECT_THROW((void)Expression::parse("sin(x1)", 1), ExpressionError);
    EXPECT_THROW((void)Expression::parse("(1 + 2", 1), ExpressionError);
    EXPECT_THROW((void)Expression::parse("", 1), ExpressionError);
}

TEST(SpatialIntegral, GaussianMass) {
    SpatialScheme scheme;
    const Vec c = v2(0.3, -0.2);
    const double val = integrate_with_gaussian_proposal(
        [&](const Vec& z) { return std::exp(-0.5 * (z - c).squaredNorm()) / (2.0 * kPi); }, c, 1.0, scheme);
    EXPECT_NEAR(val, 1.0, 1e-12);
}

TEST(SpatialIntegral, ImportanceSamplingAgrees) {
    SpatialScheme scheme;
    scheme.kind = SpatialScheme::Kind::importance_mc;
    scheme.samples = 50000;
    const Vec c = v1(0.0);
    const double val = integrate_with_gaussian_proposal(
        [&](const Vec& z) { return std::exp(-z.squaredNorm()) / std::sqrt(kPi); }, c, 1.0, scheme);
    EXPECT_NEAR(val, 1.0, 0.02);
}

TEST(SpatialIntegral, DetectsTooNarrowProposal) {
    SpatialScheme scheme;
    EXPECT_THROW(integrate_with_gaussian_proposal([](const Vec& z) { return std::exp(-0.5 * z.squaredNorm() / 100.0); },
                                                  v1(0.0), 0.1, scheme),
                 QuadratureError);
}

TEST(GaussianKernel, Values) {
    EXPECT_DOUBLE_EQ(g_lambda(0.7, 1.0, v2(0, 0)), 1.0);
    EXPECT_NEAR(g_lambda(0.5, 4.0, v2(2, 0)), 0.15163, 5e-6);
    EXPECT_NEAR(g_lambda(0.5, 4.0, v2(2, 0)), 0.25 * std::exp(-0.5), 1e-15);
    // t^{-d/2} g(1, x / sqrt t)
    const Vec x = v2(0.4, -1.1);
    EXPECT_NEAR(g_lambda(0.3, 2.5, x), std::pow(2.5, -1.0) * g_lambda(0.3, 1.0, Vec(x / std::sqrt(2.5))), 1e-15);
    EXPECT_THROW(g_lambda(1.0, 0.0, x), ArgumentError);
}
