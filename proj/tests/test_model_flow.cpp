#include "parametrix/gaussian.hpp"
#include "parametrix/model.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace parametrix;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

std::vector<AssumptionSample> line_samples(int d, double lo, double hi, int n) {
    std::vector<AssumptionSample> out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            AssumptionSample s;
            s.t = 0.5;
            s.x = Vec::Constant(d, lo + (hi - lo) * i / (n - 1));
            s.y = Vec::Constant(d, lo + (hi - lo) * j / (n - 1));
            s.xi = Vec::Zero(d);
            s.xi[(i + j) % d] = 1.0;
            out.push_back(s);
        }
    return out;
}

}  // namespace

TEST(Presets, Coefficients) {
    const ProblemSpec ou = presets::ou(2);
    Vec x(2);
    x << 1.0, -2.0;
    EXPECT_TRUE(ou.b(0.3, x).isApprox(x));
    EXPECT_TRUE(ou.a(0.3, x).isApprox(0.5 * Mat::Identity(2, 2)));
    ASSERT_TRUE(ou.grad_sigma.has_value());

    const ProblemSpec hd = presets::holder_drift(1, 0.5, 2.0, 0.5);
    EXPECT_NEAR(hd.b(0, v1(4.0))[0], 0.5 + 2.0 * 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(hd.beta, 0.5);

    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    EXPECT_NEAR(rs.sigma(0, v1(0.25))(0, 0), 1.25, 1e-15);
    EXPECT_NEAR(rs.sigma(0, v1(9.0))(0, 0), 1.5, 1e-15);
    EXPECT_FALSE(rs.grad_sigma.has_value());
}

TEST(Mollifier, StencilHasUnitMass) {
    for (int d = 1; d <= 2; ++d) {
        const auto& st = MollifierStencil::for_dimension(d);
        double sum = 0.0;
        for (double w : st.weights) sum += w;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Mollifier, LinearDriftIsUnchanged) {
    const ProblemSpec ou = presets::ou(1);
    for (double eps : {1.0, 0.3, 0.01}) {
        const MollifiedDrift m = mollify_drift(ou, eps);
        for (double x : {-2.0, 0.0, 0.7}) EXPECT_NEAR(m(0, v1(x))[0], x, 1e-13);
    }
}

TEST(Mollifier, ConstantDriftIsUnchanged) {
    const ProblemSpec c = presets::constant(v1(1.7), Mat::Identity(1, 1));
    const MollifiedDrift m = mollify_drift(c, 0.5);
    EXPECT_NEAR(m(0, v1(3.0))[0], 1.7, 1e-13);
}

TEST(Mollifier, SquareRootDriftDeviationBound) {
    const ProblemSpec hd = presets::holder_drift(1, 0.0, 1.0, 0.5);
    const MollifiedDrift m = mollify_drift(hd, 0.5);
    const double dev = std::abs(m(0, v1(0.0))[0] - hd.b(0, v1(0.0))[0]);
    EXPECT_GT(dev, 0.0);
    EXPECT_LE(dev, hd.kappa1 * std::sqrt(0.5));
    EXPECT_NEAR(hd.kappa1 * std::sqrt(0.5), 0.707, 5e-4);
}

TEST(Mollifier, ReportShowsDeviationAndGradientScaling) {
    const ProblemSpec hd = presets::holder_drift(1, 0.0, 1.0, 0.5);
    std::vector<Vec> pts;
    for (int i = -20; i <= 20; ++i) pts.push_back(v1(0.05 * i));
    double last_dev = std::numeric_limits<double>::infinity();
    for (double eps : {0.4, 0.1, 0.025}) {
        const MollificationReport r = check_mollification(hd, mollify_drift(hd, eps), pts);
        EXPECT_LE(r.max_deviation, r.deviation_bound);
        EXPECT_LT(r.max_deviation, last_dev);
        EXPECT_TRUE(std::isfinite(r.gradient_constant));
        last_dev = r.max_deviation;
    }
}

TEST(Mollifier, RejectsBadRadiusAndNonFiniteDrift) {
    const ProblemSpec ou = presets::ou(1);
    EXPECT_THROW(mollify_drift(ou, 0.0), ArgumentError);
    EXPECT_THROW(mollify_drift(ou, 1.5), ArgumentError);
    ProblemSpec bad = ou;
    bad.drift = [](double, const Vec& x) -> Vec { return Vec::Constant(1, std::sqrt(x[0])); };
    EXPECT_THROW(mollify_drift(bad, 0.5)(0.0, v1(0.0)), EvaluationError);
}

TEST(Assumptions, IdentityDiffusionHasUnitEllipticity) {
    const AssumptionReport r = validate_assumptions(presets::zero_drift(2), line_samples(2, -2, 2, 7));
    EXPECT_DOUBLE_EQ(r.ellipticity_ratio, 1.0);
    EXPECT_TRUE(r.ok());
}

TEST(Assumptions, LinearDriftSaturatesGrowth) {
    ProblemSpec ou = presets::ou(1);
    ou.beta = 0.3;
    const AssumptionReport r = validate_assumptions(ou, line_samples(1, -3, 3, 13));
    EXPECT_NEAR(r.drift_growth_ratio, 1.0, 1e-12);
    EXPECT_TRUE(r.ok());
}

TEST(Assumptions, RoughSigmaHolderRatio) {
    ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    rs.kappa0 = 2.0;
    const AssumptionReport r = validate_assumptions(rs, line_samples(1, -2, 2, 41));
    EXPECT_GT(r.sigma_holder_ratio, 0.0);
    EXPECT_LE(r.sigma_holder_ratio, 0.5 + 1e-12);
}

TEST(Assumptions, ViolationsCarryWitnesses) {
    ProblemSpec ou = presets::ou(1);
    ou.kappa1 = 0.5;
    const AssumptionReport r = validate_assumptions(ou, line_samples(1, -1, 1, 5));
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.violations.front().condition, "drift-growth");
    EXPECT_GT(r.violations.front().ratio, 1.0);
}

TEST(Assumptions, RefinementNeverDecreasesRatios) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    const AssumptionReport coarse = validate_assumptions(rs, line_samples(1, -2, 2, 5));
    auto fine_samples = line_samples(1, -2, 2, 5);
    const auto extra = line_samples(1, -2, 2, 17);
    fine_samples.insert(fine_samples.end(), extra.begin(), extra.end());
    const AssumptionReport fine = validate_assumptions(rs, fine_samples);
    EXPECT_GE(fine.sigma_holder_ratio, coarse.sigma_holder_ratio);
    EXPECT_GE(fine.ellipticity_ratio, coarse.ellipticity_ratio);
    EXPECT_GE(fine.drift_growth_ratio, coarse.drift_growth_ratio);
}

TEST(Assumptions, NonFiniteCoefficientsAreFlagged) {
    ProblemSpec p = presets::zero_drift(1);
    p.drift = [](double, const Vec& x) -> Vec { return Vec::Constant(1, std::sqrt(x[0])); };
    const AssumptionReport r = validate_assumptions(p, line_samples(1, -1, 1, 3));
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.violations.front().condition, "finite-coefficients");
}

TEST(Flow, LinearClosedForm) {
    const ProblemSpec ou = presets::ou(1);
    EXPECT_NEAR(solve_flow(ou.drift, 0.0, 1.0, v1(1.0), 1e-3)[0], std::exp(1.0), 1e-8);
    EXPECT_NEAR(solve_flow(ou.drift, 1.0, 0.0, v1(std::exp(1.0)), 1e-3)[0], 1.0, 1e-8);
    EXPECT_DOUBLE_EQ(solve_flow(ou.drift, 0.4, 0.4, v1(2.0))[0], 2.0);
}

TEST(Flow, TrajectoryInterpolatesAndDumps) {
    const ProblemSpec ou = presets::ou(1);
    const FlowTrajectory tr = trace_flow(ou.drift, 0.0, 1.0, v1(1.0), 100);
    EXPECT_EQ(tr.times.size(), 101u);
    EXPECT_NEAR(tr.at(0.5)[0], std::exp(0.5), 1e-8);
    EXPECT_NEAR(tr.at(0.123)[0], std::exp(0.123), 1e-7);
    std::ostringstream os;
    write_flow_csv(os, tr);
    std::istringstream is(os.str());
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    EXPECT_EQ(header, "r,theta_1");
    EXPECT_EQ(first, "0,1");
}

TEST(Flow, NonFiniteDriftReportsTime) {
    ProblemSpec p = presets::zero_drift(1);
    p.drift = [](double t, const Vec& x) -> Vec { return Vec::Constant(1, t > 0.5 ? NAN : x[0]); };
    try {
        (void)solve_flow(p.drift, 0.0, 1.0, v1(1.0), 0.01);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        SUCCEED() << e.what();
    }
}

TEST(FlowEquivalence, ZeroDriftGivesOne) {
    const ProblemSpec bm = presets::zero_drift(1);
    std::vector<FlowSample> grid;
    for (int i = 0; i < 10; ++i) grid.push_back({0.0, 0.5, v1(0.1 * i), v1(-0.2 * i)});
    EXPECT_DOUBLE_EQ(flow_equivalence_constant(bm, {1.0, 0.1, 0.01}, grid), 1.0);
}

TEST(FlowEquivalence, HolderDriftFiniteAndModerate) {
    const ProblemSpec hd = presets::holder_drift(1, 0.5, 1.0, 0.5);
    std::vector<FlowSample> grid;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) grid.push_back({0.0, 0.1 + 0.1 * i, v1(-1.0 + 0.2 * j), v1(0.5 * j - 2.0)});
    const double C = flow_equivalence_constant(hd, {1.0, 0.1, 0.01}, grid);
    EXPECT_TRUE(std::isfinite(C));
    EXPECT_GE(C, 1.0);
    std::vector<Vec> probes;
    for (int i = -100; i <= 100; ++i) probes.push_back(v1(0.05 * i));
    const double L = sampled_gradient_sup(mollify_drift(hd, 1.0).as_function(), 1, probes);
    EXPECT_LE(C, std::exp(L) * (1.0 + 2.0 * hd.kappa1));
}

TEST(FlowEquivalence, RejectsBadInput) {
    const ProblemSpec ou = presets::ou(1);
    EXPECT_THROW(flow_equivalence_constant(ou, {1.0}, {}), ArgumentError);
    EXPECT_THROW(flow_equivalence_constant(ou, {}, {{0.0, 1.0, v1(0), v1(0)}}), ArgumentError);
    EXPECT_THROW(flow_equivalence_constant(ou, {1.0}, {{0.0, 2.0, v1(0), v1(0)}}), ArgumentError);
}

TEST(FlowGaussian, Examples) {
    const ProblemSpec ou = presets::ou(1);
    EXPECT_NEAR(flow_gaussian(0.8, ou, 0.0, v1(1.0), 1.0, v1(std::exp(1.0))), 1.0, 1e-9);
    EXPECT_NEAR(flow_gaussian(1.0, ou, 0.0, v1(0.0), 1.0, v1(1.0)), 0.36788, 5e-6);
    const ProblemSpec bm = presets::zero_drift(1);
    EXPECT_DOUBLE_EQ(flow_gaussian(0.3, bm, 0.0, v1(0.4), 0.5, v1(-0.2)), g_lambda(0.3, 0.5, v1(0.6)));
}
