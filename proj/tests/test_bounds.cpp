#include "parametrix/bounds.hpp"

#include <gtest/gtest.h>

using namespace parametrix;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

GridSpec one_d_grid(std::vector<double> durations, double start = 0.0, int points = 13) {
    GridSpec gs;
    gs.durations = std::move(durations);
    gs.starts = {v1(start)};
    gs.points = points;
    return gs;
}

const DensityField& heat() {
    static const DensityField f{exact_heat_density, Provenance::exact, "heat"};
    return f;
}

}  // namespace

TEST(Ladder, Dyadic) {
    const auto l = dyadic_ladder(4);
    ASSERT_EQ(l.size(), 4u);
    EXPECT_EQ(l[0], 1.0);
    EXPECT_EQ(l[3], 0.125);
}

TEST(Grid, NestedLevelsAndBoundaryFlags) {
    const FlowEnvelope env(presets::ou(1));
    const GridSpec gs = one_d_grid({0.5, 1.0}, 1.0, 5);
    const auto coarse = parabolic_grid(env, gs, 0);
    const auto fine = parabolic_grid(env, gs, 1);
    EXPECT_EQ(coarse.size(), 10u);
    EXPECT_EQ(fine.size(), 18u);
    EXPECT_TRUE(coarse.front().boundary);
    EXPECT_FALSE(coarse[2].boundary);
    EXPECT_NEAR(coarse[2].y[0], std::exp(0.5), 1e-9);  // centre node sits on the flow
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(coarse[i].y[0], fine[2 * i].y[0], 1e-14);
    EXPECT_THROW(parabolic_grid(env, one_d_grid({}), 0), ArgumentError);
}

TEST(TwoSided, HeatPassesNearQuarter) {
    const FlowEnvelope env(presets::zero_drift(1));
    const GridSpec gs = one_d_grid({0.25, 0.5, 1.0});
    const TwoSidedFit fit = fit_two_sided(heat(), parabolic_grid(env, gs, 0), parabolic_grid(env, gs, 1));
    EXPECT_TRUE(fit.pass());
    EXPECT_EQ(fit.upper.lambda, 0.25);
    EXPECT_NEAR(fit.upper.C, 1.0 / std::sqrt(2.0 * kPi), 1e-12);
    EXPECT_NEAR(fit.lower.C, std::sqrt(2.0 * kPi), 1e-12);
    EXPECT_NEAR(fit.upper.stability, 1.0, 1e-12);
}

TEST(TwoSided, OuFlowlessInflation) {
    const ProblemSpec ou = presets::ou(1);
    const FlowEnvelope env(ou);
    const GridSpec gs = one_d_grid({1.0}, 3.0);
    const auto coarse = parabolic_grid(env, gs, 0), fine = parabolic_grid(env, gs, 1);
    const TwoSidedFit fit = fit_two_sided(exact_ou_field(), coarse, fine);
    ASSERT_TRUE(fit.upper.pass());
    const double naive = upper_constant(exact_ou_field(), flowless(fine), fit.upper.lambda).C;
    EXPECT_GE(naive / fit.upper.C, 10.0);
}

TEST(TwoSided, UpperConstantAtFixedLambda) {
    const FlowEnvelope env(presets::zero_drift(1));
    const auto grid = parabolic_grid(env, one_d_grid({0.5}), 0);
    EXPECT_NEAR(upper_constant(heat(), grid, 0.5).C, 1.0 / std::sqrt(2.0 * kPi), 1e-12);
}

TEST(Regression, LogLogSlope) {
    EXPECT_NEAR(loglog_slope({0.1, 0.2, 0.4}, {10.0, 5.0, 2.5}), -1.0, 1e-12);
    EXPECT_THROW(loglog_slope({0.1}, {1.0}), ArgumentError);
    EXPECT_THROW(loglog_slope({0.1, 0.2}, {1.0, 0.0}), ArgumentError);
}

TEST(Derivatives, HeatExponents) {
    const ProblemSpec bm = presets::zero_drift(1);
    const FlowEnvelope env(bm);
    const GridSpec gs = one_d_grid({0.05, 0.1, 0.2, 0.4});
    const auto fits = fit_derivative_envelopes(bm, exact_linear_derivatives(0.0, 1.0), parabolic_grid(env, gs, 0),
                                               parabolic_grid(env, gs, 1),
                                               {Target::grad_x, Target::hess_x, Target::grad_y});
    EXPECT_NEAR(*fits.at(Target::grad_x).time_exponent, -0.5, 1e-9);
    EXPECT_NEAR(*fits.at(Target::grad_y).time_exponent, -0.5, 1e-9);
    EXPECT_NEAR(*fits.at(Target::hess_x).time_exponent, -1.0, 1e-9);
    for (const auto& [tg, f] : fits) EXPECT_TRUE(f.pass()) << to_string(tg);
}

TEST(Derivatives, OuExactMatchesFiniteDifferences) {
    const DerivativeFn exact = exact_linear_derivatives(1.0, 1.0);
    const DerivativeFn fd = fd_derivatives(exact_ou_field());
    const Vec x = v1(0.3), y = v1(1.1);
    for (Target tg : {Target::grad_x, Target::hess_x, Target::grad_y}) {
        const double a = exact(tg, 0.0, x, 0.5, y)(0, 0), b = fd(tg, 0.0, x, 0.5, y)(0, 0);
        EXPECT_NEAR(a, b, 1e-4 * std::max(1.0, std::abs(a))) << to_string(tg);
    }
}

TEST(Derivatives, Preconditions) {
    const ProblemSpec hd = presets::holder_drift(1, 0.0, 1.0, 0.0);
    const FlowEnvelope env(hd);
    const auto grid = parabolic_grid(env, one_d_grid({0.5, 1.0}), 0);
    EXPECT_THROW(fit_derivative_envelopes(hd, frozen_derivatives(hd), grid, grid, {Target::hess_x}), ArgumentError);
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    EXPECT_THROW(fit_derivative_envelopes(rs, frozen_derivatives(rs), grid, grid, {Target::grad_y}), ArgumentError);
    FitOptions loose;
    loose.require_grad_sigma = false;
    EXPECT_NO_THROW(fit_derivative_envelopes(rs, frozen_derivatives(rs), grid, grid, {Target::grad_y}, loose));
}

TEST(Kernel, RoughSigmaExponent) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 1.0);
    const FlowEnvelope env(rs);
    const GridSpec gs = one_d_grid({0.01, 0.02, 0.04, 0.08});
    FitOptions opt;
    opt.exponent_tolerance = 0.25;
    const EnvelopeFit fit = fit_kernel_envelope(rs, parabolic_grid(env, gs, 0), parabolic_grid(env, gs, 1), opt);
    EXPECT_DOUBLE_EQ(*fit.expected_exponent, -0.5);
    EXPECT_TRUE(fit.exponent_ok()) << *fit.time_exponent;
}

TEST(ChapmanKolmogorov, HeatConstant) {
    const FlowEnvelope env(presets::zero_drift(1));
    std::vector<PointPair> pairs;
    for (int i = -4; i <= 4; ++i) pairs.push_back({v1(0.0), v1(0.5 * i)});
    const ConvolutionCertificate c = ck_fit(env, 0.25, 0.0, 0.5, 1.0, pairs, pairs, {1.0, 0.5});
    ASSERT_TRUE(c.pass());
    EXPECT_EQ(c.epsilon, 1.0);
    EXPECT_NEAR(c.C, std::sqrt(kPi / 0.25), 0.05 * std::sqrt(kPi / 0.25));
}

TEST(ChapmanKolmogorov, OuFindsEpsilon) {
    const FlowEnvelope env(presets::ou(1));
    std::vector<PointPair> coarse, fine;
    for (int i = -4; i <= 4; ++i) coarse.push_back({v1(0.25 * i), v1(0.5 * i)});
    for (int i = -8; i <= 8; ++i) fine.push_back({v1(0.125 * i), v1(0.25 * i)});
    const ConvolutionCertificate c = ck_fit(env, 0.25, 0.0, 0.5, 1.0, coarse, fine, {1.0, 0.5, 0.25});
    EXPECT_TRUE(c.pass());
    EXPECT_TRUE(std::isfinite(c.C));
    EXPECT_THROW(ck_convolution_constant(env, 0.25, 0.0, 0.5, 1.0, coarse, 1.5), ArgumentError);
}

TEST(Scaling, OuExact) {
    const ProblemSpec ou = presets::ou(1);
    const double s = 0.2, t = 0.7;
    const ScalingReport r =
        scaling_check(ou, exact_ou_field(), exact_linear_field(t - s, 1.0), s, v1(0.4), t, v1(-0.3));
    EXPECT_LE(r.discrepancy, 1e-6);
    EXPECT_LE(r.flow_discrepancy, 1e-6);
}

TEST(Scaling, BrownianExact) {
    const ScalingReport r = scaling_check(presets::zero_drift(1), heat(), heat(), 0.0, v1(0.1), 0.3, v1(0.6));
    EXPECT_LE(r.discrepancy, 1e-10);
    EXPECT_LE(r.flow_discrepancy, 1e-10);
}

TEST(Scaling, RescaledCoefficients) {
    const ProblemSpec hat = rescale_problem(presets::ou(1), 0.0, 0.25);
    EXPECT_NEAR(hat.b(0.3, v1(2.0))[0], 0.5 * 1.0, 1e-15);  // sqrt(lambda) * (sqrt(lambda) z)
    EXPECT_THROW(rescale_problem(presets::ou(1), 0.0, 0.0), ArgumentError);
}

TEST(Control, ConstantTestFunctionGivesOne) {
    const SampleCloud cloud = simulate_paths(presets::ou(1), 0.0, v1(1.0), 1.0, 2000, 20, 3);
    const Vec theta = v1(std::exp(1.0));
    const ControlResult r =
        control_inequality_check([](const Vec&) { return 1.0; }, theta, cloud, box_lattice(theta, 2.0, 5));
    ASSERT_TRUE(r.found);
    EXPECT_EQ(r.C, 1.0);
}

TEST(Control, LadderAndLattice) {
    const auto l = fine_ladder(4.0);
    EXPECT_EQ(l.size(), 33u);
    EXPECT_NEAR(l[16], 2.0, 1e-15);
    EXPECT_EQ(box_lattice(Vec::Zero(2), 1.0, 3).size(), 9u);
    SampleCloud empty;
    EXPECT_THROW(control_inequality_check([](const Vec&) { return 1.0; }, v1(0), empty, {v1(0)}), ArgumentError);
}

TEST(Chain, ZeroDriftStraightLine) {
    const ChainCertificate c = build_chain(presets::zero_drift(1), 0.0, 1.0, v1(0.0), v1(2.0));
    EXPECT_EQ(c.L, 0.0);
    EXPECT_EQ(c.M, 17);
    EXPECT_TRUE(c.pass());
    ASSERT_EQ(c.points.size(), 18u);
    for (int j = 0; j <= 17; ++j) {
        EXPECT_NEAR(c.times[j], j / 17.0, 1e-15);
        EXPECT_NEAR(c.points[j][0], 2.0 * j / 17.0, 1e-12);
    }
    EXPECT_NEAR(c.max_distance(), 2.0 / 17.0, 1e-12);
    EXPECT_LE(c.max_distance(), c.budget);
}

TEST(Chain, ShortGapIsTrivial) {
    const ChainCertificate c = build_chain(presets::zero_drift(1), 0.0, 1.0, v1(0.0), v1(0.5));
    EXPECT_TRUE(c.trivial);
    EXPECT_EQ(c.M, 2);
    EXPECT_EQ(c.points.size(), 2u);
    EXPECT_THROW(build_chain(presets::zero_drift(1), 1.0, 1.0, v1(0), v1(0)), ArgumentError);
}

TEST(Chain, OuPasses) {
    const ChainCertificate c = build_chain(presets::ou(1), 0.0, 1.0, v1(1.0), v1(0.0));
    EXPECT_GT(c.L, 0.0);
    EXPECT_TRUE(c.pass());
    EXPECT_LE(c.max_distance(), c.budget + 1e-12);
}

TEST(Holder, EqualPointsGiveZero) {
    const ProblemSpec ou = presets::ou(1);
    const FlowEnvelope env(ou);
    const auto pairs = holder_pairs(env, one_d_grid({0.5, 1.0}), 0, {0.0}, true);
    const HolderReport r = holder_continuity_check(ou, exact_linear_derivatives(1.0, 1.0), HolderForm::grad_x_in_x,
                                                   0.5, pairs, pairs);
    EXPECT_EQ(r.fit.C, 0.0);
}

TEST(Holder, OuGradientInX) {
    const ProblemSpec ou = presets::ou(1);
    const FlowEnvelope env(ou);
    const GridSpec gs = one_d_grid({0.25, 0.5, 1.0});
    const std::vector<double> offsets{0.125, 0.25, 0.5, 1.0};
    std::vector<double> fine_offsets{0.0625};
    fine_offsets.insert(fine_offsets.end(), offsets.begin(), offsets.end());
    const HolderReport r =
        holder_continuity_check(ou, exact_linear_derivatives(1.0, 1.0), HolderForm::grad_x_in_x, 0.5,
                                holder_pairs(env, gs, 0, offsets, true), holder_pairs(env, gs, 1, fine_offsets, true));
    EXPECT_TRUE(r.pass());
    EXPECT_LE(r.split_ratio(), 2.0);
}

TEST(Holder, Preconditions) {
    const ProblemSpec rs = presets::rough_sigma(1, 0.5, 0.5);
    const FlowEnvelope env(rs);
    const auto pairs = holder_pairs(env, one_d_grid({0.5}, 0.0, 5), 0, {0.5}, false);
    const DerivativeFn d = frozen_derivatives(rs);
    EXPECT_THROW(holder_continuity_check(rs, d, HolderForm::grad_x_in_x, 1.0, pairs, pairs), ArgumentError);
    EXPECT_THROW(holder_continuity_check(rs, d, HolderForm::grad_x_in_y, 0.5, pairs, pairs), ArgumentError);
    EXPECT_THROW(holder_continuity_check(rs, d, HolderForm::grad_y_in_y, 0.25, pairs, pairs), ArgumentError);
    const ProblemSpec hd = presets::holder_drift(1, 0.0, 1.0, 0.0);
    EXPECT_THROW(holder_continuity_check(hd, frozen_derivatives(hd), HolderForm::hess_x_in_x, 0.5, pairs, pairs),
                 ArgumentError);
}
