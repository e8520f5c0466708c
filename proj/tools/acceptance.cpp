// acceptance: evaluates criteria 1-14 and prints one PASS/FAIL line each.
// Exits 0 once all criteria were evaluated, whatever their verdicts; an
// exception inside a criterion counts as FAIL for that criterion.

#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

using namespace parametrix;
using parametrix::cli::json;
using parametrix::cli::Pipeline;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

std::string scenario_path(const std::string& name) { return PARAMETRIX_SOURCE_DIR "/scenarios/" + name + ".toml"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Rough-sigma bounds are shared by criteria 3, 4 and 5.
const json& rough_sigma_bounds() {
    static const json report = [] {
        const Pipeline p(load_scenario(scenario_path("rough-sigma-1d")));
        return p.bounds({"two_sided", "grad_x", "hess_x", "grad_y", "kernel"}).report;
    }();
    return report;
}

bool is_pass(const json& j) { return j.at("verdict") == "PASS"; }

// 1 ------------------------------------------------------------------------

Outcome ou_series_accuracy() {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemSpec ou = presets::ou(1);
    SeriesConfig cfg;
    cfg.N = 2;
    const ParametrixSeries series(ou, cfg);
    const double tau = 0.25;
    const Vec x = v1(0.0);
    const Vec centre = solve_flow(ou.drift, 0.0, tau, x);
    double worst = 0.0, at = 0.0;
    for (int i = -12; i <= 12; ++i) {
        const Vec y = centre + v1(0.25 * i * std::sqrt(tau));
        const double exact = exact_ou_density(0.0, x, tau, y);
        const double rel = std::abs(series.value(0.0, x, tau, y) / exact - 1.0);
        if (rel > worst) worst = rel, at = y[0];
    }
    const double secs = seconds_since(t0);
    return {worst <= 0.05 && secs <= 60.0,
            "max relative error " + fmt("%.4f", worst) + " at y=" + fmt("%.3f", at) + " (limit 0.05), " +
                fmt("%.1f", secs) + " s"};
}

// 2 ------------------------------------------------------------------------

Outcome constant_coefficients() {
    Mat s1(1, 1);
    s1 << 1.3;
    Mat s2(2, 2);
    s2 << 1.0, 0.3, 0.0, 0.7;
    Vec b2(2);
    b2 << 0.4, -0.2;
    double worst_H = 0.0, worst_gap = 0.0;
    for (const auto& [b0, s0] : std::vector<std::pair<Vec, Mat>>{{v1(0.5), s1}, {b2, s2}}) {
        const ProblemSpec c = presets::constant(b0, s0);
        const DensityField exact = exact_constant_field(b0, s0);
        const int d = static_cast<int>(b0.size());
        // each extra term nests one more convolution; keep the 2-d quadrature small
        for (int N = 0; N <= (d == 1 ? 4 : 3); ++N) {
            SeriesConfig cfg;
            cfg.N = N;
            cfg.time_nodes = d == 1 ? 6 : 4;
            cfg.space.nodes = d == 1 ? 12 : 5;
            const ParametrixSeries series(c, cfg);
            for (double w : {-1.5, 0.0, 0.7}) {
                const Vec x = Vec::Constant(d, 0.1);
                const Vec y = x + 0.6 * b0 + Vec::Constant(d, w);
                worst_H = std::max(worst_H, std::abs(kernel_H(c, 0.0, x, 0.6, y)));
                worst_gap = std::max(worst_gap, std::abs(series.value(0.0, x, 0.6, y) - exact(0.0, x, 0.6, y)));
            }
        }
    }
    return {worst_H == 0.0 && worst_gap <= 1e-8,
            "max |H| " + fmt("%.3g", worst_H) + ", max |series - exact| " + fmt("%.3g", worst_gap) +
                " over N=0..4 (d=1), N=0..3 (d=2)"};
}

// 3 ------------------------------------------------------------------------

Outcome two_sided() {
    const auto t0 = std::chrono::steady_clock::now();
    const Pipeline ou(load_scenario(scenario_path("ou-1d")));
    const json o = ou.bounds({"two_sided"}).report.at("two_sided");

    Scenario far = load_scenario(scenario_path("ou-1d"));
    far.grid.durations = {1.0};
    far.grid.starts = {{3.0}};
    const json fl = Pipeline(far).bounds({"flowless"}).report.at("flowless");

    const json r = rough_sigma_bounds().at("two_sided");
    const double secs = seconds_since(t0);
    auto stab_ok = [](const json& j) {
        const double s = j.at("stability");
        return s >= 0.5 && s <= 2.0;
    };
    const double inflation = fl.at("inflation");
    const bool pass = is_pass(o) && stab_ok(o) && is_pass(r) && stab_ok(r) && !is_pass(fl) && inflation >= 10.0 &&
                      secs <= 300.0;
    return {pass, "OU C=" + fmt("%.3f", o.at("C")) + " stab=" + fmt("%.3f", o.at("stability")) +
                      "; rough-sigma C=" + fmt("%.3f", r.at("C")) + " stab=" + fmt("%.3f", r.at("stability")) +
                      "; flow-less inflation at x=3 " + fmt("%.1f", inflation) + "; " + fmt("%.0f", secs) + " s"};
}

// 4 ------------------------------------------------------------------------

Outcome derivative_exponents() {
    Scenario sc = load_scenario(scenario_path("ou-1d"));
    sc.bounds.exponent_tolerance = 0.15;
    const json ou = Pipeline(sc).bounds({"grad_x", "hess_x", "grad_y"}).report;
    const json& rs = rough_sigma_bounds();
    bool pass = true;
    std::string detail = "OU";
    auto check = [&](const json& j, const char* name, double tol) {
        const double e = j.at(name).at("time_exponent"), want = j.at(name).at("expected_exponent");
        pass = pass && std::abs(e - want) <= tol;
        detail += std::string(" ") + name + "=" + fmt("%.3f", e);
    };
    for (const char* n : {"grad_x", "hess_x", "grad_y"}) check(ou, n, 0.15);
    detail += "; rough-sigma MC";
    for (const char* n : {"grad_x", "hess_x", "grad_y"}) check(rs, n, 0.25);
    return {pass, detail};
}

// 5 ------------------------------------------------------------------------

Outcome kernel_exponents() {
    const json half = rough_sigma_bounds().at("kernel");
    Scenario sc = load_scenario(scenario_path("rough-sigma-1d"));
    sc.model.alpha = 1.0;
    sc.bounds.exponent_tolerance = 0.15;
    const json one = Pipeline(sc).bounds({"kernel"}).report.at("kernel");
    bool pass = true;
    std::string detail;
    for (const auto& [a, j] : std::vector<std::pair<double, json>>{{0.5, half}, {1.0, one}}) {
        const double e = j.at("time_exponent");
        const double want = -1.0 + 0.5 * a;
        pass = pass && std::abs(e - want) <= 0.15;
        if (!detail.empty()) detail += "; ";
        detail += "alpha=" + fmt("%.1f", a) + ": " + fmt("%.3f", e) + " vs " + fmt("%.2f", want);
    }
    return {pass, detail};
}

// 6 ------------------------------------------------------------------------

Outcome convolution() {
    const json ck = Pipeline(load_scenario(scenario_path("ou-1d"))).bounds({"ck"}).report.at("ck");
    const double stab = ck.at("stability");
    return {is_pass(ck) && std::abs(stab - 1.0) <= 0.10,
            "OU eps=" + fmt("%.4g", ck.at("epsilon")) + " C=" + fmt("%.4f", ck.at("C")) +
                " stability=" + fmt("%.4f", stab)};
}

// 7 ------------------------------------------------------------------------

Outcome flow_equivalence_check() {
    const auto r = Pipeline(load_scenario(scenario_path("holder-drift-1d"))).flow_equivalence_step();
    const double c = r.report.at("C"), stab = r.report.at("stability");
    return {r.pass && std::isfinite(c) && std::abs(stab - 1.0) <= 0.10,
            "holder-drift C=" + fmt("%.4f", c) + " stability=" + fmt("%.4f", stab) + " over " +
                std::to_string(r.report.at("samples").at("coarse").get<int>()) + " samples"};
}

// 8 ------------------------------------------------------------------------

Outcome chains() {
    const ChainCertificate zero = build_chain(presets::zero_drift(1), 0.0, 1.0, v1(0.0), v1(2.0));
    bool defects_zero = true;
    for (const auto& l : zero.links) defects_zero = defects_zero && l.excess == 0.0;
    const ChainCertificate ou = build_chain(presets::ou(1), 0.0, 1.0, v1(1.0), v1(0.0));
    bool within = true;
    for (const auto& l : ou.links) within = within && l.distance <= ou.budget + 1e-12;
    if (ou.trivial) within = true;
    return {zero.M == 17 && defects_zero && zero.pass() && ou.pass() && within,
            "b=0: M=" + std::to_string(zero.M) + " max link " + fmt("%.4f", zero.max_distance()) + " budget " +
                fmt("%.4f", zero.budget) + "; OU: M=" + std::to_string(ou.M) + " max link " +
                fmt("%.4f", ou.max_distance()) + " budget " + fmt("%.4f", ou.budget)};
}

// 9 ------------------------------------------------------------------------

Outcome scaling() {
    const json ou = Pipeline(load_scenario(scenario_path("ou-1d"))).scaling("exact");
    const json zd = Pipeline(load_scenario(scenario_path("zero-drift-1d"))).scaling("exact");
    Scenario rs = load_scenario(scenario_path("rough-sigma-1d"));
    rs.oracle.paths = 50000;
    const Pipeline rp(rs);
    const json mc = rp.scaling("oracle");
    const bool pass = is_pass(ou) && is_pass(zd) && is_pass(mc);
    return {pass, "OU " + fmt("%.3g", ou.at("discrepancy")) + ", b=0 " + fmt("%.3g", zd.at("discrepancy")) +
                      " (limit 1e-6); rough-sigma MC " + fmt("%.3g", mc.at("discrepancy")) + " vs 2 SE " +
                      fmt("%.3g", mc.at("allowed"))};
}

// 10 -----------------------------------------------------------------------

Outcome control() {
    const ProblemSpec ou = presets::ou(1);
    const FlowEnvelope env(ou);
    const Vec x = v1(1.0);
    const SampleCloud cloud = simulate_paths(ou, 0.0, x, 1.0, 100000, 200, 11);
    const Vec th = env.center(0.0, x, 1.0);
    const std::vector<std::pair<std::string, std::function<double(const Vec&)>>> ells{
        {"constant", [](const Vec&) { return 1.0; }},
        {"gaussian", [&](const Vec& z) { return std::exp(-(z - th).squaredNorm()); }},
        {"shifted bump", [&](const Vec& z) { return 1e-300 + std::exp(-(z - th - v1(4.0)).squaredNorm() / 0.02); }}};
    bool pass = true;
    std::string detail;
    for (const auto& [name, ell] : ells) {
        const ControlResult a = control_inequality_check(ell, th, cloud, box_lattice(th, 8.0, 161));
        const ControlResult b = control_inequality_check(ell, th, cloud, box_lattice(th, 8.0, 321));
        const bool ok = a.found && b.found && std::abs(b.C / a.C - 1.0) <= 0.20;
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += name + " C=" + fmt("%.3f", a.C) + " / " + fmt("%.3f", b.C) + " (161 / 321 z-points)";
    }
    return {pass, detail};
}

// 11 -----------------------------------------------------------------------

Outcome mollification() {
    const ProblemSpec hd = presets::holder_drift(1, 0.0, 1.0, 0.5);
    std::vector<GridPoint> grid;
    for (double tau : {0.5, 1.0})
        for (double y0 : {0.02, 0.05, 0.1, 0.15, 0.2}) {
            GridPoint g;
            g.t = tau;
            g.x = v1(0.0);
            g.y = v1(y0 * tau * tau);
            grid.push_back(g);
        }
    const std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
    SeriesConfig cfg;
    cfg.N = 2;
    auto values = [&](double e) {
        const ParametrixSeries s(mollified(hd, e), cfg);
        std::vector<double> v;
        for (const auto& g : grid) v.push_back(s.value(g.s, g.x, g.t, g.y));
        return v;
    };
    std::vector<std::vector<double>> vals;
    for (double e : eps) vals.push_back(values(e));
    vals.push_back(values(eps.back() / 2.0));
    std::vector<double> D;
    double C = 0.0;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            num = std::max(num, std::abs(vals[k][i] - vals[k + 1][i]));
            den = std::max(den, std::abs(vals[k + 1][i]));
        }
        D.push_back(num / den);
        C = std::max(C, D.back() / std::pow(eps[k], hd.beta));
    }
    const double slope = loglog_slope(eps, D);
    return {std::isfinite(C) && std::abs(slope - hd.beta) <= 0.2,
            "sup-relative gaps " + fmt("%.3g", D.front()) + ".." + fmt("%.3g", D.back()) + ", C=" + fmt("%.3f", C) +
                ", eps exponent " + fmt("%.3f", slope) + " vs beta=0.5 +- 0.2"};
}

// 12 -----------------------------------------------------------------------

Outcome holder() {
    const auto ou = Pipeline(load_scenario(scenario_path("ou-1d"))).holder({"grad_x.x"}, 0.5);
    const Scenario rsc = load_scenario(scenario_path("rough-sigma-1d"));
    const double gamma2 = rsc.model.alpha / 2.0;
    const auto rs = Pipeline(rsc).holder({"grad_x.y"}, gamma2);
    return {ou.pass && rs.pass,
            "OU grad_x.x gamma=0.5 C=" + fmt("%.4f", ou.report.at("grad_x.x").at("C")) +
                " stab=" + fmt("%.3f", ou.report.at("grad_x.x").at("stability")) + "; rough-sigma grad_x.y gamma=" +
                fmt("%.3f", gamma2) + " C=" + fmt("%.4f", rs.report.at("grad_x.y").at("C")) +
                " stab=" + fmt("%.3f", rs.report.at("grad_x.y").at("stability"))};
}

// 13 -----------------------------------------------------------------------

Outcome frozen_derivatives_vs_fd() {
    double e1 = 0.0, e2 = 0.0;
    Vec x2(2), y2(2);
    x2 << -0.3, 0.1;
    y2 << 0.2, -0.5;
    const std::vector<std::tuple<ProblemSpec, Vec, Vec>> cases{
        {presets::holder_drift(1, 0.5, 1.0, 0.5), v1(0.3), v1(0.9)},
        {presets::rough_sigma(1, 0.5, 0.5), v1(-0.2), v1(0.4)},
        {presets::ou(2), x2, y2},
        {presets::holder_drift(2, 0.3, 1.0, 0.5), x2, y2}};
    for (const auto& [spec, x, y] : cases)
        for (double tau : {0.1, 0.4, 1.0}) {
            const FrozenGaussian fz = forward_frozen(spec, 0.0, tau, y, 400);
            const DensityField field{[&](double, const Vec& a, double, const Vec& b) { return frozen_density(fz, a, b); },
                                     Provenance::frozen, "frozen"};
            for (Variable var : {Variable::x, Variable::y}) {
                const Mat g = frozen_derivative(fz, x, y, 1, var) - fd_derivative(field, var, 1, 0.0, x, tau, y);
                e1 = std::max(e1, g.cwiseAbs().maxCoeff());
                const Mat h = frozen_derivative(fz, x, y, 2, var) - fd_derivative(field, var, 2, 0.0, x, tau, y);
                e2 = std::max(e2, h.cwiseAbs().maxCoeff());
            }
        }
    return {e1 <= 1e-5 && e2 <= 1e-3,
            "max |analytic - fd| order 1 " + fmt("%.3g", e1) + " (1e-5), order 2 " + fmt("%.3g", e2) + " (1e-3)"};
}

// 14 -----------------------------------------------------------------------

Outcome reproducibility() {
    Scenario mc = load_scenario(scenario_path("rough-sigma-1d"));
    mc.name = "rough-sigma-mc";
    mc.pipeline = {"simulate", "bounds", "holder"};
    mc.oracle.paths = 20000;
    mc.bounds.targets = {"grad_x"};
    mc.bounds.derivative_points = 7;
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> dumps;
    const std::vector<Scenario> scenarios{load_scenario(scenario_path("ou-1d")),
                                          load_scenario(scenario_path("zero-drift-1d")), mc};
    for (int workers : {1, 4, 8}) {
        set_worker_count(static_cast<std::size_t>(workers));
        std::vector<std::string> d;
        for (const auto& sc : scenarios) d.push_back(Pipeline(sc).run({}).report.dump());
        dumps.push_back(std::move(d));
    }
    set_worker_count(1);
    const bool pass = dumps[0] == dumps[1] && dumps[0] == dumps[2];
    std::size_t bytes = 0;
    for (const auto& s : dumps[0]) bytes += s.size();
    return {pass, "reports for ou-1d, zero-drift-1d and an oracle rough-sigma run (" + std::to_string(bytes) +
                      " bytes) " + (pass ? "identical" : "differ") + " across 1, 4 and 8 workers"};
}

}  // namespace

int main() {
    set_worker_count(1);
    const std::vector<std::function<Outcome()>> criteria{
        ou_series_accuracy, constant_coefficients, two_sided, derivative_exponents, kernel_exponents,
        convolution,        flow_equivalence_check, chains,   scaling,              control,
        mollification,      holder,                 frozen_derivatives_vs_fd, reproducibility};
    int passed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        passed += o.pass ? 1 : 0;
        std::cout << "criterion " << (i + 1) << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
                  << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
    }
    std::cout << "acceptance: " << criteria.size() << " criteria evaluated, " << passed << " PASS, "
              << criteria.size() - passed << " FAIL" << std::endl;
    return 0;
}
