#pragma once

// Typed scenario on top of the key-table config: model coefficients, grids,
// method selections and seeds, with validation and round-trip serialization.

#include "parametrix/bounds.hpp"
#include "parametrix/config.hpp"

#include <set>

namespace parametrix {

struct ModelConfig {
    std::string preset = "ou";  // ou | zero-drift | holder-drift | rough-sigma | linear | custom
    int dimension = 1;
    double horizon = 1.0;
    double c1 = 0.0, c2 = 1.0, beta = 0.5;      // holder-drift
    double gamma = 0.5, alpha = 0.5;            // rough-sigma
    double rate = 1.0, scale = 1.0;             // linear
    std::vector<std::string> drift;             // custom, one expression per component
    std::vector<std::string> diffusion;         // custom, d*d expressions, row-major
    std::optional<double> kappa0, kappa1, alpha_override, beta_override;
    std::optional<double> mollify;              // replace b by b_eps

    bool operator==(const ModelConfig&) const = default;
};

struct GridConfig {
    double s = 0.0;
    std::vector<double> durations{0.25, 0.5, 1.0};
    std::vector<std::vector<double>> starts{{0.0}};
    double half_width = 3.0;
    int points = 13;

    bool operator==(const GridConfig&) const = default;
};

struct FlowConfig {
    int steps = kDefaultFlowSteps;
    std::vector<double> eps{1.0, 0.1, 0.01};
    int samples = 100;  // flow-equivalence grid size (doubled for the stability check)

    bool operator==(const FlowConfig&) const = default;
};

struct DensityConfig {
    std::string method = "series";  // frozen | series | oracle | exact
    int N = 2;
    int time_nodes = 24;
    int space_nodes = 32;
    int flow_steps = 200;
    int level = 0;

    bool operator==(const DensityConfig&) const = default;
};

struct OracleConfig {
    int paths = 100000;
    int steps = 100;
    double bandwidth = 1.0;

    bool operator==(const OracleConfig&) const = default;
};

struct BoundsConfig {
    std::vector<std::string> targets{"two_sided"};
    std::vector<double> ladder = dyadic_ladder();
    std::string source = "";             // density for two_sided, flowless, scaling; empty: [density] method
    std::string derivative_source = "";  // derivative targets; empty: source
    double stability_lo = 0.5, stability_hi = 2.0;
    double exponent_tolerance = 0.15;
    bool require_grad_sigma = true;
    std::vector<double> derivative_durations{0.05, 0.1, 0.2, 0.4};
    std::vector<double> kernel_durations{0.01, 0.02, 0.04, 0.08};
    std::vector<std::vector<double>> kernel_starts;  // empty: [grid] starts
    int derivative_points = 13;
    double ck_lambda = 0.25;
    std::vector<double> ck_eps{0.5, 0.25, 0.125};
    std::vector<double> ck_times{0.0, 0.5, 1.0};

    bool operator==(const BoundsConfig&) const = default;
};

struct ChainConfig {
    double s = 0.0, t = 1.0;
    std::vector<double> x{0.0}, y{2.0};

    bool operator==(const ChainConfig&) const = default;
};

struct HolderConfig {
    std::vector<std::string> forms{"grad_x.x"};
    double gamma = 0.5;
    std::vector<double> offsets{0.125, 0.25, 0.5, 1.0};
    std::string source = "";
    std::vector<double> durations;  // empty: [grid] durations
    int points = 0;                 // 0: [grid] points

    bool operator==(const HolderConfig&) const = default;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    int threads = 1;
    std::vector<std::string> pipeline{"validate", "bounds"};
    ModelConfig model;
    GridConfig grid;
    FlowConfig flow;
    DensityConfig density;
    OracleConfig oracle;
    BoundsConfig bounds;
    ChainConfig chain;
    HolderConfig holder;

    /// Where each "section.key" was read from (not part of equality).
    std::map<std::string, std::pair<int, int>> positions;

    bool operator==(const Scenario& o) const {
        return name == o.name && seed == o.seed && threads == o.threads && pipeline == o.pipeline &&
               model == o.model && grid == o.grid && flow == o.flow && density == o.density && oracle == o.oracle &&
               bounds == o.bounds && chain == o.chain && holder == o.holder;
    }

    [[noreturn]] void fail_at(const std::string& key, const std::string& what) const {
        auto it = positions.find(key);
        if (it != positions.end()) throw ConfigError(what, it->second.first, it->second.second);
        throw ArgumentError(what + " (" + key + ")");
    }
};

inline const std::set<std::string>& known_presets() {
    static const std::set<std::string> p{"ou", "zero-drift", "holder-drift", "rough-sigma", "linear", "custom"};
    return p;
}

inline const std::set<std::string>& known_targets() {
    static const std::set<std::string> t{"two_sided", "flowless", "grad_x", "hess_x", "grad_y",
                                         "kernel",    "ck",       "scaling", "flow"};
    return t;
}

inline const std::set<std::string>& known_steps() {
    static const std::set<std::string> s{"validate", "flow", "simulate", "density", "bounds", "chain", "holder"};
    return s;
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

class SectionReader {
public:
    SectionReader(const ConfigSection* sec, Scenario& sc) : sec_(sec), sc_(sc) {}

    template <class F>
    void read(const std::string& key, F&& assign) {
        if (!sec_) return;
        const ConfigEntry* e = sec_->find(key);
        if (!e) return;
        used_.insert(key);
        sc_.positions[sec_->name + "." + key] = {e->value.line, e->value.column};
        assign(e->value);
    }

    void finish() const {
        if (!sec_) return;
        for (const auto& e : sec_->entries)
            if (!used_.count(e.key))
                throw ConfigError("unknown key '" + e.key + "' in section [" + sec_->name + "]", e.line, e.column);
    }

private:
    const ConfigSection* sec_;
    Scenario& sc_;
    std::set<std::string> used_;
};

}  // namespace detail

inline Scenario scenario_from_table(const ConfigTable& table) {
    static const std::set<std::string> sections{"", "scenario", "model", "grid", "flow", "density",
                                                "oracle", "bounds", "chain", "holder"};
    for (const auto& s : table.sections) {
        if (!sections.count(s.name)) throw ConfigError("unknown section [" + s.name + "]", s.line, 1);
        if (s.name.empty() && !s.entries.empty())
            throw ConfigError("key outside of any section", s.entries.front().line, s.entries.front().column);
    }
    Scenario sc;
    using V = ConfigValue;
    {
        detail::SectionReader r(table.section("scenario"), sc);
        r.read("name", [&](const V& v) { sc.name = v.as_string(); });
        r.read("seed", [&](const V& v) {
            const double x = v.as_number();
            if (x < 0 || x != std::floor(x) || x > 9.007199254740992e15) v.fail("seed must be a non-negative integer");
            sc.seed = static_cast<std::uint64_t>(x);
        });
        r.read("threads", [&](const V& v) { sc.threads = v.as_int(); });
        r.read("pipeline", [&](const V& v) { sc.pipeline = v.as_strings(); });
        r.finish();
    }
    {
        auto& m = sc.model;
        detail::SectionReader r(table.section("model"), sc);
        r.read("preset", [&](const V& v) { m.preset = v.as_string(); });
        r.read("dimension", [&](const V& v) { m.dimension = v.as_int(); });
        r.read("horizon", [&](const V& v) { m.horizon = v.as_number(); });
        r.read("c1", [&](const V& v) { m.c1 = v.as_number(); });
        r.read("c2", [&](const V& v) { m.c2 = v.as_number(); });
        r.read("beta", [&](const V& v) { m.beta = v.as_number(); });
        r.read("gamma", [&](const V& v) { m.gamma = v.as_number(); });
        r.read("alpha", [&](const V& v) { m.alpha = v.as_number(); });
        r.read("rate", [&](const V& v) { m.rate = v.as_number(); });
        r.read("scale", [&](const V& v) { m.scale = v.as_number(); });
        r.read("drift", [&](const V& v) { m.drift = v.as_strings(); });
        r.read("diffusion", [&](const V& v) { m.diffusion = v.as_strings(); });
        r.read("kappa0", [&](const V& v) { m.kappa0 = v.as_number(); });
        r.read("kappa1", [&](const V& v) { m.kappa1 = v.as_number(); });
        r.read("alpha_override", [&](const V& v) { m.alpha_override = v.as_number(); });
        r.read("beta_override", [&](const V& v) { m.beta_override = v.as_number(); });
        r.read("mollify", [&](const V& v) { m.mollify = v.as_number(); });
        r.finish();
    }
    {
        auto& g = sc.grid;
        detail::SectionReader r(table.section("grid"), sc);
        r.read("s", [&](const V& v) { g.s = v.as_number(); });
        r.read("durations", [&](const V& v) { g.durations = v.as_numbers(); });
        r.read("starts", [&](const V& v) { g.starts = v.as_points(); });
        r.read("half_width", [&](const V& v) { g.half_width = v.as_number(); });
        r.read("points", [&](const V& v) { g.points = v.as_int(); });
        r.finish();
    }
    {
        auto& f = sc.flow;
        detail::SectionReader r(table.section("flow"), sc);
        r.read("steps", [&](const V& v) { f.steps = v.as_int(); });
        r.read("eps", [&](const V& v) { f.eps = v.as_numbers(); });
        r.read("samples", [&](const V& v) { f.samples = v.as_int(); });
        r.finish();
    }
    {
        auto& d = sc.density;
        detail::SectionReader r(table.section("density"), sc);
        r.read("method", [&](const V& v) { d.method = v.as_string(); });
        r.read("N", [&](const V& v) { d.N = v.as_int(); });
        r.read("time_nodes", [&](const V& v) { d.time_nodes = v.as_int(); });
        r.read("space_nodes", [&](const V& v) { d.space_nodes = v.as_int(); });
        r.read("flow_steps", [&](const V& v) { d.flow_steps = v.as_int(); });
        r.read("level", [&](const V& v) { d.level = v.as_int(); });
        r.finish();
    }
    {
        auto& o = sc.oracle;
        detail::SectionReader r(table.section("oracle"), sc);
        r.read("paths", [&](const V& v) { o.paths = v.as_int(); });
        r.read("steps", [&](const V& v) { o.steps = v.as_int(); });
        r.read("bandwidth", [&](const V& v) { o.bandwidth = v.as_number(); });
        r.finish();
    }
    {
        auto& b = sc.bounds;
        detail::SectionReader r(table.section("bounds"), sc);
        r.read("targets", [&](const V& v) { b.targets = v.as_strings(); });
        r.read("ladder", [&](const V& v) { b.ladder = v.as_numbers(); });
        r.read("source", [&](const V& v) { b.source = v.as_string(); });
        r.read("derivative_source", [&](const V& v) { b.derivative_source = v.as_string(); });
        r.read("stability_lo", [&](const V& v) { b.stability_lo = v.as_number(); });
        r.read("stability_hi", [&](const V& v) { b.stability_hi = v.as_number(); });
        r.read("exponent_tolerance", [&](const V& v) { b.exponent_tolerance = v.as_number(); });
        r.read("require_grad_sigma", [&](const V& v) { b.require_grad_sigma = v.as_bool(); });
        r.read("derivative_durations", [&](const V& v) { b.derivative_durations = v.as_numbers(); });
        r.read("kernel_durations", [&](const V& v) { b.kernel_durations = v.as_numbers(); });
        r.read("kernel_starts", [&](const V& v) { b.kernel_starts = v.as_points(); });
        r.read("derivative_points", [&](const V& v) { b.derivative_points = v.as_int(); });
        r.read("ck_lambda", [&](const V& v) { b.ck_lambda = v.as_number(); });
        r.read("ck_eps", [&](const V& v) { b.ck_eps = v.as_numbers(); });
        r.read("ck_times", [&](const V& v) { b.ck_times = v.as_numbers(); });
        r.finish();
    }
    {
        auto& c = sc.chain;
        detail::SectionReader r(table.section("chain"), sc);
        r.read("s", [&](const V& v) { c.s = v.as_number(); });
        r.read("t", [&](const V& v) { c.t = v.as_number(); });
        r.read("x", [&](const V& v) { c.x = v.as_numbers(); });
        r.read("y", [&](const V& v) { c.y = v.as_numbers(); });
        r.finish();
    }
    {
        auto& h = sc.holder;
        detail::SectionReader r(table.section("holder"), sc);
        r.read("forms", [&](const V& v) { h.forms = v.as_strings(); });
        r.read("gamma", [&](const V& v) { h.gamma = v.as_number(); });
        r.read("offsets", [&](const V& v) { h.offsets = v.as_numbers(); });
        r.read("source", [&](const V& v) { h.source = v.as_string(); });
        r.read("durations", [&](const V& v) { h.durations = v.as_numbers(); });
        r.read("points", [&](const V& v) { h.points = v.as_int(); });
        r.finish();
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

inline ConfigTable scenario_to_table(const Scenario& sc) {
    ConfigTable t;
    auto num = [](double v) { return ConfigValue::of(v); };
    auto nums = [](const std::vector<double>& v) {
        std::vector<ConfigValue> items;
        for (double x : v) items.push_back(ConfigValue::of(x));
        return ConfigValue::list(std::move(items));
    };
    auto strs = [](const std::vector<std::string>& v) {
        std::vector<ConfigValue> items;
        for (const auto& x : v) items.push_back(ConfigValue::of(x));
        return ConfigValue::list(std::move(items));
    };
    auto str = [](const std::string& s) { return ConfigValue::of(s); };

    t.set("scenario", "name", str(sc.name));
    t.set("scenario", "seed", num(static_cast<double>(sc.seed)));
    t.set("scenario", "threads", num(sc.threads));
    t.set("scenario", "pipeline", strs(sc.pipeline));

    const auto& m = sc.model;
    t.set("model", "preset", str(m.preset));
    t.set("model", "dimension", num(m.dimension));
    t.set("model", "horizon", num(m.horizon));
    t.set("model", "c1", num(m.c1));
    t.set("model", "c2", num(m.c2));
    t.set("model", "beta", num(m.beta));
    t.set("model", "gamma", num(m.gamma));
    t.set("model", "alpha", num(m.alpha));
    t.set("model", "rate", num(m.rate));
    t.set("model", "scale", num(m.scale));
    if (!m.drift.empty()) t.set("model", "drift", strs(m.drift));
    if (!m.diffusion.empty()) t.set("model", "diffusion", strs(m.diffusion));
    if (m.kappa0) t.set("model", "kappa0", num(*m.kappa0));
    if (m.kappa1) t.set("model", "kappa1", num(*m.kappa1));
    if (m.alpha_override) t.set("model", "alpha_override", num(*m.alpha_override));
    if (m.beta_override) t.set("model", "beta_override", num(*m.beta_override));
    if (m.mollify) t.set("model", "mollify", num(*m.mollify));

    const auto& g = sc.grid;
    t.set("grid", "s", num(g.s));
    t.set("grid", "durations", nums(g.durations));
    {
        std::vector<ConfigValue> pts;
        for (const auto& p : g.starts) pts.push_back(nums(p));
        t.set("grid", "starts", ConfigValue::list(std::move(pts)));
    }
    t.set("grid", "half_width", num(g.half_width));
    t.set("grid", "points", num(g.points));

    t.set("flow", "steps", num(sc.flow.steps));
    t.set("flow", "eps", nums(sc.flow.eps));
    t.set("flow", "samples", num(sc.flow.samples));

    const auto& d = sc.density;
    t.set("density", "method", str(d.method));
    t.set("density", "N", num(d.N));
    t.set("density", "time_nodes", num(d.time_nodes));
    t.set("density", "space_nodes", num(d.space_nodes));
    t.set("density", "flow_steps", num(d.flow_steps));
    t.set("density", "level", num(d.level));

    t.set("oracle", "paths", num(sc.oracle.paths));
    t.set("oracle", "steps", num(sc.oracle.steps));
    t.set("oracle", "bandwidth", num(sc.oracle.bandwidth));

    const auto& b = sc.bounds;
    t.set("bounds", "targets", strs(b.targets));
    t.set("bounds", "ladder", nums(b.ladder));
    t.set("bounds", "source", str(b.source));
    t.set("bounds", "derivative_source", str(b.derivative_source));
    t.set("bounds", "stability_lo", num(b.stability_lo));
    t.set("bounds", "stability_hi", num(b.stability_hi));
    t.set("bounds", "exponent_tolerance", num(b.exponent_tolerance));
    t.set("bounds", "require_grad_sigma", ConfigValue::of(b.require_grad_sigma));
    t.set("bounds", "derivative_durations", nums(b.derivative_durations));
    t.set("bounds", "kernel_durations", nums(b.kernel_durations));
    if (!b.kernel_starts.empty()) {
        std::vector<ConfigValue> pts;
        for (const auto& p : b.kernel_starts) pts.push_back(nums(p));
        t.set("bounds", "kernel_starts", ConfigValue::list(std::move(pts)));
    }
    t.set("bounds", "derivative_points", num(b.derivative_points));
    t.set("bounds", "ck_lambda", num(b.ck_lambda));
    t.set("bounds", "ck_eps", nums(b.ck_eps));
    t.set("bounds", "ck_times", nums(b.ck_times));

    t.set("chain", "s", num(sc.chain.s));
    t.set("chain", "t", num(sc.chain.t));
    t.set("chain", "x", nums(sc.chain.x));
    t.set("chain", "y", nums(sc.chain.y));

    t.set("holder", "forms", strs(sc.holder.forms));
    t.set("holder", "gamma", num(sc.holder.gamma));
    t.set("holder", "offsets", nums(sc.holder.offsets));
    t.set("holder", "source", str(sc.holder.source));
    if (!sc.holder.durations.empty()) t.set("holder", "durations", nums(sc.holder.durations));
    if (sc.holder.points > 0) t.set("holder", "points", num(sc.holder.points));
    return t;
}

inline std::string serialize_scenario(const Scenario& sc) { return serialize_config(scenario_to_table(sc)); }

inline Scenario parse_scenario(const std::string& text) { return scenario_from_table(parse_config_text(text)); }

inline Scenario load_scenario(const std::string& path) { return scenario_from_table(load_config(path)); }

// ---------------------------------------------------------------------------
// Building and validation
// ---------------------------------------------------------------------------

inline ProblemSpec build_problem(const Scenario& sc) {
    const auto& m = sc.model;
    const int d = m.dimension;
    if (d < 1 || d > kMaxDim)
        sc.fail_at("model.dimension", "dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    if (!known_presets().count(m.preset)) sc.fail_at("model.preset", "unknown coefficient preset '" + m.preset + "'");
    if (!(m.horizon > 0.0)) sc.fail_at("model.horizon", "horizon must be positive");
    ProblemSpec p;
    if (m.preset == "ou") {
        p = presets::ou(d);
    } else if (m.preset == "zero-drift") {
        p = presets::zero_drift(d);
    } else if (m.preset == "holder-drift") {
        if (!(m.beta >= 0.0 && m.beta <= 1.0)) sc.fail_at("model.beta", "beta must lie in [0, 1]");
        p = presets::holder_drift(d, m.c1, m.c2, m.beta);
    } else if (m.preset == "rough-sigma") {
        if (!(m.alpha > 0.0 && m.alpha <= 1.0)) sc.fail_at("model.alpha", "alpha must lie in (0, 1]");
        if (!(m.gamma >= 0.0)) sc.fail_at("model.gamma", "gamma must be non-negative");
        p = presets::rough_sigma(d, m.gamma, m.alpha);
    } else if (m.preset == "linear") {
        if (m.scale == 0.0) sc.fail_at("model.scale", "scale must be non-zero");
        p = presets::linear(d, m.rate, m.scale);
    } else {
        if (static_cast<int>(m.drift.size()) != d)
            sc.fail_at("model.drift", "custom drift needs one expression per component (" + std::to_string(d) + ")");
        if (static_cast<int>(m.diffusion.size()) != d * d)
            sc.fail_at("model.diffusion", "custom diffusion needs d*d = " + std::to_string(d * d) + " expressions");
        auto compile = [&](const std::string& key, const std::vector<std::string>& src) {
            std::vector<Expression> out;
            for (const auto& s : src) {
                try {
                    out.push_back(Expression::parse(s, d));
                } catch (const ExpressionError& e) {
                    auto it = sc.positions.find(key);
                    if (it != sc.positions.end())
                        throw ConfigError(std::string("in expression \"") + s + "\": " + e.what(), it->second.first,
                                          it->second.second);
                    throw;
                }
            }
            return out;
        };
        auto drift = std::make_shared<std::vector<Expression>>(compile("model.drift", m.drift));
        auto diff = std::make_shared<std::vector<Expression>>(compile("model.diffusion", m.diffusion));
        p.name = "custom";
        p.dimension = d;
        p.drift = [drift, d](double t, const Vec& x) -> Vec {
            Vec v(d);
            for (int i = 0; i < d; ++i) v[i] = (*drift)[i](t, x);
            return v;
        };
        p.diffusion = [diff, d](double t, const Vec& x) -> Mat {
            Mat s(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) s(i, j) = (*diff)[i * d + j](t, x);
            return s;
        };
        p.kappa0 = 1.0;
        p.alpha = 1.0;
        p.kappa1 = 1.0;
        p.beta = 1.0;
    }
    p.horizon = m.horizon;
    if (m.kappa0) p.kappa0 = *m.kappa0;
    if (m.kappa1) p.kappa1 = *m.kappa1;
    if (m.alpha_override) p.alpha = *m.alpha_override;
    if (m.beta_override) p.beta = *m.beta_override;
    if (!(p.kappa0 >= 1.0)) sc.fail_at("model.kappa0", "kappa0 must be >= 1");
    if (!(p.kappa1 > 0.0)) sc.fail_at("model.kappa1", "kappa1 must be positive");
    if (!(p.alpha > 0.0 && p.alpha <= 1.0)) sc.fail_at("model.alpha_override", "alpha must lie in (0, 1]");
    if (!(p.beta >= 0.0 && p.beta <= 1.0)) sc.fail_at("model.beta_override", "beta must lie in [0, 1]");
    if (m.mollify) {
        if (!(*m.mollify > 0.0 && *m.mollify <= 1.0)) sc.fail_at("model.mollify", "mollification radius must lie in (0, 1]");
        p = mollified(p, *m.mollify);
    }
    return p;
}

inline std::vector<Vec> to_points(const std::vector<std::vector<double>>& raw) {
    std::vector<Vec> out;
    for (const auto& p : raw) {
        Vec v(static_cast<int>(p.size()));
        for (std::size_t i = 0; i < p.size(); ++i) v[static_cast<int>(i)] = p[i];
        out.push_back(v);
    }
    return out;
}

inline Vec to_vec(const std::vector<double>& p) {
    Vec v(static_cast<int>(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) v[static_cast<int>(i)] = p[i];
    return v;
}

inline GridSpec grid_spec(const Scenario& sc, const std::vector<double>* durations = nullptr, int points = 0) {
    GridSpec gs;
    gs.s = sc.grid.s;
    gs.durations = durations ? *durations : sc.grid.durations;
    gs.starts = to_points(sc.grid.starts);
    gs.half_width = sc.grid.half_width;
    gs.points = points > 0 ? points : sc.grid.points;
    return gs;
}

/// Structural checks that must fail with exit code 2 before any numerics run.
inline void validate_scenario(const Scenario& sc) {
    const ProblemSpec spec = build_problem(sc);
    const int d = spec.dimension;
    if (sc.threads < 0) sc.fail_at("scenario.threads", "threads must be >= 0");
    for (const auto& step : sc.pipeline)
        if (!known_steps().count(step)) sc.fail_at("scenario.pipeline", "unknown pipeline step '" + step + "'");
    if (sc.grid.durations.empty()) sc.fail_at("grid.durations", "empty grid: no durations");
    if (sc.grid.starts.empty()) sc.fail_at("grid.starts", "empty grid: no start points");
    if (sc.grid.points < 2) sc.fail_at("grid.points", "grid needs at least two lattice points per axis");
    if (!(sc.grid.half_width > 0.0)) sc.fail_at("grid.half_width", "half_width must be positive");
    for (double tau : sc.grid.durations)
        if (!(tau > 0.0) || tau > spec.horizon + 1e-12)
            sc.fail_at("grid.durations", "durations must lie in (0, horizon]");
    for (const auto& p : sc.grid.starts)
        if (static_cast<int>(p.size()) != d) sc.fail_at("grid.starts", "start point has wrong dimension");
    for (const auto& p : sc.bounds.kernel_starts)
        if (static_cast<int>(p.size()) != d) sc.fail_at("bounds.kernel_starts", "start point has wrong dimension");
    for (double e : sc.flow.eps)
        if (!(e > 0.0 && e <= 1.0)) sc.fail_at("flow.eps", "mollification radii must lie in (0, 1]");
    if (sc.flow.steps < 1) sc.fail_at("flow.steps", "flow steps must be >= 1");
    static const std::set<std::string> methods{"frozen", "series", "oracle", "exact"};
    if (!methods.count(sc.density.method)) sc.fail_at("density.method", "unknown density method '" + sc.density.method + "'");
    if (!sc.bounds.source.empty() && !methods.count(sc.bounds.source))
        sc.fail_at("bounds.source", "unknown density source '" + sc.bounds.source + "'");
    if (!sc.bounds.derivative_source.empty() && !methods.count(sc.bounds.derivative_source))
        sc.fail_at("bounds.derivative_source", "unknown density source '" + sc.bounds.derivative_source + "'");
    if (!sc.holder.source.empty() && !methods.count(sc.holder.source))
        sc.fail_at("holder.source", "unknown density source '" + sc.holder.source + "'");
    if (sc.density.N < 0) sc.fail_at("density.N", "N must be >= 0");
    if (sc.density.time_nodes < 1 || sc.density.space_nodes < 2 || sc.density.flow_steps < 1)
        sc.fail_at("density.time_nodes", "quadrature sizes must be positive");
    if (sc.oracle.paths < 1 || sc.oracle.steps < 1) sc.fail_at("oracle.paths", "oracle needs paths, steps >= 1");
    if (sc.bounds.ladder.empty()) sc.fail_at("bounds.ladder", "empty lambda ladder");
    for (const auto& t : sc.bounds.targets) {
        if (!known_targets().count(t)) sc.fail_at("bounds.targets", "unknown bounds target '" + t + "'");
        if (t == "hess_x" && !(spec.beta > 0.0))
            sc.fail_at("bounds.targets",
                       "precondition: the second-order derivative estimate (hess_x) requires beta in (0,1], got beta=" +
                           detail::format_number(spec.beta));
        if (t == "grad_y" && sc.bounds.require_grad_sigma && !spec.grad_sigma)
            sc.fail_at("bounds.targets",
                       "precondition: the gradient estimate in y (grad_y) requires a bounded grad_sigma; set "
                       "require_grad_sigma = false to probe without it");
    }
    if (sc.bounds.derivative_durations.size() < 2)
        sc.fail_at("bounds.derivative_durations", "need at least two durations for the exponent regression");
    if (sc.chain.x.size() != static_cast<std::size_t>(d) || sc.chain.y.size() != static_cast<std::size_t>(d))
        sc.fail_at("chain.x", "chain end points have wrong dimension");
    if (!(sc.chain.s < sc.chain.t)) sc.fail_at("chain.t", "chain needs s < t");
    if (sc.bounds.ck_times.size() != 3 || !(sc.bounds.ck_times[0] < sc.bounds.ck_times[1] &&
                                            sc.bounds.ck_times[1] < sc.bounds.ck_times[2]))
        sc.fail_at("bounds.ck_times", "ck_times must be [s, r, t] with s < r < t");
    for (double tau : sc.holder.durations)
        if (!(tau > 0.0) || tau > spec.horizon + 1e-12)
            sc.fail_at("holder.durations", "durations must lie in (0, horizon]");
    for (const auto& f : sc.holder.forms) {
        static const std::set<std::string> forms{"grad_x.x", "grad_x.y", "hess_x.x", "grad_y.y"};
        if (!forms.count(f)) sc.fail_at("holder.forms", "unknown holder form '" + f + "'");
    }
}

}  // namespace parametrix
