// parametrix: command-line front end.
//
// Exit codes: 0 all verdicts PASS, 1 some verdict FAIL, 2 parse or
// precondition error (with line/column for config errors), 3 numerical failure.

#include "pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace parametrix;
using parametrix::cli::json;
using parametrix::cli::Pipeline;

namespace {

struct Globals {
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos) throw std::exception();
        } catch (...) {
            throw ArgumentError(std::string(flag) + ": cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw ArgumentError(std::string(flag) + ": empty list");
    return out;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

Scenario load(const Globals& g, const std::string& alt_path = "") {
    const std::string path = !alt_path.empty() ? alt_path : g.config;
    Scenario sc = path.empty() ? Scenario{} : load_scenario(path);
    if (g.seed) sc.seed = *g.seed;
    if (g.threads) sc.threads = *g.threads;
    set_worker_count(static_cast<std::size_t>(std::max(0, sc.threads)));
    return sc;
}

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

void write_json(const Globals& g, const std::string& name, const json& j) {
    std::ofstream os(out_path(g, name));
    os << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
}

Vec point_or(const std::string& text, const char* flag, const std::vector<double>& fallback) {
    return to_vec(text.empty() ? fallback : parse_list(text, flag));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametrix: transition-density bounds for SDEs with Hoelder drift"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "scenario config file");
    app.add_option("--out-dir", g.out_dir, "directory for reports and tables");
    app.add_option("--seed", g.seed, "override the scenario seed");
    app.add_option("--threads", g.threads, "worker threads (0: hardware concurrency)");

    auto* validate = app.add_subcommand("validate", "parse the scenario and check the model assumptions");

    auto* flow = app.add_subcommand("flow", "dump the deterministic flow as CSV and check flow equivalence");
    double flow_s = 0.0, flow_t = 1.0;
    std::string flow_x, flow_out = "flow.csv";
    std::optional<double> flow_eps;
    flow->add_option("--s", flow_s, "start time");
    flow->add_option("--t", flow_t, "end time (t < s integrates backward)");
    flow->add_option("--x", flow_x, "start point, comma separated");
    flow->add_option("--eps", flow_eps, "mollification radius (default: raw drift)");
    flow->add_option("--out", flow_out, "CSV file name");

    auto* simulate = app.add_subcommand("simulate", "write or read a PXCLOUD1 sample cloud");
    double sim_s = 0.0, sim_t = 1.0;
    std::string sim_x, sim_out = "cloud.pxc", sim_read;
    std::optional<int> sim_paths, sim_steps;
    simulate->add_option("--s", sim_s, "start time");
    simulate->add_option("--t", sim_t, "end time");
    simulate->add_option("--x", sim_x, "start point, comma separated");
    simulate->add_option("--paths", sim_paths, "number of paths");
    simulate->add_option("--steps", sim_steps, "Euler steps per path");
    simulate->add_option("--out", sim_out, "output file name");
    simulate->add_option("--read", sim_read, "summarize an existing cloud file instead");

    auto* density = app.add_subcommand("density", "evaluate a density on the scenario grid");
    std::string den_scenario, den_method, den_grid = "coarse", den_out = "density.csv";
    std::optional<int> den_N;
    density->add_option("--scenario", den_scenario, "scenario config (defaults to --config)");
    density->add_option("--method", den_method, "frozen | series | oracle | exact")
        ->check(CLI::IsMember({"frozen", "series", "oracle", "exact"}));
    density->add_option("--N", den_N, "series truncation");
    density->add_option("--grid", den_grid, "coarse | fine | CSV file with columns s,x*,t,y*");
    density->add_option("--out", den_out, "CSV file name");

    auto* bounds = app.add_subcommand("bounds", "fit Gaussian envelopes and write bounds.json");
    std::string bnd_targets;
    bounds->add_option("--targets", bnd_targets, "comma separated targets (default: scenario)");

    auto* chain = app.add_subcommand("chain", "build a chain certificate (chain.json, chain.csv)");
    std::optional<double> ch_s, ch_t;
    std::string ch_x, ch_y;
    chain->add_option("--s", ch_s, "start time");
    chain->add_option("--t", ch_t, "end time");
    chain->add_option("--x", ch_x, "start point");
    chain->add_option("--y", ch_y, "end point");

    auto* holder = app.add_subcommand("holder", "Hoelder continuity of derivatives (holder.json)");
    std::string h_forms;
    std::optional<double> h_gamma;
    holder->add_option("--forms", h_forms, "comma separated forms: grad_x.x, grad_x.y, hess_x.x, grad_y.y");
    holder->add_option("--gamma", h_gamma, "Hoelder exponent");

    auto* report = app.add_subcommand("report", "run the scenario pipeline and write report.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*validate) {
            const Pipeline p(load(g));
            const auto r = p.validate();
            write_json(g, "validate.json", r.report);
            return r.pass ? 0 : 1;
        }
        if (*flow) {
            const Pipeline p(load(g));
            const Vec x = point_or(flow_x, "--x", p.scenario().grid.starts.front());
            if (x.size() != p.spec().dimension) throw ArgumentError("--x: wrong dimension");
            if (flow_eps && !(*flow_eps > 0.0 && *flow_eps <= 1.0)) throw ArgumentError("--eps must lie in (0, 1]");
            {
                std::ofstream os(out_path(g, flow_out));
                write_flow_csv(os, p.trajectory(flow_s, flow_t, x, flow_eps));
            }
            auto r = p.flow_equivalence_step();
            r.report["csv"] = flow_out;
            write_json(g, "flow.json", r.report);
            return r.pass ? 0 : 1;
        }
        if (*simulate) {
            if (!sim_read.empty()) {
                std::ifstream is(sim_read, std::ios::binary);
                if (!is) throw ArgumentError("cannot open cloud file '" + sim_read + "'");
                std::cout << Pipeline::cloud_summary(read_cloud(is)).dump(2) << "\n";
                return 0;
            }
            const Pipeline p(load(g));
            const auto& sc = p.scenario();
            const Vec x = point_or(sim_x, "--x", sc.grid.starts.front());
            const SampleCloud c = p.simulate(sim_s, sim_t, x, static_cast<std::size_t>(sim_paths.value_or(sc.oracle.paths)),
                                             sim_steps.value_or(sc.oracle.steps));
            {
                std::ofstream os(out_path(g, sim_out), std::ios::binary);
                write_cloud(os, c);
            }
            json j = Pipeline::cloud_summary(c);
            j["file"] = sim_out;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*density) {
            Scenario sc = load(g, den_scenario);
            if (!den_method.empty()) sc.density.method = den_method;
            if (den_N) sc.density.N = *den_N;
            const Pipeline p(sc);
            std::vector<GridPoint> grid;
            if (den_grid == "coarse" || den_grid == "fine") {
                grid = p.density_grid(den_grid == "fine" ? 1 : 0);
            } else {
                std::ifstream is(den_grid);
                if (!is) throw ArgumentError("cannot open grid file '" + den_grid + "'");
                std::string line;
                std::getline(is, line);
                const int d = p.spec().dimension;
                int row = 1;
                while (std::getline(is, line)) {
                    ++row;
                    if (line.empty()) continue;
                    std::vector<double> v;
                    try {
                        v = parse_list(line, "--grid");
                    } catch (const ArgumentError& e) {
                        throw ConfigError(e.what(), row, 1);
                    }
                    if (static_cast<int>(v.size()) != 2 * d + 2)
                        throw ConfigError("expected " + std::to_string(2 * d + 2) + " columns", row, 1);
                    GridPoint gp;
                    gp.s = v[0];
                    gp.x = to_vec({v.begin() + 1, v.begin() + 1 + d});
                    gp.t = v[1 + d];
                    gp.y = to_vec({v.begin() + 2 + d, v.end()});
                    if (!(gp.s < gp.t)) throw ConfigError("need s < t", row, 1);
                    grid.push_back(gp);
                }
                if (grid.empty()) throw ArgumentError("--grid: empty grid file");
            }
            const DensityField field = cli::make_density(sc, p.spec(), sc.density.method);
            const auto rows = p.evaluate(field, grid);
            {
                std::ofstream os(out_path(g, den_out));
                Pipeline::write_density_csv(os, rows, field.provenance);
            }
            json j = p.density_summary(sc.density.method, rows);
            j["csv"] = den_out;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*bounds) {
            Scenario sc = load(g);
            if (!bnd_targets.empty()) sc.bounds.targets = split(bnd_targets);
            const Pipeline p(sc);
            const auto r = p.bounds(sc.bounds.targets);
            write_json(g, "bounds.json", r.report);
            return r.pass ? 0 : 1;
        }
        if (*chain) {
            Scenario sc = load(g);
            if (ch_s) sc.chain.s = *ch_s;
            if (ch_t) sc.chain.t = *ch_t;
            if (!ch_x.empty()) sc.chain.x = parse_list(ch_x, "--x");
            if (!ch_y.empty()) sc.chain.y = parse_list(ch_y, "--y");
            const Pipeline p(sc);
            const ChainCertificate c = p.chain(sc.chain.s, sc.chain.t, to_vec(sc.chain.x), to_vec(sc.chain.y));
            {
                std::ofstream os(out_path(g, "chain.csv"));
                Pipeline::write_chain_csv(os, c, sc.chain.s);
            }
            json j = Pipeline::chain_json(c);
            j["csv"] = "chain.csv";
            write_json(g, "chain.json", j);
            return c.pass() ? 0 : 1;
        }
        if (*holder) {
            Scenario sc = load(g);
            if (!h_forms.empty()) sc.holder.forms = split(h_forms);
            if (h_gamma) sc.holder.gamma = *h_gamma;
            const Pipeline p(sc);
            const auto r = p.holder(sc.holder.forms, sc.holder.gamma);
            write_json(g, "holder.json", r.report);
            return r.pass ? 0 : 1;
        }
        if (*report) {
            const Pipeline p(load(g));
            fs::create_directories(g.out_dir);
            const auto r = p.run(g.out_dir);
            write_json(g, "report.json", r.report);
            return r.pass ? 0 : 1;
        }
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
