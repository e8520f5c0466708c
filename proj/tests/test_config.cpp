#include "pipeline.hpp"

#include <gtest/gtest.h>

using namespace parametrix;

namespace {

ConfigError config_error(const std::string& text) {
    try {
        (void)parse_scenario(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return ConfigError("none", 0, 0);
}

ConfigError validation_error(const std::string& text) {
    try {
        validate_scenario(parse_scenario(text));
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return ConfigError("none", 0, 0);
}

std::string scenario_dir() { return PARAMETRIX_SOURCE_DIR "/scenarios"; }

}  // namespace

TEST(ConfigParser, ValuesAndComments) {
    const ConfigTable t = parse_config_text(
        "# comment\n[a]\nx = 1.5 # trailing\nflag = true\nname = \"hi there\"\nlist = [1, 2, 3]\n"
        "pts = [[0, 1], [2, 3]]\nwords = [\"u\", \"v\"]\n");
    const ConfigSection* a = t.section("a");
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->find("x")->value.as_number(), 1.5);
    EXPECT_TRUE(a->find("flag")->value.as_bool());
    EXPECT_EQ(a->find("name")->value.as_string(), "hi there");
    EXPECT_EQ(a->find("list")->value.as_numbers(), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(a->find("pts")->value.as_points()[1], (std::vector<double>{2, 3}));
    EXPECT_EQ(a->find("words")->value.as_strings(), (std::vector<std::string>{"u", "v"}));
    EXPECT_EQ(a->find("x")->line, 3);
}

TEST(ConfigParser, SyntaxErrorsCarryPosition) {
    ConfigError e = config_error("[model]\npreset = ou\n");
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 10);
    e = config_error("[model]\ndimension = 1\ndimension = 2\n");
    EXPECT_EQ(e.line(), 3);
    e = config_error("[model\n");
    EXPECT_EQ(e.line(), 1);
    e = config_error("[model]\nx = [1, 2\n");
    EXPECT_EQ(e.line(), 2);
    e = config_error("preset = \"ou\"\n");
    EXPECT_EQ(e.line(), 1);
}

TEST(ConfigParser, UnknownKeysAndSections) {
    ConfigError e = config_error("[model]\npreset = \"ou\"\ndimensoin = 2\n");
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 1);
    EXPECT_NE(std::string(e.what()).find("dimensoin"), std::string::npos);
    e = config_error("[modle]\n");
    EXPECT_EQ(e.line(), 1);
}

TEST(ConfigParser, TypeMismatch) {
    const ConfigError e = config_error("[grid]\npoints = \"many\"\n");
    EXPECT_EQ(e.line(), 2);
}

TEST(Scenario, DefaultRoundTrip) {
    const Scenario sc;
    EXPECT_EQ(parse_scenario(serialize_scenario(sc)), sc);
}

TEST(Scenario, ModifiedRoundTrip) {
    Scenario sc;
    sc.name = "custom";
    sc.seed = 99;
    sc.model.preset = "custom";
    sc.model.drift = {"1 - 0.5*x1"};
    sc.model.diffusion = {"1 + 0.25*min(abs(x1), 1)"};
    sc.model.kappa0 = 1.6;
    sc.model.mollify = 0.5;
    sc.grid.starts = {{0.5}};
    sc.bounds.kernel_starts = {{0.0}};
    sc.holder.durations = {0.1, 0.4};
    sc.holder.points = 7;
    const Scenario back = parse_scenario(serialize_scenario(sc));
    EXPECT_EQ(back, sc);
    EXPECT_EQ(serialize_scenario(back), serialize_scenario(sc));
}

TEST(Scenario, BundledScenariosRoundTripAndValidate) {
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(scenario_dir())) {
        if (entry.path().extension() != ".toml") continue;
        const Scenario sc = load_scenario(entry.path().string());
        EXPECT_NO_THROW(validate_scenario(sc)) << entry.path();
        EXPECT_EQ(parse_scenario(serialize_scenario(sc)), sc) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 5);
}

TEST(Scenario, ValidationErrorsPointAtKeys) {
    ConfigError e = validation_error("[grid]\ndurations = []\n");
    EXPECT_EQ(e.line(), 2);
    e = validation_error(
        "[model]\npreset = \"holder-drift\"\nbeta = 0\n[bounds]\ntargets = [\"two_sided\", \"hess_x\"]\n");
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(std::string(e.what()).find("beta=0"), std::string::npos);
    e = validation_error("[model]\npreset = \"rough-sigma\"\n[bounds]\ntargets = [\"grad_y\"]\n");
    EXPECT_EQ(e.line(), 4);
    e = validation_error("[density]\nmethod = \"magic\"\n");
    EXPECT_EQ(e.line(), 2);
    e = validation_error("[model]\npreset = \"spline\"\n");
    EXPECT_EQ(e.line(), 2);
    e = validation_error("[bounds]\nck_times = [0, 1, 0.5]\n");
    EXPECT_EQ(e.line(), 2);
    e = validation_error("[holder]\nforms = [\"grad_z.q\"]\n");
    EXPECT_EQ(e.line(), 2);
    EXPECT_THROW(validate_scenario(parse_scenario("[model]\ndimension = 2\n")), ArgumentError);
}

TEST(Scenario, CustomExpressionsBuild) {
    const Scenario sc = parse_scenario(
        "[model]\npreset = \"custom\"\ndrift = [\"1 - 0.5*x1\"]\ndiffusion = [\"1 + 0.25*min(abs(x1), 1)\"]\n");
    const ProblemSpec p = build_problem(sc);
    EXPECT_NEAR(p.b(0.0, Vec::Constant(1, 2.0))[0], 0.0, 1e-15);
    EXPECT_NEAR(p.sigma(0.0, Vec::Constant(1, -3.0))(0, 0), 1.25, 1e-15);
    const ConfigError e =
        validation_error("[model]\npreset = \"custom\"\ndrift = [\"1 + * x1\"]\ndiffusion = [\"1\"]\n");
    EXPECT_EQ(e.line(), 3);
}

TEST(Pipeline, ReportIndependentOfWorkerCount) {
    Scenario sc = load_scenario(scenario_dir() + "/zero-drift-1d.toml");
    auto run = [&](int threads) {
        set_worker_count(static_cast<std::size_t>(threads));
        const cli::Pipeline p(sc);
        const auto r = p.bounds(sc.bounds.targets);
        const auto c = cli::Pipeline::chain_json(p.chain(0.0, 1.0, to_vec({0.0}), to_vec({2.0})));
        set_worker_count(1);
        return r.report.dump() + c.dump();
    };
    EXPECT_EQ(run(1), run(4));
}

TEST(Pipeline, ZeroDriftBoundsPass) {
    const cli::Pipeline p(load_scenario(scenario_dir() + "/zero-drift-1d.toml"));
    const auto r = p.bounds(p.scenario().bounds.targets);
    EXPECT_TRUE(r.pass) << r.report.dump(2);
}
