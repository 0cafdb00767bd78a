#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sqhj/experiment.hpp"

using namespace sqhj;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const fs::path dir = fs::temp_directory_path() / "sqhj_cli_tests" / (std::string(info->test_suite_name()) + "_" +
                                                                         info->name() + "_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_path(const std::string& name) { return std::string(SQHJ_SOURCE_DIR) + "/configs/" + name; }

std::string expect_config_error(const std::string& text) {
    try {
        parse_config(text, "t.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no ConfigError for:\n" << text;
    return {};
}

const char* kHolder = R"(problem:
  key: holder_1d
  params: {m: 3}
grid:
  n: 1601
solve:
  lambda: 1
holder:
  band: 0.3
seed: 3
)";

}  // namespace

TEST(ParseConfig, MinimalConfigTakesDefaults) {
    const auto c = parse_config("problem:\n  key: holder_1d\n  params: {m: 3}\n");
    EXPECT_EQ(c.key, "holder_1d");
    EXPECT_EQ(c.n, 201);
    EXPECT_EQ(c.output, "out");
    EXPECT_FALSE(c.solve || c.holder || c.barrier || c.ergodic || c.cell || c.homogenize);
}

TEST(ParseConfig, MissingExponentNamesTheFieldAndLine) {
    const auto msg = expect_config_error("problem:\n  key: holder_1d\n  params:\n    a: 1\n");
    EXPECT_NE(msg.find("problem.params.m"), std::string::npos) << msg;
    EXPECT_EQ(msg.rfind("t.yaml:4:", 0), 0u) << msg;
}

TEST(ParseConfig, UnknownFieldsAreRejectedWithTheirLine) {
    const auto msg = expect_config_error("problem:\n  key: holder_1d\n  params: {m: 3}\nsolve:\n  lamda: 2\n");
    EXPECT_NE(msg.find("solve.lamda"), std::string::npos) << msg;
    EXPECT_EQ(msg.rfind("t.yaml:5:", 0), 0u) << msg;
    EXPECT_NE(expect_config_error("problem: {key: holder_1d, params: {m: 3}}\nplots: 1\n").find("plots"), std::string::npos);
}

TEST(ParseConfig, MalformedYamlIsLineAnchored) {
    const auto msg = expect_config_error("problem:\n  key: [holder_1d\n");
    EXPECT_EQ(msg.rfind("t.yaml:", 0), 0u) << msg;
}

TEST(ParseConfig, RejectsOutOfRangeValues) {
    const std::string head = "problem: {key: holder_1d, params: {m: 3}}\n";
    EXPECT_NE(expect_config_error("problem: {key: nowhere, params: {m: 3}}\n").find("nowhere"), std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: holder_1d, params: {m: 1.5}}\n").find("m > 2"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "grid: {n: 4}\n").find("grid.n"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "solve: {lambda: -1}\n").find("solve.lambda"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "solve: {lambda: 0}\n").find("lambda + min c"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "holder: {band: 0}\n").find("holder.band"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "ergodic: {lambdas: [0.1, 0.2]}\n").find("ergodic.lambdas"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "grid: {n: 16}\nergodic: {anchor: 16}\n").find("ergodic.anchor"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "scheme: {cfl: -1}\n").find("cfl"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "output: ''\n").find("output"), std::string::npos);
    EXPECT_NE(expect_config_error(head + "grid: {n: many}\n").find("grid.n"), std::string::npos);
}

TEST(ParseConfig, RejectsAnalysesThatDoNotApply) {
    EXPECT_NE(expect_config_error("problem: {key: cell_1d, params: {m: 3}}\nsolve: {}\n").find("bounded"), std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: dirichlet_1d, params: {m: 3}}\nergodic: {}\n").find("ergodic"),
              std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: holder_1d, params: {m: 3, c: 1}}\nergodic: {}\n").find("c = 0"),
              std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: holder_1d, params: {m: 3}}\ncell: {p: [0, 1]}\n").find("periodic"),
              std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: holder_1d, params: {m: 3}}\nhomogenize: {}\n").find("oscillatory_1d"),
              std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: oscillatory_1d, params: {m: 3, a: 1}}\nhomogenize: {table: oracle}\n")
                  .find("a = 0"),
              std::string::npos);
    EXPECT_NE(expect_config_error("problem: {key: oscillatory_1d, params: {m: 3}}\nhomogenize: {nodes_per_period: 8}\n")
                  .find("nodes_per_period"),
              std::string::npos);
}

TEST(ConfigRoundTrip, ShippedConfigsAreFixedPoints) {
    for (const char* name : {"holder_m3.yaml", "m_sweep.yaml", "ergodic_m3.yaml", "cell_1d.yaml", "homogenize_1d.yaml"}) {
        const auto c = load_config(config_path(name));
        const auto again = parse_config(serialize_config(c));
        EXPECT_EQ(c, again) << name;
        EXPECT_EQ(serialize_config(again), serialize_config(c)) << name;
    }
}

TEST(ConfigRoundTrip, RandomConfigsSurviveSerialization) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentConfig c;
        c.key = trial % 2 ? "holder_1d" : "box_2d";
        c.params = {{"m", 2.0 + 3.0 * u(rng) + 1e-3}, {"f0", u(rng) * 7.0}, {"a", 0.5 + u(rng)}};
        c.n = 8 + static_cast<int>(u(rng) * 300);
        c.scheme.tolerance = 1e-12 + u(rng) * 1e-8;
        c.solve = SolveConfig{0.1 + u(rng)};
        if (trial % 3 == 0) c.holder = HolderConfig{0.05 + 0.9 * u(rng), 0.5 * u(rng)};
        if (trial % 4 == 0) {
            ErgodicConfig e;
            e.lambdas = {0.7 * u(rng) + 0.3, 0.2 * u(rng) + 0.01};
            e.fit_band = u(rng);
            c.ergodic = e;
        }
        c.seed = rng();
        c.workers = static_cast<unsigned>(u(rng) * 8);
        c.output = "out/" + std::to_string(trial);
        const auto back = parse_config(serialize_config(c));
        ASSERT_EQ(back, c) << serialize_config(c);
    }
}

TEST(RunExperiment, HolderConfigWritesModulusAndExponent) {
    const auto dir = scratch("run");
    const auto summary = run_experiment(parse_config(kHolder), dir);
    ASSERT_TRUE(summary.ok());
    EXPECT_EQ(summary.exit_code(), 0);
    EXPECT_NEAR(summary.metrics.at("alpha_hat"), 0.5, 0.1);
    for (const char* f : {"solution.csv", "solve_record.csv", "modulus.csv", "holder.csv", "config.yaml", "manifest.yaml"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(slurp(dir / "modulus.csv").substr(0, 12), "scale,omega\n");
    EXPECT_EQ(parse_config(slurp(dir / "config.yaml")), parse_config(kHolder));
    const YAML::Node manifest = YAML::LoadFile((dir / "manifest.yaml").string());
    EXPECT_EQ(manifest["status"].as<std::string>(), "ok");
    EXPECT_EQ(manifest["analyses"].size(), 2u);
}

TEST(RunExperiment, ErgodicConfigWritesSweepAndRecord) {
    const auto dir = scratch("run");
    auto cfg = load_config(config_path("ergodic_m3.yaml"));
    cfg.n = 201;
    const auto summary = run_experiment(cfg, dir);
    ASSERT_TRUE(summary.ok()) << summary.analyses.front().message;
    const auto sweep = slurp(dir / "ergodic_sweep.csv");
    EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "lambda,c,corrector_change,discount_min,discount_max,alpha");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 11);
    EXPECT_NE(slurp(dir / "ergodic_result.csv").find("\nc,"), std::string::npos);
    EXPECT_GT(summary.metrics.at("ergodic_c"), 0.0);
}

TEST(RunExperiment, RepeatedRunsGiveIdenticalTables) {
    auto cfg = parse_config(std::string(kHolder) + "barrier: {n: 64, centers: 20}\n");
    const auto a = scratch("a"), b = scratch("b");
    run_experiment(cfg, a);
    cfg.workers = 4;
    run_experiment(cfg, b);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        if (entry.path().extension() != ".csv") continue;
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
        ++compared;
    }
    EXPECT_GE(compared, 6u);
}

TEST(RunExperiment, FailureKeepsPartialArtifactsAndMarksTheManifest) {
    const auto dir = scratch("fail");
    const auto cfg = parse_config(std::string(kHolder) + "scheme: {max_iterations: 1}\n");
    const auto summary = run_experiment(cfg, dir);
    EXPECT_FALSE(summary.ok());
    EXPECT_EQ(summary.exit_code(), 1);
    ASSERT_EQ(summary.analyses.size(), 2u);
    EXPECT_EQ(summary.analyses[0].status, "failed");
    EXPECT_EQ(summary.analyses[1].status, "skipped");
    const YAML::Node manifest = YAML::LoadFile((dir / "manifest.yaml").string());
    EXPECT_EQ(manifest["status"].as<std::string>(), "failed");
    EXPECT_EQ(manifest["analyses"][0]["status"].as<std::string>(), "failed");
    EXPECT_TRUE(fs::exists(dir / "config.yaml"));
}

TEST(RunSweep, ExponentTracksTheFormulaAcrossM) {
    const auto dir = scratch("m");
    const auto members = run_sweep(kHolder, "t.yaml", "m", {2.5, 3.0, 4.0}, dir, 3);
    ASSERT_EQ(members.size(), 3u);
    for (const auto& m : members) {
        ASSERT_TRUE(m.ok()) << m.error;
        EXPECT_NEAR(m.summary.metrics.at("alpha_hat"), (m.value - 2.0) / (m.value - 1.0), 0.1) << "m=" << m.value;
        EXPECT_TRUE(fs::exists(dir / m.directory / "holder.csv"));
    }
    std::istringstream summary(slurp(dir / "sweep_summary.csv"));
    std::string line;
    std::getline(summary, line);
    EXPECT_EQ(line, "m,status,alpha_hat,K_hat,ergodic_c,eps_error,solve_residual");
    int rows = 0;
    while (std::getline(summary, line)) ++rows;
    EXPECT_EQ(rows, 3);
}

TEST(RunSweep, EpsAxisProducesAnErrorColumn) {
    const auto dir = scratch("eps");
    const auto text = slurp(config_path("homogenize_1d.yaml"));
    const auto members = run_sweep(text, "h.yaml", "eps", {0.25, 0.125}, dir, 2);
    ASSERT_TRUE(members[0].ok() && members[1].ok());
    const double e0 = members[0].summary.metrics.at("eps_error"), e1 = members[1].summary.metrics.at("eps_error");
    EXPECT_GT(e0, 0.0);
    EXPECT_LT(e1, 1.2 * e0);
}

TEST(RunSweep, RejectsEmptyValuesAndBadAxes) {
    const auto dir = scratch("bad");
    EXPECT_THROW(run_sweep(kHolder, "t.yaml", "m", {}, dir, 1), ConfigError);
    EXPECT_THROW(run_sweep(kHolder, "t.yaml", "zeta", {1.0}, dir, 1), ConfigError);
    EXPECT_THROW(run_sweep(kHolder, "t.yaml", "holder.nothing", {1.0}, dir, 1), ConfigError);
    EXPECT_THROW(run_sweep(kHolder, "t.yaml", "m", {3.0, 1.5}, dir, 1), ConfigError);
    EXPECT_FALSE(fs::exists(dir / "sweep_summary.csv"));
}

TEST(EmitPlotdata, ModulusBecomesLogLogSeries) {
    const auto dir = scratch("run");
    run_experiment(parse_config(kHolder), dir);
    const auto target = emit_plotdata(dir, "modulus", dir / "plot");
    std::istringstream src(slurp(dir / "modulus.csv")), out(slurp(target));
    std::string a, b;
    std::getline(src, a);
    std::getline(out, b);
    EXPECT_EQ(b, "log_s,log_omega");
    int rows = 0;
    while (std::getline(src, a) && std::getline(out, b)) {
        const double s = std::stod(a.substr(0, a.find(','))), w = std::stod(a.substr(a.find(',') + 1));
        EXPECT_NEAR(std::stod(b.substr(0, b.find(','))), std::log(s), 1e-12);
        EXPECT_NEAR(std::stod(b.substr(b.find(',') + 1)), std::log(w), 1e-12);
        ++rows;
    }
    EXPECT_GT(rows, 3);
    EXPECT_EQ(YAML::LoadFile((dir / "plot" / "modulus.yaml").string())["source"].as<std::string>(), "modulus.csv");
}

TEST(EmitPlotdata, EffectiveAndErgodicSeriesAreCopiedColumns) {
    const auto dir = scratch("cell");
    auto cfg = load_config(config_path("cell_1d.yaml"));
    cfg.n = 64;
    cfg.cell->p = {-1.0, 0.0, 1.0};
    ASSERT_TRUE(run_experiment(cfg, dir).ok());
    const auto series = slurp(emit_plotdata(dir, "effective", dir / "plot"));
    EXPECT_EQ(series.substr(0, 7), "p,Fbar\n");
    EXPECT_EQ(std::count(series.begin(), series.end(), '\n'), 4);
    EXPECT_THROW(emit_plotdata(dir, "ergodic", dir / "plot"), SolverError);
}

TEST(EmitPlotdata, RejectsUnknownKindsAndMissingArtifacts) {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    EXPECT_THROW(emit_plotdata(dir, "histogram", dir / "plot"), ConfigError);
    for (const char* kind : {"modulus", "sweep", "ergodic", "effective"})
        EXPECT_THROW(emit_plotdata(dir, kind, dir / "plot"), SolverError) << kind;
}

class CliBinary : public ::testing::Test {
protected:
    void SetUp() override {
        const char* p = std::getenv("SQHJ_CLI");
        if (!p) GTEST_SKIP() << "SQHJ_CLI is not set";
        binary = p;
    }
    int call(const std::string& args, const fs::path& log) const {
        const std::string cmd = "\"" + binary + "\" " + args + " > \"" + log.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string binary;
};

TEST_F(CliBinary, MissingExponentExitsWithTwoAndNamesTheField) {
    const auto dir = scratch("x");
    fs::create_directories(dir);
    EXPECT_EQ(call("run --config " + config_path("malformed_missing_m.yaml") + " --out " + dir.string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("problem.params.m"), std::string::npos);
    EXPECT_EQ(call("validate-config --config " + config_path("malformed_missing_m.yaml"), dir / "log"), 2);
}

TEST_F(CliBinary, RunSucceedsAndValidateConfigPrintsTheNormalForm) {
    const auto dir = scratch("x");
    fs::create_directories(dir);
    EXPECT_EQ(call("run --config " + config_path("holder_m3.yaml") + " --out " + (dir / "run").string() + " --seed 5",
                   dir / "log"),
              0);
    EXPECT_NE(slurp(dir / "log").find("alpha_hat"), std::string::npos);
    EXPECT_EQ(parse_config(slurp(dir / "run" / "config.yaml")).seed, 5u);
    EXPECT_EQ(call("validate-config --config " + config_path("holder_m3.yaml"), dir / "norm.yaml"), 0);
    EXPECT_EQ(parse_config(slurp(dir / "norm.yaml")), load_config(config_path("holder_m3.yaml")));
    EXPECT_EQ(call("emit-plotdata " + (dir / "run").string() + " modulus", dir / "log"), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "plot" / "modulus.csv"));
}

TEST_F(CliBinary, ExitCodesDistinguishFailureKinds) {
    const auto dir = scratch("x");
    fs::create_directories(dir);
    EXPECT_EQ(call("sweep --config " + config_path("m_sweep.yaml") + " --axis m --values \"\" --out " + dir.string(),
                   dir / "log"),
              2);
    EXPECT_EQ(call("sweep --config " + config_path("m_sweep.yaml") + " --axis m --values 3,x --out " + dir.string(),
                   dir / "log"),
              2);
    EXPECT_EQ(call("run", dir / "log"), 2);
    EXPECT_EQ(call("launch --config x", dir / "log"), 2);
    EXPECT_EQ(call("run --config " + (dir / "absent.yaml").string(), dir / "log"), 2);
    EXPECT_EQ(call("emit-plotdata " + dir.string() + " modulus", dir / "log"), 1);
    EXPECT_EQ(call("emit-plotdata " + dir.string() + " pie", dir / "log"), 2);
    std::ofstream(dir / "bad_solve.yaml") << kHolder << "scheme: {max_iterations: 1}\n";
    EXPECT_EQ(call("run --config " + (dir / "bad_solve.yaml").string() + " --out " + (dir / "r").string(), dir / "log"), 1);
    EXPECT_TRUE(fs::exists(dir / "r" / "manifest.yaml"));
}

TEST_F(CliBinary, SweepWritesOneDirectoryPerValue) {
    const auto dir = scratch("x");
    fs::create_directories(dir);
    EXPECT_EQ(call("sweep --config " + config_path("m_sweep.yaml") + " --axis grid.n --values 1601,2001 --workers 2 --out " +
                       (dir / "s").string(),
                   dir / "log"),
              0);
    EXPECT_TRUE(fs::exists(dir / "s" / "grid_n_0" / "holder.csv"));
    EXPECT_TRUE(fs::exists(dir / "s" / "grid_n_1" / "holder.csv"));
    EXPECT_EQ(call("emit-plotdata " + (dir / "s").string() + " sweep", dir / "log"), 0);
    EXPECT_EQ(slurp(dir / "s" / "plot" / "sweep.csv").substr(0, 17), "grid_n,alpha_hat,");
}
