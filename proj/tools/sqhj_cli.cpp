#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sqhj/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kAnalysisFailure = 1;
constexpr int kConfigError = 2;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sqhj::ConfigError(path + ": cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw sqhj::ConfigError("values: '" + item + "' is not a number");
        values.push_back(v);
    }
    if (values.empty()) throw sqhj::ConfigError("values: the sweep needs at least one value");
    return values;
}

void print_summary(const sqhj::RunSummary& s, const std::filesystem::path& dir) {
    std::cout << "output: " << dir.string() << "\n";
    for (const auto& a : s.analyses) {
        std::cout << "  " << a.name << ": " << a.status;
        if (!a.message.empty()) std::cout << " (" << a.message << ")";
        std::cout << "\n";
    }
    for (const auto& [k, v] : s.metrics) std::cout << "  " << k << " = " << sqhj::format_number(v) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-difference experiments for superquadratic Hamilton-Jacobi equations"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, values_text, artifact_dir, kind;
    unsigned workers = 0;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "Run the analyses requested by a configuration");
    run->add_option("--config", config_path, "YAML configuration")->required();
    run->add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* run_workers = run->add_option("--workers", workers, "Worker threads (0 = all cores)");
    auto* run_seed = run->add_option("--seed", seed, "Random seed (overrides the config)");

    auto* sweep = app.add_subcommand("sweep", "Run a configuration once per value of a scalar field");
    sweep->add_option("--config", config_path, "YAML configuration")->required();
    sweep->add_option("--axis", axis, "Registry parameter, n, lambda or a dotted field path")->required();
    sweep->add_option("--values", values_text, "Comma-separated values")->required();
    sweep->add_option("--out", out_dir, "Output directory (overrides the config)");
    sweep->add_option("--workers", workers, "Concurrent runs (0 = all cores)");
    auto* sweep_seed = sweep->add_option("--seed", seed, "Random seed (overrides the config)");

    auto* emit = app.add_subcommand("emit-plotdata", "Write plot-ready series from a run directory");
    emit->add_option("dir", artifact_dir, "Run directory")->required();
    emit->add_option("kind", kind, "modulus, sweep, ergodic or effective")->required();
    emit->add_option("--out", out_dir, "Destination (default DIR/plot)");

    auto* validate = app.add_subcommand("validate-config", "Check a configuration and print its normalized form");
    validate->add_option("--config", config_path, "YAML configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*validate) {
            std::cout << sqhj::serialize_config(sqhj::load_config(config_path));
            return kOk;
        }
        if (*run) {
            sqhj::ExperimentConfig cfg = sqhj::load_config(config_path);
            if (*run_workers) cfg.workers = workers;
            if (*run_seed) cfg.seed = seed;
            const std::filesystem::path dir = out_dir.empty() ? cfg.output : out_dir;
            const auto summary = sqhj::run_experiment(cfg, dir);
            print_summary(summary, dir);
            return summary.ok() ? kOk : kAnalysisFailure;
        }
        if (*sweep) {
            const std::string text = read_text(config_path);
            const auto values = parse_values(values_text);
            const std::filesystem::path dir = out_dir.empty() ? sqhj::parse_config(text, config_path).output : out_dir;
            const auto members = sqhj::run_sweep(text, config_path, axis, values, dir, workers,
                                                 *sweep_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
            bool ok = true;
            std::cout << "sweep over " << axis << " in " << dir.string() << "\n";
            for (const auto& m : members) {
                ok = ok && m.ok();
                std::cout << "  " << axis << " = " << sqhj::format_number(m.value) << ": " << (m.ok() ? "ok" : "failed");
                if (!m.error.empty()) std::cout << " (" << m.error << ")";
                for (const auto& [k, v] : m.summary.metrics) std::cout << " " << k << "=" << sqhj::format_number(v);
                std::cout << "\n";
            }
            return ok ? kOk : kAnalysisFailure;
        }
        if (*emit) {
            const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(artifact_dir) / "plot" : std::filesystem::path(out_dir);
            std::cout << sqhj::emit_plotdata(artifact_dir, kind, dir).string() << "\n";
            return kOk;
        }
    } catch (const sqhj::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kAnalysisFailure;
    }
    return kConfigError;
}
