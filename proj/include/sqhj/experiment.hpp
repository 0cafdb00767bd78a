#pragma once

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "barrier.hpp"
#include "config.hpp"
#include "ergodic.hpp"
#include "homogenization.hpp"
#include "parallel.hpp"
#include "regularity.hpp"
#include "solver.hpp"

namespace sqhj {

/** @brief Outcome of one analysis inside a run. */
struct AnalysisRecord {
    std::string name;
    /// "ok", "failed" or "skipped"
    std::string status;
    std::string message;
    std::vector<std::string> artifacts;
    double runtime = 0.0;
};

struct RunSummary {
    std::vector<AnalysisRecord> analyses;
    /// Headline numbers: alpha_hat, K_hat, ergodic_c, eps_error, solve_residual (when computed).
    std::map<std::string, double> metrics;

    bool ok() const {
        for (const auto& a : analyses)
            if (a.status != "ok") return false;
        return true;
    }
    int exit_code() const { return ok() ? 0 : 1; }
};

/// Two-column "quantity,value" record.
inline void write_record_csv(const std::vector<std::pair<std::string, double>>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "quantity,value\n";
    for (const auto& [k, v] : rows) out << k << "," << format_number(v) << "\n";
}

namespace detail {

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

/// Largest eigenvalue of the diffusion matrix over the grid.
inline double sup_diffusion(const ProblemSpec& spec, const Grid& g) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point x = g.node(k);
        const double a = spec.diffusion.a11(x);
        const double d = spec.dimension == 2 ? spec.diffusion.a22(x) : 0.0;
        const double b = spec.dimension == 2 ? spec.diffusion.a12(x) : 0.0;
        s = std::max(s, 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b));
    }
    return s;
}

class RunContext {
public:
    RunContext(const ExperimentConfig& c, std::filesystem::path dir) : cfg(c), out(std::move(dir)) {}

    std::string path(const std::string& name) const { return (out / name).string(); }

    template <class Fn>
    AnalysisRecord& step(const std::string& name, Fn&& fn) {
        AnalysisRecord rec;
        rec.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(rec);
            if (rec.status.empty()) rec.status = "ok";
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.message = e.what();
        }
        rec.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        summary.analyses.push_back(rec);
        return summary.analyses.back();
    }

    void skip(const std::string& name, const std::string& why) {
        summary.analyses.push_back({name, "skipped", why, {}, 0.0});
    }

    const ExperimentConfig& cfg;
    std::filesystem::path out;
    RunSummary summary;
};

inline void write_manifest(const RunContext& ctx) {
    YAML::Emitter e;
    e.SetDoublePrecision(6);
    e << YAML::BeginMap;
    e << YAML::Key << "config" << YAML::Value << "config.yaml";
    e << YAML::Key << "status" << YAML::Value << (ctx.summary.ok() ? "ok" : "failed");
    e << YAML::Key << "analyses" << YAML::Value << YAML::BeginSeq;
    for (const auto& a : ctx.summary.analyses) {
        e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << a.name << YAML::Key << "status" << YAML::Value
          << a.status;
        if (!a.message.empty()) e << YAML::Key << "message" << YAML::Value << a.message;
        e << YAML::Key << "artifacts" << YAML::Value << YAML::Flow << a.artifacts;
        e << YAML::Key << "runtime_s" << YAML::Value << a.runtime << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "metrics" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : ctx.summary.metrics) e << YAML::Key << k << YAML::Value << v;
    e << YAML::EndMap << YAML::EndMap;
    std::ofstream f(ctx.path("manifest.yaml"));
    f << e.c_str() << "\n";
}

}  // namespace detail

/**
 * @brief Runs the analyses of a configuration in the order solve, holder, barrier, ergodic,
 * cell, homogenize, writing tables into out_dir together with config.yaml and manifest.yaml.
 *
 * A failing analysis is recorded and the run continues with analyses that do not depend on it.
 * @throws ConfigError if the output directory cannot be created.
 */
inline RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw ConfigError("output: cannot create directory " + out_dir.string());
    {
        std::ofstream probe(out_dir / "config.yaml");
        if (!probe) throw ConfigError("output: directory " + out_dir.string() + " is not writable");
        probe << serialize_config(cfg);
    }
    detail::RunContext ctx(cfg, out_dir);
    const ProblemSpec spec = cfg.problem();
    auto grid = std::make_shared<const Grid>(Grid::uniform(spec.domain, cfg.n));
    const double m = spec.hamiltonian.m;

    std::optional<DiscreteField> solution;
    double lambda = 0.0;
    const bool want_solve = cfg.solve || cfg.holder;
    if (want_solve) {
        lambda = cfg.solve ? cfg.solve->lambda : SolveConfig{}.lambda;
        ctx.step("solve", [&](AnalysisRecord& rec) {
            const SolveReport r = solve_stationary(spec, grid, cfg.scheme, lambda);
            write_field_csv(r.solution, ctx.path("solution.csv"), "u");
            write_record_csv({{"lambda", lambda},
                              {"converged", r.converged ? 1.0 : 0.0},
                              {"residual", r.residual},
                              {"tolerance", r.tolerance},
                              {"iterations", static_cast<double>(r.iterations)},
                              {"clamp", r.clamp}},
                             ctx.path("solve_record.csv"));
            rec.artifacts = {"solution.csv", "solve_record.csv"};
            ctx.summary.metrics["solve_residual"] = r.residual;
            rec.message = r.message;
            if (!r.converged) throw SolverError(r.message);
            solution = r.solution;
        });
    }

    if (cfg.holder) {
        if (!solution) {
            ctx.skip("holder", "no converged solution");
        } else {
            ctx.step("holder", [&](AnalysisRecord& rec) {
                const double h = grid->spacing(0);
                const auto band = modulus_of_continuity(*solution, Region::boundary_band(cfg.holder->band),
                                                        dyadic_scales(h, cfg.holder->band));
                const auto fit = fit_holder_exponent(band);
                write_modulus_csv(band, ctx.path("modulus.csv"));
                write_holder_csv(fit, ctx.path("holder.csv"));
                rec.artifacts = {"modulus.csv", "holder.csv"};
                ctx.summary.metrics["alpha_hat"] = fit.alpha;
                ctx.summary.metrics["K_hat"] = fit.K;
                if (cfg.holder->interior > 0.0) {
                    const double reach = 0.5 * (1.0 - cfg.holder->interior);
                    const auto inner = modulus_of_continuity(*solution, Region::interior(cfg.holder->interior),
                                                             dyadic_scales(h, reach));
                    const auto inner_fit = fit_holder_exponent(inner);
                    write_modulus_csv(inner, ctx.path("modulus_interior.csv"));
                    write_holder_csv(inner_fit, ctx.path("holder_interior.csv"));
                    rec.artifacts.push_back("modulus_interior.csv");
                    rec.artifacts.push_back("holder_interior.csv");
                    ctx.summary.metrics["K_hat"] = inner_fit.K;
                }
                std::ostringstream msg;
                msg << "alpha_hat = " << fit.alpha << " (target " << (m > 2.0 ? (m - 2.0) / (m - 1.0) : 1.0) << ")";
                rec.message = msg.str();
            });
        }
    }

    if (cfg.barrier) {
        ctx.step("barrier", [&](AnalysisRecord& rec) {
            const auto& b = *cfg.barrier;
            const Barrier w = build_power_barrier(m, b.sup_a, b.K1, b.R, b.eta);
            const auto fine = verify_supersolution_on_grid(w, w.op, b.n, 4.0 / b.n);
            const int half = std::max(b.n / 2, 8);
            const auto coarse = verify_supersolution_on_grid(w, w.op, half, 4.0 / half);
            write_record_csv({{"alpha", w.alpha},
                              {"C1", w.C1},
                              {"C2", w.C2},
                              {"n", static_cast<double>(b.n)},
                              {"min_margin", fine.min_margin},
                              {"required_margin", w.margin},
                              {"passed", fine.passed ? 1.0 : 0.0},
                              {"proxy_coarse", coarse.normal_derivative_proxy},
                              {"proxy_fine", fine.normal_derivative_proxy},
                              {"proxy_ratio", fine.normal_derivative_proxy / coarse.normal_derivative_proxy}},
                             ctx.path("barrier_certificate.csv"));
            rec.artifacts = {"barrier_certificate.csv"};
            bool ok = fine.passed;
            std::ostringstream msg;
            msg << "min margin " << fine.min_margin << " vs " << w.margin;

            if (solution && b.centers > 0) {
                const Grid& g = *grid;
                double R = 1e-3, K1 = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < g.size(); ++k) {
                    const Point x = g.node(k);
                    R = std::max(R, spec.f(x) - (spec.c(x) + lambda) * (*solution)[k]);
                    K1 = std::min(K1, spec.hamiltonian.b(x));
                }
                const Barrier unit = build_power_barrier(m, detail::sup_diffusion(spec, g), K1, R, 0.05, spec.dimension);
                const auto scales = dyadic_scales(g.spacing(0), 0.4);
                const HolderEstimate fit = fit_holder_exponent(
                    modulus_of_continuity(*solution, Region::interior(0.2), scales), std::make_pair(scales.front(), scales.back()));
                const double tol = 2.0 * fit.K * std::pow(g.spacing(0), unit.alpha);
                std::vector<std::size_t> pool;
                for (std::size_t k = 0; k < g.size(); ++k)
                    if (g.distance_to_boundary(k) >= 0.2 - 1e-12) pool.push_back(k);
                std::mt19937_64 rng(cfg.seed);
                std::shuffle(pool.begin(), pool.end(), rng);
                pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(b.centers)));
                std::sort(pool.begin(), pool.end());
                const auto check = verify_barrier_bound(*solution, unit, pool, std::nullopt, tol);
                std::ofstream f(ctx.path("barrier_bound.csv"));
                f << "node,x,y,radius,worst_gap\n";
                for (const auto& c : check.centers) {
                    const Point x = g.node(c.node);
                    f << c.node << "," << format_number(x[0]) << "," << format_number(x[1]) << ","
                      << format_number(c.radius) << "," << format_number(c.worst) << "\n";
                }
                rec.artifacts.push_back("barrier_bound.csv");
                msg << "; bound violations " << check.violations << " at " << check.centers.size() << " centers";
                ok = ok && check.violations == 0;
            }
            rec.message = msg.str();
            if (!ok) rec.status = "failed";
        });
    }

    if (cfg.ergodic) {
        ctx.step("ergodic", [&](AnalysisRecord& rec) {
            const auto& e = *cfg.ergodic;
            ErgodicOptions o;
            o.lambdas = e.lambdas;
            o.constant_tol = e.constant_tol;
            o.corrector_tol = e.corrector_tol;
            o.fit_band = e.fit_band;
            o.scheme = cfg.scheme;
            const std::size_t anchor = e.anchor < 0 ? grid->size() / 2 : static_cast<std::size_t>(e.anchor);
            const ErgodicResult r = vanishing_discount(spec, grid, anchor, o);
            const auto pair = verify_ergodic_pair(spec, r.corrector, r.c, 10.0 * cfg.scheme.tolerance,
                                                  cfg.scheme.layer_constant);
            write_sweep_csv(r, ctx.path("ergodic_sweep.csv"));
            write_field_csv(r.corrector, ctx.path("ergodic_corrector.csv"), "w");
            write_record_csv({{"c", r.c},
                              {"c_last", r.c_last},
                              {"c_extrapolated", r.c_extrapolated},
                              {"anchor", static_cast<double>(r.anchor)},
                              {"converged", r.converged ? 1.0 : 0.0},
                              {"polished", r.polished ? 1.0 : 0.0},
                              {"polish_residual", r.polish_residual},
                              {"zero_jet_sup", r.zero_jet_sup},
                              {"pair_interior_gap", pair.interior_gap},
                              {"pair_boundary_gap", pair.boundary_gap}},
                             ctx.path("ergodic_result.csv"));
            rec.artifacts = {"ergodic_sweep.csv", "ergodic_corrector.csv", "ergodic_result.csv"};
            ctx.summary.metrics["ergodic_c"] = r.c;
            rec.message = r.message;
            if (!r.converged) rec.status = "failed";
        });
    }

    if (cfg.cell) {
        ctx.step("cell", [&](AnalysisRecord& rec) {
            TabulateOptions o;
            o.direction = {cfg.cell->direction[0], cfg.cell->direction[1]};
            o.workers = cfg.workers;
            o.ergodic.scheme = cfg.scheme;
            const EffectiveHamiltonian H = tabulate_effective(spec, cfg.cell->p, {0.0, 0.0}, grid, o);
            write_effective_csv(H, ctx.path("effective.csv"));
            std::ofstream f(ctx.path("coercivity.csv"));
            f << "p,Fbar,lower_bound,margin\n";
            for (std::size_t i = 0; i < H.slopes().size(); ++i)
                f << format_number(H.slopes()[i]) << "," << format_number(H.values()[i]) << ","
                  << format_number(H.coercivity.lower_bound[i]) << ","
                  << format_number(H.values()[i] - H.coercivity.lower_bound[i]) << "\n";
            rec.artifacts = {"effective.csv", "coercivity.csv"};
            std::ostringstream msg;
            msg << H.slopes().size() << " slopes, " << H.failures.size() << " failed, growth ratio "
                << H.coercivity.growth_ratio;
            for (const auto& [p, why] : H.failures) msg << "; p = " << p << ": " << why;
            rec.message = msg.str();
            if (!H.failures.empty() || !H.coercivity.lower_bound_ok) rec.status = "failed";
        });
    }

    if (cfg.homogenize) {
        ctx.step("homogenize", [&](AnalysisRecord& rec) {
            const auto& hc = *cfg.homogenize;
            const ProblemParams p = ProblemRegistry::resolve(cfg.key, cfg.params);
            std::function<double(double)> fbar;
            if (hc.table == "oracle") {
                const ScalarField V = ProblemRegistry::potential_1d(p.at("v0"), p.at("v1"));
                fbar = [V, m](double q) { return oracle_effective_1d(V, m, q); };
            } else {
                const ProblemSpec cell = ProblemRegistry::make(
                    "cell_1d", {{"m", p.at("m")}, {"a", p.at("a")}, {"v0", p.at("v0")}, {"v1", p.at("v1")}});
                auto torus = std::make_shared<const Grid>(Grid::uniform(cell.domain, hc.cell_n));
                ErgodicOptions eo;
                eo.scheme = cfg.scheme;
                fbar = [cell, torus, eo](double q) {
                    const CellSolution s = solve_cell(cell, {q, 0.0}, {0.0, 0.0}, torus, eo);
                    if (!s.converged) throw SolverError("cell solve failed at p = " + format_number(q));
                    return s.value;
                };
            }
            const auto slopes = detail::linspace(-hc.p_max, hc.p_max, hc.p_nodes);
            std::vector<double> values(slopes.size());
            parallel_for(slopes.size(), cfg.workers, [&](std::size_t i) { values[i] = fbar(slopes[i]); });
            const EffectiveHamiltonian H(slopes, values);
            write_effective_csv(H, ctx.path("homogenize_effective.csv"));

            auto family = [&](double eps) {
                ProblemParams q = cfg.params;
                q["eps"] = eps;
                return ProblemRegistry::make("oscillatory_1d", q);
            };
            EpsSweepOptions eo;
            eo.nodes_per_period = hc.nodes_per_period;
            eo.scheme = cfg.scheme;
            eo.workers = cfg.workers;
            const EpsSweepReport r = epsilon_sweep(family, hc.eps, H, eo, fbar);
            write_eps_sweep_csv(r, ctx.path("eps_sweep.csv"));
            write_field_csv(r.homogenized, ctx.path("homogenized.csv"), "u_bar");
            rec.artifacts = {"homogenize_effective.csv", "eps_sweep.csv", "homogenized.csv"};
            ctx.summary.metrics["eps_error"] = r.errors.back();
            std::ostringstream msg;
            msg << r.variant << " errors";
            for (double e : r.errors) msg << " " << e;
            rec.message = msg.str();
        });
    }

    detail::write_manifest(ctx);
    return ctx.summary;
}

/** @brief One row of a parameter sweep. */
struct SweepMember {
    double value = 0.0;
    std::string directory;
    RunSummary summary;
    std::string error;
    bool ok() const { return error.empty() && summary.ok(); }
};

namespace detail {

/// Sets the scalar named by axis in a parsed YAML tree.
/// @throws ConfigError if the axis does not name a scalar field.
inline void set_axis(YAML::Node root, const std::string& axis, double value) {
    if (axis.empty()) throw ConfigError("axis: empty name");
    std::vector<std::string> path;
    if (axis.find('.') != std::string::npos) {
        std::stringstream ss(axis);
        for (std::string part; std::getline(ss, part, '.');) path.push_back(part);
    } else if (axis == "n") {
        path = {"grid", "n"};
    } else if (axis == "lambda") {
        path = {"solve", "lambda"};
    } else {
        const std::string key = root["problem"] && root["problem"]["key"] ? root["problem"]["key"].as<std::string>() : "";
        const auto d = ProblemRegistry::defaults().find(key);
        if (d == ProblemRegistry::defaults().end() || !d->second.count(axis))
            throw ConfigError("axis: '" + axis + "' is not a parameter of problem '" + key + "' or a dotted field path");
        path = {"problem", "params", axis};
        if (axis == "eps" && root["homogenize"]) {
            YAML::Node list(YAML::NodeType::Sequence);
            list.push_back(value);
            root["homogenize"]["eps"] = list;
        }
    }
    YAML::Node node;
    node.reset(root);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (!node[path[i]]) node[path[i]] = YAML::Node(YAML::NodeType::Map);
        node.reset(node[path[i]]);
        if (!node.IsMap()) throw ConfigError("axis: '" + axis + "' does not name a scalar field");
    }
    if (node[path.back()] && !node[path.back()].IsScalar())
        throw ConfigError("axis: '" + axis + "' does not name a scalar field");
    node[path.back()] = value;
}

inline std::string value_label(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace detail

/**
 * @brief Runs one experiment per axis value in out_dir/<axis>_<index> and writes
 * sweep_summary.csv with the headline metrics of each run.
 * @throws ConfigError for an empty value list, an invalid axis, or a value that makes the
 * configuration invalid (no run is started in that case).
 */
inline std::vector<SweepMember> run_sweep(const std::string& config_text, const std::string& source,
                                          const std::string& axis, const std::vector<double>& values,
                                          const std::filesystem::path& out_dir, unsigned workers,
                                          std::optional<std::uint64_t> seed = std::nullopt) {
    if (values.empty()) throw ConfigError("values: the sweep needs at least one value");
    std::vector<ExperimentConfig> configs;
    for (double v : values) {
        YAML::Node root;
        try {
            root = YAML::Load(config_text);
        } catch (const YAML::ParserException& e) {
            throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
        }
        detail::set_axis(root, axis, v);
        try {
            ExperimentConfig c = parse_config(YAML::Dump(root), source + " [" + axis + " = " + detail::value_label(v) + "]");
            if (seed) c.seed = *seed;
            c.workers = 1;
            configs.push_back(std::move(c));
        } catch (const ConfigError& e) {
            throw ConfigError(e.what());
        }
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ConfigError("output: cannot create directory " + out_dir.string());

    std::vector<SweepMember> members(values.size());
    std::string safe_axis = axis;
    std::replace(safe_axis.begin(), safe_axis.end(), '.', '_');
    parallel_for(values.size(), workers, [&](std::size_t i) {
        SweepMember& mbr = members[i];
        mbr.value = values[i];
        mbr.directory = safe_axis + "_" + std::to_string(i);
        try {
            mbr.summary = run_experiment(configs[i], out_dir / mbr.directory);
        } catch (const std::exception& e) {
            mbr.error = e.what();
        }
    });

    std::ofstream f(out_dir / "sweep_summary.csv");
    const std::vector<std::string> metrics{"alpha_hat", "K_hat", "ergodic_c", "eps_error", "solve_residual"};
    f << safe_axis << ",status";
    for (const auto& mname : metrics) f << "," << mname;
    f << "\n";
    for (const auto& mbr : members) {
        f << format_number(mbr.value) << "," << (mbr.ok() ? "ok" : "failed");
        for (const auto& mname : metrics) {
            const auto it = mbr.summary.metrics.find(mname);
            f << "," << format_number(it == mbr.summary.metrics.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
        }
        f << "\n";
    }
    return members;
}

/**
 * @brief Writes a plot-ready series for one artifact kind into out_dir as <kind>.csv plus a
 * <kind>.yaml manifest naming the source and the columns.
 *
 * | kind      | source              | columns                     |
 * |-----------|---------------------|-----------------------------|
 * | modulus   | modulus.csv         | log_s, log_omega            |
 * | sweep     | sweep_summary.csv or eps_sweep.csv | axis value and metrics |
 * | ergodic   | ergodic_sweep.csv   | lambda, c                   |
 * | effective | effective.csv or homogenize_effective.csv | p, Fbar |
 *
 * @throws ConfigError for an unknown kind; SolverError if the source artifact is missing.
 */
inline std::filesystem::path emit_plotdata(const std::filesystem::path& artifact_dir, const std::string& kind,
                                           const std::filesystem::path& out_dir) {
    auto first_existing = [&](std::initializer_list<const char*> names) -> std::filesystem::path {
        for (const char* n : names)
            if (std::filesystem::exists(artifact_dir / n)) return artifact_dir / n;
        std::string all;
        for (const char* n : names) all += (all.empty() ? "" : " or ") + std::string(n);
        throw SolverError("missing artifact " + all + " in " + artifact_dir.string());
    };
    std::filesystem::path src;
    if (kind == "modulus")
        src = first_existing({"modulus.csv"});
    else if (kind == "sweep")
        src = first_existing({"sweep_summary.csv", "eps_sweep.csv"});
    else if (kind == "ergodic")
        src = first_existing({"ergodic_sweep.csv"});
    else if (kind == "effective")
        src = first_existing({"effective.csv", "homogenize_effective.csv"});
    else
        throw ConfigError("kind: expected one of modulus, sweep, ergodic, effective; got '" + kind + "'");

    std::ifstream in(src);
    std::string header;
    std::getline(in, header);
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    }
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        rows.push_back(std::move(cells));
    }

    std::vector<std::string> out_cols;
    std::vector<std::vector<double>> series;
    auto column = [&](const std::string& name) {
        const auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end()) throw SolverError(src.string() + ": column '" + name + "' not found");
        return static_cast<std::size_t>(it - cols.begin());
    };
    if (kind == "modulus") {
        out_cols = {"log_s", "log_omega"};
        const auto s = column("scale"), w = column("omega");
        for (const auto& r : rows) {
            const double sv = std::stod(r[s]), wv = std::stod(r[w]);
            if (sv > 0.0 && wv > 0.0) series.push_back({std::log(sv), std::log(wv)});
        }
    } else if (kind == "ergodic") {
        out_cols = {"lambda", "c"};
        const auto l = column("lambda"), c = column("c");
        for (const auto& r : rows) series.push_back({std::stod(r[l]), std::stod(r[c])});
    } else if (kind == "effective") {
        out_cols = {"p", "Fbar"};
        const auto p = column("p"), v = column("Fbar");
        for (const auto& r : rows) series.push_back({std::stod(r[p]), std::stod(r[v])});
    } else {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (cols[i] == "status" || cols[i] == "nodes") continue;
            keep.push_back(i);
            out_cols.push_back(cols[i]);
        }
        for (const auto& r : rows) {
            std::vector<double> v;
            for (std::size_t i : keep) v.push_back(std::stod(r[i]));
            series.push_back(std::move(v));
        }
    }

    std::filesystem::create_directories(out_dir);
    const auto target = out_dir / (kind + ".csv");
    std::ofstream f(target);
    if (!f) throw SolverError("cannot write " + target.string());
    for (std::size_t i = 0; i < out_cols.size(); ++i) f << (i ? "," : "") << out_cols[i];
    f << "\n";
    for (const auto& r : series) {
        for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << format_number(r[i]);
        f << "\n";
    }
    YAML::Emitter e;
    e << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << kind << YAML::Key << "source" << YAML::Value
      << src.filename().string() << YAML::Key << "columns" << YAML::Value << YAML::Flow << out_cols << YAML::Key
      << "rows" << YAML::Value << series.size() << YAML::EndMap;
    std::ofstream(out_dir / (kind + ".yaml")) << e.c_str() << "\n";
    return target;
}

}  // namespace sqhj
