#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ergodic.hpp"
#include "errors.hpp"
#include "registry.hpp"
#include "scheme.hpp"

namespace sqhj {

struct SolveConfig {
    double lambda = 1.0;
    friend bool operator==(const SolveConfig&, const SolveConfig&) = default;
};

struct HolderConfig {
    double band = 0.3;
    double interior = 0.2;
    friend bool operator==(const HolderConfig&, const HolderConfig&) = default;
};

struct BarrierConfig {
    double sup_a = 1.0;
    double K1 = 1.0;
    double R = 1.0;
    double eta = 1.0;
    int n = 512;
    /// Number of random interior centers for the bound on the computed solution.
    int centers = 24;
    friend bool operator==(const BarrierConfig&, const BarrierConfig&) = default;
};

struct ErgodicConfig {
    std::vector<double> lambdas = default_discounts();
    /// Anchor node index; -1 selects the middle node.
    long anchor = -1;
    double constant_tol = 1e-3;
    double corrector_tol = 5e-2;
    double fit_band = 0.4;
    friend bool operator==(const ErgodicConfig&, const ErgodicConfig&) = default;
};

struct CellConfig {
    std::vector<double> p;
    std::vector<double> direction{1.0, 0.0};
    friend bool operator==(const CellConfig&, const CellConfig&) = default;
};

struct HomogenizeConfig {
    std::vector<double> eps{0.25, 0.125, 0.0625};
    int nodes_per_period = 32;
    /// "oracle" (first-order quadrature) or "cell" (torus cell solves)
    std::string table = "oracle";
    double p_max = 3.0;
    int p_nodes = 121;
    int cell_n = 128;
    friend bool operator==(const HomogenizeConfig&, const HomogenizeConfig&) = default;
};

/** @brief Declarative experiment: a registry problem, a grid and the analyses to run. */
struct ExperimentConfig {
    std::string key;
    ProblemParams params;
    int n = 201;
    SchemeParams scheme{};
    std::optional<SolveConfig> solve;
    std::optional<HolderConfig> holder;
    std::optional<BarrierConfig> barrier;
    std::optional<ErgodicConfig> ergodic;
    std::optional<CellConfig> cell;
    std::optional<HomogenizeConfig> homogenize;
    std::string output = "out";
    std::uint64_t seed = 0;
    unsigned workers = 0;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    ProblemSpec problem() const { return ProblemRegistry::make(key, params); }
};

namespace detail {

inline std::string mark_prefix(const std::string& source, const YAML::Node& node) {
    const auto m = node.Mark();
    if (m.is_null()) return source + ": ";
    return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

/** Reads fields of one mapping, rejecting unknown keys with their line. */
class Section {
public:
    Section(const YAML::Node& node, std::string path, const std::string& source)
        : node_(node), path_(std::move(path)), source_(source) {
        if (!node_.IsMap()) fail(node_, "must be a mapping");
    }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& what) const {
        throw ConfigError(mark_prefix(source_, at) + (path_.empty() ? "config" : path_) + ": " + what);
    }
    [[noreturn]] void fail_field(const YAML::Node& at, const std::string& field, const std::string& what) const {
        throw ConfigError(mark_prefix(source_, at) + (path_.empty() ? "" : path_ + ".") + field + ": " + what);
    }

    bool has(const std::string& field) {
        known_.insert(field);
        return static_cast<bool>(node_[field]);
    }

    /// The field's node when present, else the section itself (for error positions).
    YAML::Node at(const std::string& field) const { return node_[field] ? node_[field] : node_; }

    YAML::Node child(const std::string& field) {
        known_.insert(field);
        return node_[field];
    }

    template <class T>
    T get(const std::string& field, const T& fallback) {
        return has(field) ? as<T>(field) : fallback;
    }

    template <class T>
    T require(const std::string& field) {
        if (!has(field)) fail(node_, "required field '" + field + "' is missing");
        return as<T>(field);
    }

    template <class T>
    T as(const std::string& field) {
        const YAML::Node v = node_[field];
        try {
            return v.as<T>();
        } catch (const YAML::Exception&) {
            fail_field(v, field, "has the wrong type");
        }
    }

    std::vector<double> numbers(const std::string& field, const std::vector<double>& fallback) {
        if (!has(field)) return fallback;
        const YAML::Node v = node_[field];
        if (!v.IsSequence()) fail_field(v, field, "must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            try {
                out.push_back(e.as<double>());
            } catch (const YAML::Exception&) {
                fail_field(e, field, "must be a list of numbers");
            }
        }
        return out;
    }

    void finish() const {
        for (const auto& kv : node_) {
            const auto name = kv.first.as<std::string>();
            if (!known_.count(name)) fail_field(kv.first, name, "unknown field");
        }
    }

    const YAML::Node& node() const { return node_; }
    const std::string& path() const { return path_; }

private:
    YAML::Node node_;
    std::string path_;
    const std::string& source_;
    std::set<std::string> known_;
};

inline double min_zeroth_order(const ProblemSpec& spec) {
    const Grid g = Grid::uniform(spec.domain, 16);
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) c = std::min(c, spec.c(g.node(k)));
    return c;
}

inline bool increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

inline bool decreasing_positive(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(v[i] > 0.0) || (i > 0 && !(v[i] < v[i - 1]))) return false;
    return true;
}

}  // namespace detail

/**
 * @brief Parses and validates a YAML experiment.
 *
 * Every error message starts with "source:line:column: field.path:". Each registry key
 * requires an explicit exponent problem.params.m.
 * @throws ConfigError on malformed YAML, unknown fields, missing or out-of-range values,
 * and analyses that do not apply to the chosen problem.
 */
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": " + e.msg);
    }
    if (!root || root.IsNull()) throw ConfigError(source + ": empty configuration");
    ExperimentConfig c;
    detail::Section top(root, "", source);

    if (!top.has("problem")) top.fail(root, "required section 'problem' is missing");
    detail::Section problem(top.child("problem"), "problem", source);
    c.key = problem.require<std::string>("key");
    const YAML::Node params_node = problem.child("params");
    if (params_node) {
        if (!params_node.IsMap()) problem.fail_field(params_node, "params", "must be a mapping");
        for (const auto& kv : params_node) {
            const auto name = kv.first.as<std::string>();
            try {
                c.params[name] = kv.second.as<double>();
            } catch (const YAML::Exception&) {
                problem.fail_field(kv.second, "params." + name, "must be a number");
            }
        }
    }
    problem.finish();
    try {
        const auto defaults = ProblemRegistry::resolve(c.key, c.params);
        if (defaults.count("m") && !c.params.count("m"))
            throw ConfigError("problem.params.m: required field is missing");
        (void)c.problem();
    } catch (const ConfigError& e) {
        throw ConfigError(detail::mark_prefix(source, params_node ? params_node : problem.node()) + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(detail::mark_prefix(source, params_node ? params_node : problem.node()) + "problem: " + e.what());
    }
    const ProblemSpec spec = c.problem();
    const bool torus = spec.domain.kind == Domain::Kind::torus;
    const bool dirichlet = spec.boundary.kind == BoundaryCondition::Kind::generalized_dirichlet;

    if (top.has("grid")) {
        detail::Section grid(top.child("grid"), "grid", source);
        c.n = grid.get<int>("n", c.n);
        if (c.n < 8) grid.fail_field(grid.at("n"), "n", "at least 8 nodes per axis are required");
        grid.finish();
    }
    if (top.has("scheme")) {
        detail::Section s(top.child("scheme"), "scheme", source);
        c.scheme.cfl = s.get<double>("cfl", c.scheme.cfl);
        c.scheme.tolerance = s.get<double>("tolerance", c.scheme.tolerance);
        c.scheme.max_iterations = s.get<int>("max_iterations", c.scheme.max_iterations);
        c.scheme.clamp = s.get<double>("clamp", c.scheme.clamp);
        c.scheme.layer_constant = s.get<double>("layer_constant", c.scheme.layer_constant);
        s.finish();
        try {
            c.scheme.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(detail::mark_prefix(source, s.node()) + e.what());
        }
    }
    if (top.has("solve")) {
        detail::Section s(top.child("solve"), "solve", source);
        SolveConfig v;
        v.lambda = s.get<double>("lambda", v.lambda);
        s.finish();
        if (!(v.lambda >= 0.0)) s.fail_field(s.at("lambda"), "lambda", "must be nonnegative");
        if (torus) s.fail(s.node(), "stationary solves need a bounded domain; '" + c.key + "' is periodic");
        if (!(v.lambda + detail::min_zeroth_order(spec) > 0.0))
            s.fail_field(s.at("lambda"), "lambda", "lambda + min c must be positive for a unique stationary solution");
        c.solve = v;
    }
    if (top.has("holder")) {
        detail::Section s(top.child("holder"), "holder", source);
        HolderConfig v;
        v.band = s.get<double>("band", v.band);
        v.interior = s.get<double>("interior", v.interior);
        s.finish();
        if (!(v.band > 0.0 && v.band <= 1.0)) s.fail_field(s.at("band"), "band", "must lie in (0, 1]");
        if (!(v.interior >= 0.0 && v.interior < 1.0)) s.fail_field(s.at("interior"), "interior", "must lie in [0, 1)");
        if (torus) s.fail(s.node(), "Hoelder fits need a bounded domain");
        c.holder = v;
    }
    if (top.has("barrier")) {
        detail::Section s(top.child("barrier"), "barrier", source);
        BarrierConfig v;
        v.sup_a = s.get<double>("sup_a", v.sup_a);
        v.K1 = s.get<double>("K1", v.K1);
        v.R = s.get<double>("R", v.R);
        v.eta = s.get<double>("eta", v.eta);
        v.n = s.get<int>("n", v.n);
        v.centers = s.get<int>("centers", v.centers);
        s.finish();
        if (!(v.sup_a >= 0.0 && v.K1 > 0.0 && v.R >= 0.0 && v.eta > 0.0))
            s.fail(s.node(), "needs sup_a >= 0, K1 > 0, R >= 0 and eta > 0");
        if (v.n < 8) s.fail_field(s.at("n"), "n", "must be at least 8");
        if (v.centers < 0) s.fail_field(s.at("centers"), "centers", "must be nonnegative");
        if (!(spec.hamiltonian.m > 2.0)) s.fail(s.node(), "power barriers need m > 2");
        c.barrier = v;
    }
    if (top.has("ergodic")) {
        detail::Section s(top.child("ergodic"), "ergodic", source);
        ErgodicConfig v;
        v.lambdas = s.numbers("lambdas", v.lambdas);
        v.anchor = s.get<long>("anchor", v.anchor);
        v.constant_tol = s.get<double>("constant_tol", v.constant_tol);
        v.corrector_tol = s.get<double>("corrector_tol", v.corrector_tol);
        v.fit_band = s.get<double>("fit_band", v.fit_band);
        s.finish();
        if (v.lambdas.empty() || !detail::decreasing_positive(v.lambdas))
            s.fail_field(s.at("lambdas"), "lambdas", "must be a nonempty, positive, strictly decreasing list");
        if (dirichlet) s.fail(s.node(), "ergodic problems need a state-constraint or periodic boundary");
        const long nodes = spec.dimension == 2 ? static_cast<long>(c.n) * c.n : c.n;
        if (v.anchor >= nodes || v.anchor < -1) s.fail_field(s.at("anchor"), "anchor", "must be -1 or a node index below " + std::to_string(nodes));
        if (c.params.count("c") && c.params.at("c") != 0.0) s.fail(s.node(), "vanishing discount needs problem.params.c = 0");
        c.ergodic = v;
    }
    if (top.has("cell")) {
        detail::Section s(top.child("cell"), "cell", source);
        CellConfig v;
        v.p = s.numbers("p", v.p);
        v.direction = s.numbers("direction", v.direction);
        s.finish();
        if (v.p.size() < 2 || !detail::increasing(v.p)) s.fail_field(s.at("p"), "p", "needs at least two increasing slopes");
        if (v.direction.size() != 2) s.fail_field(s.at("direction"), "direction", "must have two components");
        if (!torus) s.fail(s.node(), "cell problems need a periodic registry key (cell_1d, cell_2d)");
        c.cell = v;
    }
    if (top.has("homogenize")) {
        detail::Section s(top.child("homogenize"), "homogenize", source);
        HomogenizeConfig v;
        v.eps = s.numbers("eps", v.eps);
        v.nodes_per_period = s.get<int>("nodes_per_period", v.nodes_per_period);
        v.table = s.get<std::string>("table", v.table);
        v.p_max = s.get<double>("p_max", v.p_max);
        v.p_nodes = s.get<int>("p_nodes", v.p_nodes);
        v.cell_n = s.get<int>("cell_n", v.cell_n);
        s.finish();
        if (v.eps.empty() || !detail::decreasing_positive(v.eps))
            s.fail_field(s.at("eps"), "eps", "must be a nonempty, positive, strictly decreasing list");
        if (v.nodes_per_period < 16) s.fail_field(s.at("nodes_per_period"), "nodes_per_period", "must be at least 16");
        if (v.table != "oracle" && v.table != "cell") s.fail_field(s.at("table"), "table", "must be 'oracle' or 'cell'");
        if (!(v.p_max > 0.0) || v.p_nodes < 3) s.fail(s.node(), "needs p_max > 0 and p_nodes >= 3");
        if (v.cell_n < 8) s.fail_field(s.at("cell_n"), "cell_n", "must be at least 8");
        if (c.key != "oscillatory_1d") s.fail(s.node(), "homogenization runs on the oscillatory_1d family");
        if (v.table == "oracle" && c.params.count("a") && c.params.at("a") != 0.0)
            s.fail_field(s.at("table"), "table", "the quadrature oracle covers first-order cells only (a = 0)");
        c.homogenize = v;
    }
    c.output = top.get<std::string>("output", c.output);
    if (c.output.empty()) top.fail_field(top.at("output"), "output", "must not be empty");
    c.seed = top.get<std::uint64_t>("seed", c.seed);
    c.workers = top.get<unsigned>("workers", c.workers);
    top.finish();
    return c;
}

/// @throws ConfigError if the file cannot be read, plus everything parse_config throws.
inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

/// YAML text that parse_config maps back to an equal configuration.
inline std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "key" << YAML::Value << c.key;
    out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : c.params) out << YAML::Key << k << YAML::Value << v;
    out << YAML::EndMap << YAML::EndMap;
    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap << YAML::Key << "n" << YAML::Value << c.n << YAML::EndMap;
    out << YAML::Key << "scheme" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "cfl" << YAML::Value << c.scheme.cfl;
    out << YAML::Key << "tolerance" << YAML::Value << c.scheme.tolerance;
    out << YAML::Key << "max_iterations" << YAML::Value << c.scheme.max_iterations;
    out << YAML::Key << "clamp" << YAML::Value << c.scheme.clamp;
    out << YAML::Key << "layer_constant" << YAML::Value << c.scheme.layer_constant;
    out << YAML::EndMap;
    auto list = [&](const char* name, const std::vector<double>& v) {
        out << YAML::Key << name << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (double x : v) out << x;
        out << YAML::EndSeq;
    };
    if (c.solve) out << YAML::Key << "solve" << YAML::Value << YAML::BeginMap << YAML::Key << "lambda" << YAML::Value << c.solve->lambda << YAML::EndMap;
    if (c.holder)
        out << YAML::Key << "holder" << YAML::Value << YAML::BeginMap << YAML::Key << "band" << YAML::Value << c.holder->band
            << YAML::Key << "interior" << YAML::Value << c.holder->interior << YAML::EndMap;
    if (c.barrier) {
        const auto& b = *c.barrier;
        out << YAML::Key << "barrier" << YAML::Value << YAML::BeginMap << YAML::Key << "sup_a" << YAML::Value << b.sup_a
            << YAML::Key << "K1" << YAML::Value << b.K1 << YAML::Key << "R" << YAML::Value << b.R << YAML::Key << "eta"
            << YAML::Value << b.eta << YAML::Key << "n" << YAML::Value << b.n << YAML::Key << "centers" << YAML::Value
            << b.centers << YAML::EndMap;
    }
    if (c.ergodic) {
        const auto& e = *c.ergodic;
        out << YAML::Key << "ergodic" << YAML::Value << YAML::BeginMap;
        list("lambdas", e.lambdas);
        out << YAML::Key << "anchor" << YAML::Value << e.anchor << YAML::Key << "constant_tol" << YAML::Value
            << e.constant_tol << YAML::Key << "corrector_tol" << YAML::Value << e.corrector_tol << YAML::Key
            << "fit_band" << YAML::Value << e.fit_band << YAML::EndMap;
    }
    if (c.cell) {
        out << YAML::Key << "cell" << YAML::Value << YAML::BeginMap;
        list("p", c.cell->p);
        list("direction", c.cell->direction);
        out << YAML::EndMap;
    }
    if (c.homogenize) {
        const auto& h = *c.homogenize;
        out << YAML::Key << "homogenize" << YAML::Value << YAML::BeginMap;
        list("eps", h.eps);
        out << YAML::Key << "nodes_per_period" << YAML::Value << h.nodes_per_period << YAML::Key << "table"
            << YAML::Value << h.table << YAML::Key << "p_max" << YAML::Value << h.p_max << YAML::Key << "p_nodes"
            << YAML::Value << h.p_nodes << YAML::Key << "cell_n" << YAML::Value << h.cell_n << YAML::EndMap;
    }
    out << YAML::Key << "output" << YAML::Value << c.output;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "workers" << YAML::Value << c.workers;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace sqhj
