#pragma once

#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "problem.hpp"

namespace sqhj {

using ProblemParams = std::map<std::string, double>;

/**
 * @brief Named problem families with scalar parameters.
 *
 * | key            | equation                                                       | boundary  |
 * |----------------|----------------------------------------------------------------|-----------|
 * | holder_1d      | -a u'' + b|u'|^m = f0 + f1 sin(pi x) on (-1, 1)                 | state constraint |
 * | dirichlet_1d   | same operator, data g0 + spike at x = 1                        | generalized Dirichlet |
 * | box_2d         | -tr(a D^2u) + b|Du|^m = f0 + f1 sin(pi(x + y/2)), a12 = cross sin(pi x) sin(pi y) | state constraint |
 * | dirichlet_2d   | box_2d operator with data g0                                   | generalized Dirichlet |
 * | cell_1d        | -a u'' + |u'|^m - V(y) on the unit torus, V = v0 + v1 sin^2(pi y) | periodic |
 * | cell_2d        | -a Du + |Du|^m - V(y), V = v0 + v1 (sin^2(pi y1) + sin^2(pi y2))/2 | periodic |
 * | oscillatory_1d | -eps a u'' + |u'|^m - V(x/eps) + u = 0, V as cell_1d            | generalized Dirichlet g0 |
 * | quasilinear_1d | (1 + |u'|^k)(|u'|^m + c u - f0) on (-1, 1)                       | state constraint |
 */
struct ProblemRegistry {
    static const std::map<std::string, ProblemParams>& defaults() {
        static const std::map<std::string, ProblemParams> d{
            {"holder_1d", {{"m", 3.0}, {"a", 1.0}, {"b", 1.0}, {"c", 0.0}, {"f0", 1.0}, {"f1", 1.0}}},
            {"dirichlet_1d",
             {{"m", 3.0}, {"a", 1.0}, {"b", 1.0}, {"c", 0.0}, {"f0", 1.0}, {"f1", 1.0}, {"g0", 0.0}, {"spike", 0.0}}},
            {"box_2d", {{"m", 3.0}, {"a", 1.0}, {"b", 1.0}, {"c", 0.0}, {"cross", 0.2}, {"f0", 1.0}, {"f1", 1.0}}},
            {"dirichlet_2d",
             {{"m", 3.0}, {"a", 1.0}, {"b", 1.0}, {"c", 0.0}, {"cross", 0.2}, {"f0", 1.0}, {"f1", 1.0}, {"g0", 0.0}}},
            {"cell_1d", {{"m", 3.0}, {"a", 0.0}, {"v0", 0.0}, {"v1", 1.0}}},
            {"cell_2d", {{"m", 3.0}, {"a", 0.0}, {"v0", 0.0}, {"v1", 1.0}}},
            {"oscillatory_1d", {{"m", 3.0}, {"a", 0.0}, {"v0", 0.0}, {"v1", 1.0}, {"eps", 0.25}, {"g0", -1.0}}},
            {"quasilinear_1d", {{"k", 2.0}, {"m", 1.0}, {"c", 0.0}, {"f0", 0.0}}},
        };
        return d;
    }

    static std::vector<std::string> keys() {
        std::vector<std::string> k;
        for (const auto& [name, _] : defaults()) k.push_back(name);
        return k;
    }

    /// Keys whose problems the finite-difference solver accepts.
    static std::vector<std::string> grid_keys() {
        std::vector<std::string> k;
        for (const auto& name : keys())
            if (name != "quasilinear_1d") k.push_back(name);
        return k;
    }

    /// Defaults overridden by the given values.
    /// @throws ConfigError naming an unknown key or parameter.
    static ProblemParams resolve(const std::string& key, const ProblemParams& overrides) {
        const auto it = defaults().find(key);
        if (it == defaults().end()) throw ConfigError("problem.key: unknown registry key '" + key + "'");
        ProblemParams p = it->second;
        for (const auto& [name, value] : overrides) {
            if (!p.count(name)) throw ConfigError("problem.params." + name + ": not a parameter of " + key);
            p[name] = value;
        }
        return p;
    }

    /// @throws ConfigError on unknown keys or parameters and on invalid resulting specs.
    static ProblemSpec make(const std::string& key, const ProblemParams& overrides = {}) {
        const ProblemParams p = resolve(key, overrides);
        auto v = [&](const char* name) { return p.at(name); };
        using F = ScalarField;
        ProblemSpec s;
        s.name = key;
        if (key == "holder_1d" || key == "dirichlet_1d") {
            s.dimension = 1;
            s.domain = Domain::interval(-1.0, 1.0);
            s.diffusion = Diffusion::isotropic(F::constant(v("a")));
            s.hamiltonian.m = v("m");
            s.hamiltonian.b = F::constant(v("b"));
            s.c = F::constant(v("c"));
            s.f = F::trigonometric(v("f0"), v("f1"), {1.0, 0.0});
            if (key == "dirichlet_1d") {
                s.boundary.kind = BoundaryCondition::Kind::generalized_dirichlet;
                s.boundary.g = v("spike") == 0.0
                                   ? F::constant(v("g0"))
                                   : F::piecewise_linear({-1.0, 0.9, 1.0}, {v("g0"), v("g0"), v("g0") + v("spike")});
            }
        } else if (key == "box_2d" || key == "dirichlet_2d") {
            s.dimension = 2;
            s.domain = Domain::box({-1.0, -1.0}, {1.0, 1.0});
            const double half = 0.5 * v("cross");
            const double quarter_turn = 0.5 * std::numbers::pi;
            s.diffusion = {F::constant(v("a")),
                           F::sum({F::trigonometric(0.0, half, {1.0, -1.0}, quarter_turn),
                                   F::trigonometric(0.0, -half, {1.0, 1.0}, quarter_turn)}),
                           F::constant(v("a"))};
            s.hamiltonian.m = v("m");
            s.hamiltonian.b = F::constant(v("b"));
            s.c = F::constant(v("c"));
            s.f = F::trigonometric(v("f0"), v("f1"), {1.0, 0.5});
            if (key == "dirichlet_2d") {
                s.boundary.kind = BoundaryCondition::Kind::generalized_dirichlet;
                s.boundary.g = F::constant(v("g0"));
            }
        } else if (key == "cell_1d" || key == "cell_2d") {
            const int dim = key == "cell_1d" ? 1 : 2;
            s.dimension = dim;
            s.domain = Domain::torus(dim);
            s.diffusion = Diffusion::isotropic(F::constant(v("a")));
            s.hamiltonian.m = v("m");
            s.hamiltonian.lower_order = dim == 1 ? potential_1d(-v("v0"), -v("v1"))
                                                 : F::sum({F::constant(-v("v0")),
                                                           F::sin_squared(0.0, -0.5 * v("v1"), {1.0, 0.0}),
                                                           F::sin_squared(0.0, -0.5 * v("v1"), {0.0, 1.0})});
            s.boundary.kind = BoundaryCondition::Kind::periodic;
        } else if (key == "oscillatory_1d") {
            const double eps = v("eps");
            if (!(eps > 0.0)) throw ConfigError("problem.params.eps must be positive");
            s.dimension = 1;
            s.domain = Domain::interval(-1.0, 1.0);
            s.diffusion = Diffusion::isotropic(F::constant(eps * v("a")));
            s.hamiltonian.m = v("m");
            s.hamiltonian.lower_order = potential_1d(-v("v0"), -v("v1")).with_argument_scale(1.0 / eps);
            s.c = F::constant(1.0);
            s.boundary.kind = BoundaryCondition::Kind::generalized_dirichlet;
            s.boundary.g = F::constant(v("g0"));
        } else if (key == "quasilinear_1d") {
            s = rewrite_quasilinear(v("k"), v("m"), F::constant(v("c")), F::constant(v("f0")));
            s.name = key;
        }
        validate_spec(s);
        return s;
    }

    /// The 1D potential offset + amplitude sin^2(pi y).
    static ScalarField potential_1d(double offset, double amplitude) {
        return ScalarField::sin_squared(offset, amplitude, {1.0, 0.0});
    }
};

}  // namespace sqhj
