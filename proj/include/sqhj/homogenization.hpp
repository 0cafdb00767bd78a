#pragma once

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ergodic.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "regularity.hpp"
#include "solver.hpp"

namespace sqhj {

/** @brief Periodic corrector and effective value for one slope. */
struct CellSolution {
    Vec p{0.0, 0.0};
    Point x{0.0, 0.0};
    double value = 0.0;
    /// Normalized so that the value at the origin node is 0.
    DiscreteField corrector;
    ErgodicResult diagnostics;
    /// Largest |F(u1) - value| over the nodes next to the wrap of each axis.
    double seam_defect = 0.0;
    bool converged = false;
};

/**
 * @brief Cell equation F(D^2 u1, D u1 + p, y) = Fbar on the unit torus.
 *
 * The problem spec lives on the torus in the fast variable y; x is carried through as a
 * label for tables that depend on a macro point.
 * @throws DomainError for a non-periodic grid or a non-finite slope; errors of vanishing_discount.
 */
inline CellSolution solve_cell(const ProblemSpec& cell, Vec p, Point x, std::shared_ptr<const Grid> torus,
                               const ErgodicOptions& options = {}) {
    if (!torus->periodic() || cell.domain.kind != Domain::Kind::torus)
        throw DomainError("cell problems live on the unit torus");
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw DomainError("cell slope must be finite");
    CellSolution s;
    s.p = p;
    s.x = x;
    s.diagnostics = vanishing_discount(cell, torus, 0, options, p);
    s.value = s.diagnostics.c;
    s.corrector = s.diagnostics.corrector;
    s.converged = s.diagnostics.converged && std::isfinite(s.value);

    const DiscreteField r = discrete_residual(cell, s.corrector, 0.0, p, options.scheme.layer_constant);
    const Grid& g = *torus;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto ij = g.indices(k);
        bool seam = ij[0] == 0 || ij[0] == g.nodes(0) - 1;
        if (g.dimension() == 2) seam = seam || ij[1] == 0 || ij[1] == g.nodes(1) - 1;
        if (seam) s.seam_defect = std::max(s.seam_defect, std::abs(r[k] - s.value));
    }
    return s;
}

/**
 * @brief Effective constant of |q|^m - V(y) on the unit circle at slope p.
 *
 * With c0 = -min V, returns c0 when |p| <= int_0^1 (c0 + V)^{1/m} dy and otherwise the root of
 * |p| = int_0^1 (c + V(y))^{1/m} dy.
 * @throws DomainError for m <= 2 or non-finite p; SolverError if the root cannot be bracketed.
 */
inline double oracle_effective_1d(const ScalarField& V, double m, double p) {
    if (!(m > 2.0)) throw DomainError("oracle_effective_1d needs m > 2");
    if (!std::isfinite(p)) throw DomainError("oracle_effective_1d needs a finite slope");
    auto v = [&](double y) { return V({y, 0.0}); };

    constexpr int samples = 4096;
    double best = v(0.0);
    int at = 0;
    for (int i = 1; i < samples; ++i) {
        const double val = v(static_cast<double>(i) / samples);
        if (val < best) {
            best = val;
            at = i;
        }
    }
    const double h = 1.0 / samples;
    const auto refined =
        boost::math::tools::brent_find_minima(v, (at - 1) * h, (at + 1) * h, std::numeric_limits<double>::digits / 2);
    const double v_min = std::min(best, refined.second);
    const double c0 = -v_min;

    auto integral = [&](double c) {
        auto integrand = [&](double y) { return std::pow(std::max(c + v(y), 0.0), 1.0 / m); };
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-13);
    };
    const double target = std::abs(p);
    if (target <= integral(c0)) return c0;

    double hi = std::pow(target, m) + c0 + 1.0;
    for (int i = 0; i < 60 && integral(hi) < target; ++i) hi *= 2.0;
    const double flo = integral(c0) - target, fhi = integral(hi) - target;
    if (!(flo < 0.0 && fhi > 0.0)) throw SolverError("oracle_effective_1d: root not bracketed");
    std::uintmax_t iterations = 200;
    const auto root = boost::math::tools::toms748_solve([&](double c) { return integral(c) - target; }, c0, hi, flo,
                                                        fhi, boost::math::tools::eps_tolerance<double>(50), iterations);
    return 0.5 * (root.first + root.second);
}

/** @brief Lower-bound and growth diagnostics of an effective table. */
struct CoercivityReport {
    /// min over the cell grid of F(0, p, y, x) at each table node
    std::vector<double> lower_bound;
    /// min over nodes of value - lower_bound
    double worst_margin = std::numeric_limits<double>::infinity();
    bool lower_bound_ok = true;
    /// Values at the two outermost nodes are the largest on their side of the minimizer.
    bool growing = true;
    /// value / (b |p|^m) at the node of largest |p|
    double growth_ratio = std::numeric_limits<double>::quiet_NaN();
    bool growth_ok = true;
};

/**
 * @brief Piecewise-linear effective Hamiltonian Fbar(p) at one macro point.
 *
 * Outside the tabulated range the end segments are extended linearly. The Godunov flux
 * min/max over [a, b] of the interpolant is what the homogenized solver uses.
 */
class EffectiveHamiltonian {
public:
    EffectiveHamiltonian() = default;

    /// @throws DomainError unless p is strictly increasing with at least two nodes and all values are finite.
    EffectiveHamiltonian(std::vector<double> p, std::vector<double> values, Point x = {0.0, 0.0})
        : p_(std::move(p)), v_(std::move(values)), x_(x) {
        if (p_.size() < 2 || p_.size() != v_.size()) throw DomainError("effective table needs at least two nodes");
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (!std::isfinite(p_[i]) || !std::isfinite(v_[i])) throw DomainError("effective table must be finite");
            if (i > 0 && !(p_[i] > p_[i - 1])) throw DomainError("effective table slopes must increase strictly");
        }
        prefix_ = v_;
        suffix_ = v_;
        for (std::size_t i = 1; i < v_.size(); ++i) prefix_[i] = std::min(prefix_[i], prefix_[i - 1]);
        for (std::size_t i = v_.size() - 1; i-- > 0;) suffix_[i] = std::min(suffix_[i], suffix_[i + 1]);
    }

    template <class Fn>
    static EffectiveHamiltonian from_function(Fn&& fn, const std::vector<double>& p, Point x = {0.0, 0.0}) {
        std::vector<double> v;
        v.reserve(p.size());
        for (double q : p) v.push_back(fn(q));
        return EffectiveHamiltonian(p, std::move(v), x);
    }

    const std::vector<double>& slopes() const { return p_; }
    const std::vector<double>& values() const { return v_; }
    const Point& macro_point() const { return x_; }
    double p_min() const { return p_.front(); }
    double p_max() const { return p_.back(); }
    bool covers(double q) const { return q >= p_.front() && q <= p_.back(); }

    double operator()(double q) const {
        const std::size_t n = p_.size();
        std::size_t i;
        if (q <= p_[0])
            i = 0;
        else if (q >= p_[n - 1])
            i = n - 2;
        else
            i = static_cast<std::size_t>(std::upper_bound(p_.begin(), p_.end(), q) - p_.begin()) - 1;
        const double t = (q - p_[i]) / (p_[i + 1] - p_[i]);
        return v_[i] + t * (v_[i + 1] - v_[i]);
    }

    /// Both end segments point upward away from the table.
    bool coercive_ends() const {
        const std::size_t n = p_.size();
        return v_[1] < v_[0] && v_[n - 1] > v_[n - 2];
    }

    /// Smallest table value and its slope.
    std::pair<double, double> minimum() const {
        const auto it = std::min_element(v_.begin(), v_.end());
        return {*it, p_[static_cast<std::size_t>(it - v_.begin())]};
    }

    /// min over [lo, hi] of the interpolant; lo may be -inf and hi +inf when the ends are coercive.
    double min_over(double lo, double hi) const { return extremum(lo, hi, true); }
    double max_over(double lo, double hi) const { return extremum(lo, hi, false); }

    /// Godunov flux for backward difference a and forward difference b.
    double godunov(double a, double b) const { return a <= b ? min_over(a, b) : max_over(b, a); }

    /// Adds the slopes 2 p_i that lie outside the current range, evaluating them with fn.
    template <class Fn>
    EffectiveHamiltonian doubled(Fn&& fn) const {
        std::vector<std::pair<double, double>> rows;
        for (std::size_t i = 0; i < p_.size(); ++i) rows.emplace_back(p_[i], v_[i]);
        for (double q : p_) {
            const double d = 2.0 * q;
            if (d < p_.front() || d > p_.back()) rows.emplace_back(d, fn(d));
        }
        std::sort(rows.begin(), rows.end());
        std::vector<double> p, v;
        for (const auto& [a, b] : rows) {
            p.push_back(a);
            v.push_back(b);
        }
        EffectiveHamiltonian out(std::move(p), std::move(v), x_);
        out.coercivity = coercivity;
        out.failures = failures;
        return out;
    }

    CoercivityReport coercivity;
    /// Slopes whose cell solve failed, with the reason; these slopes are left out of the table.
    std::vector<std::pair<double, std::string>> failures;

private:
    double extremum(double lo, double hi, bool lower) const {
        if (std::isinf(lo) || std::isinf(hi)) {
            if (!coercive_ends()) throw SolverError("effective table is not coercive at its ends");
            if (!lower) throw SolverError("unbounded maximum of the effective Hamiltonian");
        }
        double best = lower ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        auto take = [&](double v) { best = lower ? std::min(best, v) : std::max(best, v); };
        if (std::isfinite(lo)) take((*this)(lo));
        if (std::isfinite(hi)) take((*this)(hi));
        const auto first = static_cast<std::size_t>(std::lower_bound(p_.begin(), p_.end(), lo) - p_.begin());
        const auto last = static_cast<std::size_t>(std::upper_bound(p_.begin(), p_.end(), hi) - p_.begin());
        if (first >= last) return best;
        if (lower && first == 0) {
            take(prefix_[last - 1]);
        } else if (lower && last == p_.size()) {
            take(suffix_[first]);
        } else {
            for (std::size_t i = first; i < last; ++i) take(v_[i]);
        }
        return best;
    }


    std::vector<double> p_, v_;
    Point x_{0.0, 0.0};
    std::vector<double> prefix_, suffix_;
};

inline void write_effective_csv(const EffectiveHamiltonian& H, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "p,Fbar\n";
    for (std::size_t i = 0; i < H.slopes().size(); ++i)
        out << format_number(H.slopes()[i]) << "," << format_number(H.values()[i]) << "\n";
}

struct TabulateOptions {
    ErgodicOptions ergodic{};
    /// Slope direction for two-dimensional cells; the table variable is t in p = t * direction.
    Vec direction{1.0, 0.0};
    unsigned workers = 0;
};

/**
 * @brief Cell solves at every slope of p_grid, assembled into a table with a coercivity report.
 *
 * A slope whose solve throws or does not converge is recorded in `failures` and left out.
 * @throws DomainError if p_grid is not strictly increasing; SolverError if fewer than two slopes succeed.
 */
inline EffectiveHamiltonian tabulate_effective(const ProblemSpec& cell, const std::vector<double>& p_grid, Point x,
                                               std::shared_ptr<const Grid> torus, const TabulateOptions& options = {}) {
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
        if (!std::isfinite(p_grid[i])) throw DomainError("slope grid must be finite");
        if (i > 0 && !(p_grid[i] > p_grid[i - 1])) throw DomainError("slope grid must increase strictly");
    }
    const Vec e = options.direction;
    const double e_norm = std::hypot(e[0], e[1]);
    if (!(e_norm > 0.0)) throw DomainError("slope direction must be nonzero");

    std::vector<std::optional<double>> values(p_grid.size());
    std::vector<std::string> reasons(p_grid.size());
    parallel_for(p_grid.size(), options.workers, [&](std::size_t i) {
        try {
            const CellSolution s = solve_cell(cell, {p_grid[i] * e[0], p_grid[i] * e[1]}, x, torus, options.ergodic);
            if (s.converged)
                values[i] = s.value;
            else
                reasons[i] = s.diagnostics.message;
        } catch (const std::exception& ex) {
            reasons[i] = ex.what();
        }
    });

    std::vector<double> p, v;
    std::vector<std::pair<double, std::string>> failures;
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
        if (values[i]) {
            p.push_back(p_grid[i]);
            v.push_back(*values[i]);
        } else {
            failures.emplace_back(p_grid[i], reasons[i]);
        }
    }
    if (p.size() < 2) throw SolverError("fewer than two cell solves succeeded");
    EffectiveHamiltonian H(p, v, x);
    H.failures = std::move(failures);

    auto& rep = H.coercivity;
    const double tol = options.ergodic.scheme.tolerance;
    double b_at_largest = 1.0;
    std::size_t largest = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::abs(p[i]) * e_norm;
        double lb = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < torus->size(); ++k) {
            const Point y = torus->node(k);
            lb = std::min(lb, cell.hamiltonian.b(y) * std::pow(q, cell.hamiltonian.m) + cell.hamiltonian.lower_order(y) -
                                  cell.f(y));
        }
        rep.lower_bound.push_back(lb);
        rep.worst_margin = std::min(rep.worst_margin, v[i] - lb);
        if (std::abs(p[i]) > std::abs(p[largest])) largest = i;
    }
    rep.lower_bound_ok = rep.worst_margin >= -2.0 * tol;
    for (std::size_t k = 0; k < torus->size(); ++k) b_at_largest = std::max(b_at_largest, cell.hamiltonian.b(torus->node(k)));
    const double q_big = std::abs(p[largest]) * e_norm;
    rep.growth_ratio = q_big > 0.0 ? v[largest] / (b_at_largest * std::pow(q_big, cell.hamiltonian.m))
                                   : std::numeric_limits<double>::quiet_NaN();
    rep.growth_ok = rep.growth_ratio >= 0.5 && rep.growth_ratio <= 2.0;
    const auto argmin = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    rep.growing = true;
    if (argmin > 0) rep.growing = rep.growing && *std::max_element(v.begin(), v.begin() + static_cast<long>(argmin) + 1) == v.front();
    if (argmin + 1 < v.size()) rep.growing = rep.growing && *std::max_element(v.begin() + static_cast<long>(argmin), v.end()) == v.back();
    return H;
}

struct HomogenizedOptions {
    double tolerance = 1e-12;
    int max_sweeps = 20000;
    /// Table extension stops once the slope range would exceed this bound.
    double slope_cap = 1e3;
};

struct HomogenizedSolution {
    DiscreteField solution;
    /// Table after any extensions.
    EffectiveHamiltonian table;
    int sweeps = 0;
    int extensions = 0;
    /// sup-norm residual of the discrete homogenized equation
    double residual = 0.0;
    std::vector<char> data_active;
};

namespace detail {

/// Discrete homogenized residual at node k for the value t.
inline double homogenized_node(const EffectiveHamiltonian& H, const Grid& g, const Eigen::VectorXd& u, std::size_t k,
                               double t, double data, bool& data_wins) {
    const double h = g.spacing(0);
    const auto n = static_cast<std::size_t>(g.nodes(0));
    const double inf = std::numeric_limits<double>::infinity();
    const double a = k == 0 ? -inf : (t - u[static_cast<Eigen::Index>(k - 1)]) / h;
    const double b = k + 1 == n ? inf : (u[static_cast<Eigen::Index>(k + 1)] - t) / h;
    const double eq = H.godunov(a, b) + t;
    data_wins = false;
    if (k == 0 || k + 1 == n) {
        if (t - data > eq) {
            data_wins = true;
            return t - data;
        }
    }
    return eq;
}

inline std::pair<double, double> max_abs_slope_range(const Eigen::VectorXd& u, double h) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
        const double s = (u[i + 1] - u[i]) / h;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    return {lo, hi};
}

}  // namespace detail

/**
 * @brief Solves Fbar(u') + u = 0 on an interval with generalized Dirichlet data g.
 *
 * Godunov flux of the interpolated table; boundary nodes take the one-sided inward difference
 * and max(equation, u - g). Nonlinear Gauss-Seidel with alternating sweep directions, each node
 * update solved exactly by a bracketed root search. If the solution uses slopes outside the table
 * and `extend` is given, the table is doubled with extend(p) values until covered.
 * @throws ConfigError for a grid that is not a 1D interval; SolverError if the slopes leave the
 * table after the cap, the table is not coercive, or the sweeps do not converge.
 */
inline HomogenizedSolution solve_homogenized(const EffectiveHamiltonian& Fbar, const ScalarField& g,
                                             std::shared_ptr<const Grid> grid, const HomogenizedOptions& options = {},
                                             const std::function<double(double)>& extend = {}) {
    if (grid->dimension() != 1 || grid->periodic())
        throw ConfigError("solve_homogenized works on a one-dimensional interval grid");
    const Grid& G = *grid;
    const auto n = static_cast<Eigen::Index>(G.size());
    const double h = G.spacing(0);
    const std::vector<double> data{g(G.node(0)), g(G.node(G.size() - 1))};

    HomogenizedSolution out;
    out.table = Fbar;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (;;) {
        const EffectiveHamiltonian& H = out.table;
        if (!H.coercive_ends()) throw SolverError("effective table is not coercive at its ends");
        const auto [h_min, p_star] = H.minimum();
        bool converged = false;
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            double change = 0.0;
            const bool forward = sweep % 2 == 0;
            for (Eigen::Index s = 0; s < n; ++s) {
                const auto k = static_cast<std::size_t>(forward ? s : n - 1 - s);
                const double dk = k == 0 ? data[0] : (k + 1 == static_cast<std::size_t>(n) ? data[1] : 0.0);
                bool dw = false;
                auto phi = [&](double t) { return detail::homogenized_node(H, G, u, k, t, dk, dw); };
                double hi = -h_min;
                if (k == 0 || k + 1 == static_cast<std::size_t>(n)) hi = std::min(hi, dk);
                double lo = hi - 1.0;
                if (k > 0) lo = std::min(lo, u[static_cast<Eigen::Index>(k) - 1] + h * p_star - 1.0);
                if (k + 1 < static_cast<std::size_t>(n)) lo = std::min(lo, u[static_cast<Eigen::Index>(k) + 1] - h * p_star - 1.0);
                double flo = phi(lo), fhi = phi(hi);
                for (int i = 0; i < 200 && flo > 0.0; ++i) {
                    lo -= 2.0 * (hi - lo);
                    flo = phi(lo);
                }
                if (flo > 0.0 || fhi < 0.0) throw SolverError("homogenized node update not bracketed");
                double t = hi;
                if (fhi > 0.0) {
                    std::uintmax_t it = 200;
                    const auto r = boost::math::tools::toms748_solve(phi, lo, hi, flo, fhi,
                                                                     boost::math::tools::eps_tolerance<double>(52), it);
                    t = 0.5 * (r.first + r.second);
                }
                change = std::max(change, std::abs(t - u[static_cast<Eigen::Index>(k)]));
                u[static_cast<Eigen::Index>(k)] = t;
            }
            out.sweeps = sweep + 1;
            if (change < options.tolerance) {
                converged = true;
                break;
            }
        }
        if (!converged) throw SolverError("homogenized sweeps did not converge");

        const auto [s_lo, s_hi] = detail::max_abs_slope_range(u, h);
        if (H.covers(s_lo) && H.covers(s_hi)) break;
        if (!extend) throw SolverError("solution slopes leave the effective table");
        const double reach = 2.0 * std::max(std::abs(H.p_min()), std::abs(H.p_max()));
        if (reach > options.slope_cap) throw SolverError("solution slopes leave the effective table after the extension cap");
        out.table = H.doubled(extend);
        ++out.extensions;
    }

    out.data_active.assign(G.size(), 0);
    double res = 0.0;
    for (std::size_t k = 0; k < G.size(); ++k) {
        const double dk = k == 0 ? data[0] : (k + 1 == G.size() ? data[1] : 0.0);
        bool dw = false;
        res = std::max(res, std::abs(detail::homogenized_node(out.table, G, u, k, u[static_cast<Eigen::Index>(k)], dk, dw)));
        out.data_active[k] = dw ? 1 : 0;
    }
    out.residual = res;
    out.solution = DiscreteField(grid, u);
    return out;
}

/** @brief Errors of the oscillatory solves against the homogenized solution. */
struct EpsSweepReport {
    std::vector<double> eps;
    std::vector<double> errors;
    std::vector<int> nodes;
    int nodes_per_period = 32;
    std::vector<double> runtimes;
    /// max over dyadic scales of omega(s) / s^alpha, alpha = (m-2)/(m-1)
    std::vector<double> holder_constants;
    /// total time of the homogenized solves
    double homogenized_runtime = 0.0;
    /// "first-order" when the oscillatory family has no diffusion, else "eps-diffusion"
    std::string variant;
    /// homogenized solution on the finest grid
    DiscreteField homogenized;
};

/// max over dyadic scales s of omega(s) / s^alpha on the whole grid.
inline double holder_constant(const DiscreteField& u, double alpha) {
    const Grid& g = u.grid();
    const double diameter = g.domain().upper[0] - g.domain().lower[0];
    const auto t = modulus_of_continuity(u, Region::whole(), dyadic_scales(g.spacing(0), 0.5 * diameter));
    double K = 0.0;
    for (std::size_t i = 0; i < t.scales.size(); ++i) K = std::max(K, t.omega[i] / std::pow(t.scales[i], alpha));
    return K;
}

struct EpsSweepOptions {
    int nodes_per_period = 32;
    SchemeParams scheme{};
    HomogenizedOptions homogenized{};
    unsigned workers = 0;
};

/**
 * @brief Solves the oscillatory problem for each eps and compares with the homogenized solution.
 *
 * The grid for eps has length/eps * nodes_per_period cells. The homogenized equation is solved on
 * the same grid, so the reported error carries no discretization mismatch; its solution also
 * seeds the oscillatory Newton solve.
 * @throws ConfigError for fewer than 16 nodes per period, an empty or non-decreasing eps list, or a
 * family that is not a 1D interval problem; SolverError if an oscillatory solve fails.
 */
inline EpsSweepReport epsilon_sweep(const std::function<ProblemSpec(double)>& family, const std::vector<double>& eps_list,
                                    const EffectiveHamiltonian& Fbar, const EpsSweepOptions& options = {},
                                    const std::function<double(double)>& extend = {}) {
    if (options.nodes_per_period < 16)
        throw ConfigError("homogenize.nodes_per_period: at least 16 nodes per oscillation period are required");
    if (eps_list.empty()) throw ConfigError("homogenize.eps: the list is empty");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ConfigError("homogenize.eps: values must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ConfigError("homogenize.eps: values must decrease");
    }
    EpsSweepReport rep;
    rep.eps = eps_list;
    rep.nodes_per_period = options.nodes_per_period;
    const std::size_t count = eps_list.size();
    rep.errors.assign(count, 0.0);
    rep.nodes.assign(count, 0);
    rep.runtimes.assign(count, 0.0);
    rep.holder_constants.assign(count, 0.0);

    std::vector<ProblemSpec> specs;
    std::vector<std::shared_ptr<const Grid>> grids;
    bool diffusive = false;
    for (double e : eps_list) {
        ProblemSpec s = family(e);
        if (s.dimension != 1 || s.domain.kind != Domain::Kind::interval)
            throw ConfigError("epsilon_sweep needs a one-dimensional interval family");
        const double length = s.domain.upper[0] - s.domain.lower[0];
        const int cells = static_cast<int>(std::ceil(length / e * options.nodes_per_period - 1e-9));
        grids.push_back(std::make_shared<const Grid>(Grid::uniform(s.domain, cells + 1)));
        for (std::size_t k = 0; k < grids.back()->size(); k += 7)
            diffusive = diffusive || s.diffusion.a11(grids.back()->node(k)) != 0.0;
        specs.push_back(std::move(s));
    }
    rep.variant = diffusive ? "eps-diffusion" : "first-order";
    const double alpha = specs.front().hamiltonian.m > 2.0
                             ? (specs.front().hamiltonian.m - 2.0) / (specs.front().hamiltonian.m - 1.0)
                             : 1.0;

    std::vector<DiscreteField> homogenized(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        homogenized[i] = solve_homogenized(Fbar, specs.front().boundary.g, grids[i], options.homogenized, extend).solution;
        rep.homogenized_runtime += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    rep.homogenized = homogenized.back();

    parallel_for(count, options.workers, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        const SolveReport r = solve_stationary(specs[i], grids[i], options.scheme, 0.0, homogenized[i]);
        if (!r.converged) throw SolverError("oscillatory solve failed for eps = " + format_number(eps_list[i]) + ": " + r.message);
        rep.errors[i] = (r.solution.values() - homogenized[i].values()).cwiseAbs().maxCoeff();
        rep.nodes[i] = grids[i]->nodes(0);
        rep.holder_constants[i] = holder_constant(r.solution, alpha);
        rep.runtimes[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return rep;
}

inline void write_eps_sweep_csv(const EpsSweepReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "eps,error_sup,nodes,holder_constant\n";
    for (std::size_t i = 0; i < r.eps.size(); ++i)
        out << format_number(r.eps[i]) << "," << format_number(r.errors[i]) << "," << r.nodes[i] << ","
            << format_number(r.holder_constants[i]) << "\n";
}

}  // namespace sqhj
