#pragma once

#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "problem.hpp"
#include "regularity.hpp"
#include "scheme.hpp"
#include "solver.hpp"

namespace sqhj {

/// lambda_k = 2^-k for k = 3, ..., 12.
inline std::vector<double> default_discounts() {
    std::vector<double> l;
    for (int k = 3; k <= 12; ++k) l.push_back(std::ldexp(1.0, -k));
    return l;
}

/// sup over grid nodes of |F(0, 0, x)| = |l(x) - f(x)|.
inline double zero_jet_sup(const ProblemSpec& spec, const Grid& grid) {
    double s = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point x = grid.node(k);
        s = std::max(s, std::abs(spec.hamiltonian.lower_order(x) - spec.f(x)));
    }
    return s;
}

namespace detail {

inline void require_ergodic_boundary(const ProblemSpec& spec) {
    if (spec.boundary.kind == BoundaryCondition::Kind::generalized_dirichlet)
        throw DomainError("discounted and ergodic problems need a state-constraint or periodic boundary");
}

inline void require_zero_c(const ProblemSpec& spec, const Grid& grid) {
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (spec.c(grid.node(k)) != 0.0)
            throw DomainError("vanishing discount needs c = 0: the discount is the only zeroth-order term");
}

}  // namespace detail

/**
 * @brief Solves F + lambda w = 0. The unknown is carried as w - offset so that large
 * discounted solutions keep O(1) values in the Newton iteration.
 * @throws DomainError for lambda <= 0 or a generalized Dirichlet boundary; SolverError if the solve fails.
 */
inline DiscreteField solve_discounted(const ProblemSpec& spec, double lambda, std::shared_ptr<const Grid> grid,
                                      const SchemeParams& params = {},
                                      const std::optional<DiscreteField>& initial = std::nullopt,
                                      double offset = 0.0, Vec shift = {0.0, 0.0}) {
    if (!(lambda > 0.0)) throw DomainError("solve_discounted needs lambda > 0");
    detail::require_ergodic_boundary(spec);
    ProblemSpec shifted = spec;
    shifted.f = spec.f.shifted(-lambda * offset);
    std::optional<DiscreteField> start;
    if (initial) start = *initial + (-offset);
    const auto rep = solve_stationary(shifted, grid, params, lambda, start, shift);
    if (!rep.converged)
        throw SolverError("discounted solve at lambda = " + format_number(lambda) + ": " + rep.message);
    return rep.solution + offset;
}

/** @brief One member of a discount sweep. */
struct SweepRow {
    double lambda = 0.0;
    /// -lambda w_lambda(x0)
    double c = 0.0;
    /// sup-norm change of the normalized corrector from the previous member (NaN for the first)
    double corrector_change = std::numeric_limits<double>::quiet_NaN();
    double discount_min = 0.0;  ///< min lambda w_lambda
    double discount_max = 0.0;  ///< max lambda w_lambda
    double alpha = std::numeric_limits<double>::quiet_NaN();  ///< boundary-band exponent of w_lambda
};

struct ErgodicOptions {
    std::vector<double> lambdas = default_discounts();
    double constant_tol = 1e-3;
    double corrector_tol = 5e-2;
    bool polish = true;
    /// Boundary band used for the per-member Hoelder fit; 0 disables the fit.
    double fit_band = 0.4;
    SchemeParams scheme{};
};

struct ErgodicResult {
    /// Reported constant: the polished value when the bordered solve succeeds, else the extrapolated one.
    double c = 0.0;
    double c_last = 0.0;
    double c_extrapolated = 0.0;
    DiscreteField corrector;
    std::size_t anchor = 0;
    std::vector<SweepRow> sweep;
    double zero_jet_sup = 0.0;
    bool converged = false;
    bool polished = false;
    double polish_residual = std::numeric_limits<double>::infinity();
    std::string message;
};

namespace detail {

/**
 * @brief Newton on the bordered system F(w) = c, w(x0) = 0 starting from (w, c).
 * Returns the final residual sup norm, or infinity on failure.
 */
inline double bordered_polish(const ProblemSpec& spec, const Grid& grid, std::size_t anchor, Eigen::VectorXd& w,
                              double& c, double tol, double layer_constant, Vec shift = {0.0, 0.0},
                              int max_iterations = 40) {
    SchemeOperator op(spec, grid, 0.0, shift, layer_constant);
    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto a = static_cast<Eigen::Index>(anchor);
    w.array() -= w[a];
    Eigen::VectorXd r;
    SchemeOperator::Triplets trip;
    auto residual_norm = [&](const Eigen::VectorXd& v, double cc, SchemeOperator::Triplets* t) {
        op.residual(v, r, t);
        r.array() -= cc;
        return r.cwiseAbs().maxCoeff();
    };
    double norm = residual_norm(w, c, &trip);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    for (int it = 0; it < max_iterations && norm >= tol; ++it) {
        trip.reserve(trip.size() + static_cast<std::size_t>(2 * n + 1));
        for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(n), -1.0);
        trip.emplace_back(static_cast<int>(n), static_cast<int>(a), 1.0);
        Eigen::SparseMatrix<double> J(n + 1, n + 1);
        J.setFromTriplets(trip.begin(), trip.end());
        J.makeCompressed();
        lu.compute(J);
        if (lu.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        Eigen::VectorXd rhs(n + 1);
        rhs.head(n) = -r;
        rhs[n] = -w[a];
        const Eigen::VectorXd step = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !step.allFinite()) return std::numeric_limits<double>::infinity();
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 12; ++half, t *= 0.5) {
            const Eigen::VectorXd wt = w + t * step.head(n);
            const double ct = c + t * step[n];
            SchemeOperator::Triplets trial;
            const double nt = residual_norm(wt, ct, &trial);
            if (nt < norm) {
                w = wt;
                c = ct;
                norm = nt;
                trip.swap(trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    residual_norm(w, c, nullptr);
    return r.cwiseAbs().maxCoeff();
}

}  // namespace detail

/**
 * @brief Vanishing-discount approximation of the ergodic pair (c, w) with F(D^2 w, Dw, x) = c.
 *
 * Each member is warm-started from the previous normalized corrector. The table records
 * c_k = -lambda_k w_k(x0); the reported constant is refined by a bordered Newton solve of
 * the discrete ergodic system when options.polish is set, with the Richardson value
 * (8 c_k - 6 c_{k-1} + c_{k-2}) / 3 as fallback.
 *
 * @throws DomainError if the discounts are not strictly decreasing and positive, c is not
 * identically zero, or the boundary is generalized Dirichlet. SolverError from a member solve.
 */
inline ErgodicResult vanishing_discount(const ProblemSpec& spec, std::shared_ptr<const Grid> grid, std::size_t anchor,
                                        const ErgodicOptions& options = {}, Vec shift = {0.0, 0.0}) {
    const auto& lambdas = options.lambdas;
    if (lambdas.empty()) throw DomainError("discount list is empty");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw DomainError("discounts must be positive");
        if (i > 0 && !(lambdas[i] < lambdas[i - 1])) throw DomainError("discounts must be strictly decreasing");
    }
    if (anchor >= grid->size()) throw DomainError("anchor node outside the grid");
    detail::require_ergodic_boundary(spec);
    detail::require_zero_c(spec, *grid);

    ErgodicResult res;
    res.anchor = anchor;
    res.zero_jet_sup = zero_jet_sup(spec, *grid);
    std::optional<DiscreteField> normalized;
    double c_prev = 0.0;
    for (double lambda : lambdas) {
        const double offset = normalized ? -c_prev / lambda : 0.0;
        std::optional<DiscreteField> start;
        if (normalized) start = *normalized + offset;
        const DiscreteField w = solve_discounted(spec, lambda, grid, options.scheme, start, offset, shift);
        SweepRow row;
        row.lambda = lambda;
        row.c = -lambda * w[anchor];
        row.discount_min = lambda * w.values().minCoeff();
        row.discount_max = lambda * w.values().maxCoeff();
        DiscreteField tilde = w + (-w[anchor]);
        if (normalized) row.corrector_change = (tilde.values() - normalized->values()).cwiseAbs().maxCoeff();
        if (options.fit_band > 0.0 && !grid->periodic()) {
            try {
                const auto t = modulus_of_continuity(w, Region::boundary_band(options.fit_band),
                                                     dyadic_scales(grid->spacing(0), options.fit_band));
                row.alpha = fit_holder_exponent(t).alpha;
            } catch (const DomainError&) {
            }
        }
        res.sweep.push_back(row);
        normalized = std::move(tilde);
        c_prev = row.c;
    }
    const auto& s = res.sweep;
    const std::size_t K = s.size();
    res.c_last = s.back().c;
    res.c_extrapolated =
        K >= 3 ? (8.0 * s[K - 1].c - 6.0 * s[K - 2].c + s[K - 3].c) / 3.0 : res.c_last;
    res.converged = K >= 2 && std::abs(s[K - 1].c - s[K - 2].c) <= options.constant_tol &&
                    s[K - 1].corrector_change <= options.corrector_tol;
    res.c = res.c_extrapolated;
    Eigen::VectorXd w = normalized->values();
    if (options.polish) {
        double c = res.c_extrapolated;
        Eigen::VectorXd trial = w;
        const double layer = options.scheme.layer_constant;
        res.polish_residual =
            detail::bordered_polish(spec, *grid, anchor, trial, c, options.scheme.tolerance, layer, shift);
        if (res.polish_residual < options.scheme.tolerance) {
            res.polished = true;
            res.c = c;
            w = trial;
        }
    }
    w.array() -= w[static_cast<Eigen::Index>(anchor)];
    w[static_cast<Eigen::Index>(anchor)] = 0.0;
    res.corrector = DiscreteField(grid, w);
    res.message = std::string(res.converged ? "Cauchy sweep" : "sweep not Cauchy") +
                  (options.polish ? (res.polished ? ", bordered solve converged" : ", bordered solve failed; extrapolated constant reported")
                                  : "");
    return res;
}

inline void write_sweep_csv(const ErgodicResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "lambda,c,corrector_change,discount_min,discount_max,alpha\n";
    for (const auto& row : r.sweep)
        out << format_number(row.lambda) << "," << format_number(row.c) << "," << format_number(row.corrector_change)
            << "," << format_number(row.discount_min) << "," << format_number(row.discount_max) << ","
            << format_number(row.alpha) << "\n";
}

/** @brief Gaps of a candidate ergodic pair. */
struct ErgodicPairReport {
    double interior_gap = 0.0;  ///< max |F(w) - c| over interior and periodic nodes
    double boundary_gap = 0.0;  ///< max (c - F(w))^+ over constrained boundary nodes
    std::size_t worst_node = 0;
    bool passed = false;
};

/**
 * @brief Checks |F(w) - c| <= tol at interior nodes and F(w) >= c - tol at boundary nodes.
 */
inline ErgodicPairReport verify_ergodic_pair(const ProblemSpec& spec, const DiscreteField& w, double c, double tol,
                                             double layer_constant = 0.0) {
    const auto r = discrete_residual(spec, w, 0.0, {0.0, 0.0}, layer_constant);
    const Grid& g = w.grid();
    ErgodicPairReport rep;
    double worst = -1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double gap = g.is_boundary(k) ? std::max(c - r[k], 0.0) : std::abs(r[k] - c);
        if (g.is_boundary(k))
            rep.boundary_gap = std::max(rep.boundary_gap, gap);
        else
            rep.interior_gap = std::max(rep.interior_gap, gap);
        if (gap > worst) {
            worst = gap;
            rep.worst_node = k;
        }
    }
    rep.passed = rep.interior_gap <= tol && rep.boundary_gap <= tol;
    return rep;
}

/** @brief One member of a stability sweep. */
struct StabilityRow {
    int k = 0;
    double c = std::numeric_limits<double>::quiet_NaN();
    double change = std::numeric_limits<double>::quiet_NaN();  ///< c_k - c_{k-1}
    bool ok = false;
    std::string message;
};

/**
 * @brief Ergodic constants of the family F_k for the given k; member failures are recorded per row.
 */
inline std::vector<StabilityRow> stability_sweep(const std::function<ProblemSpec(int)>& family,
                                                 const std::vector<int>& ks, std::shared_ptr<const Grid> grid,
                                                 std::size_t anchor, const ErgodicOptions& options = {}) {
    std::vector<StabilityRow> rows;
    for (int k : ks) {
        StabilityRow row;
        row.k = k;
        try {
            const auto r = vanishing_discount(family(k), grid, anchor, options);
            row.c = r.c;
            row.ok = r.converged || r.polished;
            row.message = r.message;
        } catch (const std::exception& e) {
            row.message = e.what();
        }
        if (!rows.empty()) row.change = row.c - rows.back().c;
        rows.push_back(row);
    }
    return rows;
}

/** @brief Large-time behaviour of the generalized Dirichlet evolution. */
struct LargeTimeReport {
    /// max_x |u(x, T)/T + c^+|
    double max_gap = 0.0;
    /// (t, max_x |u(x, t)/t + c^+|) at the checkpoints
    std::vector<std::pair<double, double>> trajectory;
    /// sup |u(T) - u(0.8 T)|
    double late_change = 0.0;
    /// sup norm of the stationary generalized Dirichlet residual of u(T)
    double stationary_residual = 0.0;
    DiscreteField final_field;
};

/**
 * @brief Marches u_t + F = 0 with generalized Dirichlet data to T and compares u/t with -c^+.
 * @param c ergodic constant of the companion state-constraint problem.
 * @throws DomainError unless the boundary is generalized Dirichlet; errors of solve_evolution propagate.
 */
inline LargeTimeReport large_time_ratio(const ProblemSpec& spec, const DiscreteField& u0, double T, double c,
                                        const SchemeParams& params = {}, double dt = 0.05, int checkpoints = 10) {
    if (spec.boundary.kind != BoundaryCondition::Kind::generalized_dirichlet)
        throw DomainError("large_time_ratio needs a generalized Dirichlet evolution spec");
    if (checkpoints < 1) throw DomainError("checkpoints must be positive");
    EvolutionOptions o;
    o.dt = dt;
    for (int i = 1; i <= checkpoints; ++i) o.snapshot_times.push_back(T * i / checkpoints);
    o.snapshot_times.push_back(0.8 * T);
    const auto snaps = solve_evolution(spec, u0, T, params, o);
    const double cp = std::max(c, 0.0);
    LargeTimeReport rep;
    const DiscreteField* late = nullptr;
    for (const auto& s : snaps) {
        const double gap = (s.field.values() / s.time + Eigen::VectorXd::Constant(s.field.values().size(), cp))
                               .cwiseAbs()
                               .maxCoeff();
        rep.trajectory.emplace_back(s.time, gap);
        if (std::abs(s.time - 0.8 * T) < 1e-9 * T) late = &s.field;
    }
    rep.final_field = snaps.back().field;
    rep.max_gap = rep.trajectory.back().second;
    if (late) rep.late_change = (rep.final_field.values() - late->values()).cwiseAbs().maxCoeff();
    rep.stationary_residual = discrete_residual(spec, rep.final_field, 0.0, {0.0, 0.0}, params.layer_constant).sup_norm();
    return rep;
}

}  // namespace sqhj
