#pragma once

#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "problem.hpp"
#include "scheme.hpp"

namespace sqhj {

/** @brief Outcome of a stationary solve. */
struct SolveReport {
    DiscreteField solution;
    double residual = std::numeric_limits<double>::infinity();
    /// Stopping level: the scheme tolerance, raised to the rounding level of the stencil for large |u|.
    double tolerance = 0.0;
    int iterations = 0;
    std::vector<double> history;
    /// Per boundary node (in Grid::boundary_nodes order): 1 if u = g is the active branch.
    std::vector<char> data_active;
    bool converged = false;
    bool clamp_bound = false;
    double clamp = 0.0;
    std::string message;
};

namespace detail {

struct NewtonOutcome {
    bool converged = false;
    bool clamp_active = false;
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
};

/**
 * @brief Pseudo-transient continuation: Newton steps on (J + I/dt) du = -R with dt
 * grown by the residual ratio on success and cut by four on failure.
 * The system callback fills R (and J when requested) and returns whether the clamp is active.
 */
inline NewtonOutcome ptc_newton(
    const std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&, SchemeOperator::Triplets*)>& system,
    Eigen::VectorXd& u, double tol, int max_iterations, std::vector<double>& history, double dt0 = 1.0,
    double roundoff_scale = 0.0) {
    const Eigen::Index n = u.size();
    Eigen::VectorXd r, rt, ut;
    SchemeOperator::Triplets trip, trip_t;
    NewtonOutcome out;
    bool clamp = system(u, r, &trip);
    double norm = r.cwiseAbs().maxCoeff();
    double dt = dt0;
    Eigen::SparseMatrix<double> J(n, n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    auto target = [&] { return std::max(tol, roundoff_scale * u.cwiseAbs().maxCoeff()); };
    for (int it = 0; it < max_iterations; ++it) {
        history.push_back(norm);
        out.iterations = it;
        if (norm < target()) {
            out.converged = true;
            break;
        }
        J.setFromTriplets(trip.begin(), trip.end());
        for (Eigen::Index i = 0; i < n; ++i) J.coeffRef(i, i) += 1.0 / dt;
        J.makeCompressed();
        lu.compute(J);
        Eigen::VectorXd du;
        bool ok = lu.info() == Eigen::Success;
        if (ok) {
            du = lu.solve(-r);
            ok = lu.info() == Eigen::Success && du.allFinite();
        }
        if (!ok) {
            dt /= 4.0;
            if (dt < 1e-14) break;
            continue;
        }
        ut = u + du;
        const bool clamp_t = system(ut, rt, &trip_t);
        const double norm_t = rt.cwiseAbs().maxCoeff();
        if (norm_t < norm)
            dt = std::min(dt * norm / norm_t * 2.0, 1e12);
        else
            dt /= 4.0;
        if (norm_t < 1.5 * norm && std::isfinite(norm_t)) {
            u.swap(ut);
            r.swap(rt);
            trip.swap(trip_t);
            norm = norm_t;
            clamp = clamp_t;
        }
        if (dt < 1e-14) break;
    }
    if (!out.converged && norm < target()) out.converged = true;
    out.residual = norm;
    out.clamp_active = clamp;
    return out;
}

/// Runs ptc_newton, doubling the clamp until it is inactive at convergence.
inline NewtonOutcome solve_with_clamp_release(SchemeOperator& op, Eigen::VectorXd& u, const SchemeParams& params,
                                              std::vector<double>& history, double& final_clamp,
                                              const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& adjust = {},
                                              double roundoff_scale = 0.0) {
    op.set_clamp(params.clamp);
    NewtonOutcome out;
    for (int doubling = 0; doubling < 60; ++doubling) {
        auto system = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r, SchemeOperator::Triplets* jac) {
            const auto ev = op.residual(v, r, jac);
            if (adjust) adjust(v, r);
            return ev.clamp_active;
        };
        out = ptc_newton(system, u, params.tolerance, params.max_iterations, history, 1.0, roundoff_scale);
        if (!out.converged || !out.clamp_active) break;
        op.set_clamp(2.0 * op.clamp());
    }
    final_clamp = op.clamp();
    return out;
}

/// Residual change per unit of |u| caused by rounding u in the second-difference stencil.
inline double roundoff_scale(const ProblemSpec& spec, const Grid& grid) {
    double s = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Point x = grid.node(k);
        double v = 2.0 * spec.diffusion.a11(x) / (grid.spacing(0) * grid.spacing(0));
        if (grid.dimension() == 2)
            v += 2.0 * spec.diffusion.a22(x) / (grid.spacing(1) * grid.spacing(1)) +
                 2.0 * std::abs(spec.diffusion.a12(x)) / (grid.spacing(0) * grid.spacing(1));
        s = std::max(s, v);
    }
    return 8.0 * std::numeric_limits<double>::epsilon() * s;
}

inline std::vector<char> boundary_activity(const SchemeOperator& op, const Eigen::VectorXd& u) {
    Eigen::VectorXd r;
    const auto ev = op.residual(u, r);
    std::vector<char> out;
    for (std::size_t k : op.grid().boundary_nodes()) out.push_back(ev.data_active[k]);
    return out;
}

}  // namespace detail

/**
 * @brief Solves F + lambda u = 0 by pseudo-transient Newton iteration with gradient clamp release.
 * @throws DomainError if lambda < 0 or lambda + min c <= 0; ConfigError from the scheme.
 */
inline SolveReport solve_stationary(const ProblemSpec& spec, std::shared_ptr<const Grid> grid,
                                    const SchemeParams& params, double lambda,
                                    const std::optional<DiscreteField>& initial = std::nullopt,
                                    Vec shift = {0.0, 0.0}) {
    params.validate();
    if (!(lambda >= 0.0)) throw DomainError("solve_stationary needs lambda >= 0");
    SchemeOperator op(spec, *grid, lambda, shift, params.layer_constant);
    double c_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid->size(); ++k) c_min = std::min(c_min, spec.c(grid->node(k)));
    if (!(lambda + c_min > 0.0)) throw DomainError("solve_stationary needs lambda + min c > 0");

    Eigen::VectorXd u = initial ? initial->values() : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->size()));
    SolveReport rep;
    double clamp = 0.0;
    const double floor_scale = detail::roundoff_scale(spec, *grid);
    const auto out = detail::solve_with_clamp_release(op, u, params, rep.history, clamp, {}, floor_scale);
    rep.iterations = out.iterations;
    rep.clamp = clamp;
    rep.solution = DiscreteField(grid, u);
    rep.residual = discrete_residual(spec, rep.solution, lambda, shift, params.layer_constant).sup_norm();
    rep.clamp_bound = out.converged && out.clamp_active;
    rep.tolerance = std::max(params.tolerance, floor_scale * u.cwiseAbs().maxCoeff());
    rep.converged = out.converged && !out.clamp_active && rep.residual < rep.tolerance;
    rep.data_active = detail::boundary_activity(op, u);
    std::ostringstream msg;
    if (rep.converged)
        msg << "converged in " << rep.iterations << " iterations";
    else if (rep.clamp_bound)
        msg << "clamp-bound solution";
    else
        msg << "no convergence after " << rep.iterations << " iterations, residual " << rep.residual;
    rep.message = msg.str();
    return rep;
}

/** @brief Time-marching scheme for the evolution problem. */
enum class TimeStepping { implicit_euler, explicit_euler };

struct EvolutionOptions {
    TimeStepping method = TimeStepping::implicit_euler;
    /// Step for the implicit scheme; the explicit scheme uses the CFL rule.
    double dt = 0.05;
    std::vector<double> snapshot_times;
};

struct Snapshot {
    double time = 0.0;
    DiscreteField field;
};

/**
 * @brief One explicit Euler step u - dt F(u); generalized Dirichlet nodes take min(u - dt F, g).
 */
inline Eigen::VectorXd explicit_step(SchemeOperator& op, const Eigen::VectorXd& u, double dt) {
    op.set_data_branch(false);
    Eigen::VectorXd r;
    op.residual(u, r);
    op.set_data_branch(true);
    Eigen::VectorXd out = u - dt * r;
    if (op.generalized_dirichlet())
        for (std::size_t k : op.grid().boundary_nodes()) {
            const auto i = static_cast<Eigen::Index>(k);
            out[i] = std::min(out[i], op.boundary_data(k));
        }
    return out;
}

/**
 * @brief Marches u_t + F = 0 from u0 to T and returns snapshots at the requested times
 * (always including T).
 * @throws DomainError if T <= 0 or u0 is not finite; SolverError on explicit CFL blow-up or
 * implicit step failure.
 */
inline std::vector<Snapshot> solve_evolution(const ProblemSpec& spec, const DiscreteField& u0, double T,
                                             const SchemeParams& params, EvolutionOptions options = {}) {
    params.validate();
    if (!(T > 0.0)) throw DomainError("solve_evolution needs T > 0");
    if (!u0.values().allFinite()) throw DomainError("initial data must be finite");
    auto grid = u0.grid_ptr();
    SchemeOperator op(spec, *grid, 0.0, {0.0, 0.0}, params.layer_constant);
    std::vector<double> times = options.snapshot_times;
    times.push_back(T);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<Snapshot> snaps;
    Eigen::VectorXd u = u0.values();
    double t = 0.0;
    std::size_t next = 0;
    auto record = [&]() {
        while (next < times.size() && t >= times[next] - 1e-12) {
            snaps.push_back({times[next], DiscreteField(grid, u)});
            ++next;
        }
    };
    record();
    if (options.method == TimeStepping::explicit_euler) {
        op.set_clamp(params.clamp);
        const double dt = op.time_step(params.cfl);
        Eigen::VectorXd r;
        op.residual(u, r);
        const double base = std::max(r.cwiseAbs().maxCoeff(), 1.0);
        while (t < T - 1e-12) {
            const double step = std::min(dt, T - t);
            u = explicit_step(op, u, step);
            t += step;
            op.residual(u, r);
            if (!(r.cwiseAbs().maxCoeff() <= 10.0 * base) && !u.allFinite())
                throw SolverError("explicit evolution: CFL violation detected at t = " + std::to_string(t));
            if (!u.allFinite()) throw SolverError("explicit evolution: non-finite values at t = " + std::to_string(t));
            record();
        }
        return snaps;
    }
    if (!(options.dt > 0.0)) throw DomainError("implicit time step must be positive");
    Eigen::VectorXd u_old;
    std::vector<double> history;
    while (t < T - 1e-12) {
        const double step = std::min(options.dt, T - t);
        u_old = u;
        op.set_time_term(&u_old, step);
        history.clear();
        double clamp = 0.0;
        const auto out = detail::solve_with_clamp_release(op, u, params, history, clamp);
        if (!out.converged || out.clamp_active)
            throw SolverError("implicit evolution step failed at t = " + std::to_string(t) + " (residual " +
                              std::to_string(out.residual) + ")");
        t += step;
        record();
    }
    op.set_time_term(nullptr, 1.0);
    return snaps;
}

/** @brief A node at which a field fails to be a discrete subsolution. */
struct Violation {
    std::size_t node = 0;
    double value = 0.0;
};

/**
 * @brief Nodes where the residual exceeds tol (interior and periodic nodes) or min(residual, u - g)
 * exceeds tol (generalized Dirichlet nodes). State-constraint boundary nodes impose nothing
 * on subsolutions.
 */
inline std::vector<Violation> verify_discrete_subsolution(const DiscreteField& u, const ProblemSpec& spec, double tol,
                                                          double lambda = 0.0) {
    SchemeOperator op(spec, u.grid(), lambda);
    op.set_data_branch(false);
    Eigen::VectorXd r;
    op.residual(u.values(), r);
    std::vector<Violation> out;
    const Grid& g = u.grid();
    for (std::size_t k = 0; k < u.size(); ++k) {
        double value = r[static_cast<Eigen::Index>(k)];
        if (g.is_boundary(k)) {
            if (spec.boundary.kind == BoundaryCondition::Kind::state_constraint) continue;
            value = std::min(value, u[k] - op.boundary_data(k));
        }
        if (value > tol) out.push_back({k, value});
    }
    return out;
}

}  // namespace sqhj
