#pragma once

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "problem.hpp"

namespace sqhj {

/** @brief Knobs of the discrete solvers. */
struct SchemeParams {
    double cfl = 0.5;
    double tolerance = 1e-8;
    int max_iterations = 400;
    double clamp = 1e3;
    /// Boundary-layer constant; 0 selects the calibrated value for the exponent m.
    double layer_constant = 0.0;

    /// @throws ConfigError if a field is out of range.
    void validate() const {
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("scheme.cfl must lie in (0, 1]");
        if (!(tolerance > 0.0)) throw ConfigError("scheme.tolerance must be positive");
        if (max_iterations < 1) throw ConfigError("scheme.max_iterations must be positive");
        if (!(clamp >= 10.0)) throw ConfigError("scheme.clamp must be at least 10");
        if (layer_constant < 0.0) throw ConfigError("scheme.layer_constant must be nonnegative");
    }

    friend bool operator==(const SchemeParams&, const SchemeParams&) = default;
};

/**
 * @brief Boundary-layer mismatch of the discrete state-constraint closure.
 *
 * On the half line with a = b = 1 and zero data, the closure produces increments
 * Q_1 = ((m-1)/m)(kappa/m)^{1/(m-1)} and Q_{j+1} + Q_{j+1}^m = Q_j in units of h^alpha.
 * The return value is sum_{j<=J} Q_j - K J^alpha, where K d^alpha with
 * K = (m-1)^{-1/(m-1)}/alpha is the exact layer of -u'' + |u'|^m = 0.
 */
inline double layer_mismatch(double kappa, double m, int J) {
    const double alpha = (m - 2.0) / (m - 1.0);
    const double K = std::pow(m - 1.0, -1.0 / (m - 1.0)) / alpha;
    double Q = (m - 1.0) / m * std::pow(kappa / m, 1.0 / (m - 1.0));
    double sum = Q;
    for (int j = 2; j <= J; ++j) {
        double q = std::min(Q, std::pow(Q, 1.0 / m));
        for (int it = 0; it < 80; ++it) {
            const double step = (q + std::pow(q, m) - Q) / (1.0 + m * std::pow(q, m - 1.0));
            q -= step;
            if (std::abs(step) <= 1e-16 * q) break;
        }
        Q = q;
        sum += Q;
    }
    return sum - K * std::pow(J, alpha);
}

/// Layer constant kappa(m) for which the discrete layer matches the exact one after J cells.
inline double calibrated_layer_constant(double m, int J = 64) {
    if (!(m > 2.0)) throw DomainError("layer calibration needs m > 2");
    static std::mutex mutex;
    static std::map<std::pair<double, int>, double> cache;
    std::lock_guard<std::mutex> lock(mutex);
    const auto key = std::make_pair(m, J);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    double lo = std::log(1e-4), hi = std::log(1e5);
    if (layer_mismatch(std::exp(lo), m, J) > 0.0 || layer_mismatch(std::exp(hi), m, J) < 0.0)
        throw SolverError("layer calibration failed to bracket for m = " + std::to_string(m));
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (layer_mismatch(std::exp(mid), m, J) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double kappa = std::exp(0.5 * (lo + hi));
    cache.emplace(key, kappa);
    return kappa;
}

/**
 * @brief Admissible velocities: |v| <= vmax, and v_i >= lower_i on constrained axes.
 * Components on free axes are taken nonnegative, matching the nonnegative upwind slopes.
 */
struct VelocitySet {
    int dimension = 1;
    std::array<bool, 2> constrained{false, false};
    std::array<double, 2> lower{0.0, 0.0};
    double vmax = std::numeric_limits<double>::infinity();
};

struct HamiltonianValue {
    double value = 0.0;
    std::array<double, 2> v{0.0, 0.0};
    bool saturated = false;
};

namespace detail {

inline double lagrangian(double r, double m, double b) {
    return r <= 0.0 ? 0.0 : (m - 1.0) / m * r * std::pow(r / (m * b), 1.0 / (m - 1.0));
}

inline double lagrangian_slope(double r, double m, double b) {
    return r <= 0.0 ? 0.0 : std::pow(r / (m * b), 1.0 / (m - 1.0));
}

}  // namespace detail

/**
 * @brief sup over v in the velocity set of v.q - L(|v|), where L is the convex dual of
 * b t^m. On the full ball this is the clamped power b|q|^m; the optimal v is returned
 * as the gradient in q.
 */
inline HamiltonianValue constrained_hamiltonian(const std::array<double, 2>& q, const VelocitySet& set, double m,
                                                double b) {
    using detail::lagrangian;
    using detail::lagrangian_slope;
    const int dim = set.dimension;
    auto objective = [&](const std::array<double, 2>& v) {
        const double r = dim == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]);
        double s = v[0] * q[0] - lagrangian(r, m, b);
        if (dim == 2) s += v[1] * q[1];
        return s;
    };
    const double qn = dim == 1 ? std::abs(q[0]) : std::hypot(q[0], q[1]);

    HamiltonianValue best;
    {
        const double speed = qn > 0.0 ? std::min(m * b * std::pow(qn, m - 1.0), set.vmax) : 0.0;
        std::array<double, 2> v{0.0, 0.0};
        if (qn > 0.0)
            for (int i = 0; i < dim; ++i) v[i] = speed * q[i] / qn;
        bool feasible = true;
        for (int i = 0; i < dim; ++i)
            if (set.constrained[i] && v[i] < set.lower[i]) feasible = false;
        if (feasible) {
            best.v = v;
            best.saturated = speed >= set.vmax;
            best.value = best.saturated ? set.vmax * qn - lagrangian(set.vmax, m, b) : b * std::pow(qn, m);
            return best;
        }
    }

    best.value = -std::numeric_limits<double>::infinity();
    auto consider = [&](const std::array<double, 2>& v, bool saturated) {
        const double val = objective(v);
        if (val > best.value) {
            best.value = val;
            best.v = v;
            best.saturated = saturated;
        }
    };
    for (int i = 0; i < dim; ++i) {
        if (!set.constrained[i]) continue;
        const double fixed = set.lower[i];
        if (dim == 1) {
            consider({fixed, 0.0}, fixed >= set.vmax);
            continue;
        }
        const int j = 1 - i;
        const double lo = set.constrained[j] ? set.lower[j] : 0.0;
        const double hi = std::isinf(set.vmax) ? std::numeric_limits<double>::infinity()
                                               : std::sqrt(std::max(set.vmax * set.vmax - fixed * fixed, 0.0));
        if (lo > hi) continue;
        auto slope = [&](double s) {
            const double r = std::hypot(fixed, s);
            return r > 0.0 ? q[j] - lagrangian_slope(r, m, b) * s / r : q[j];
        };
        double s;
        if (slope(lo) <= 0.0) {
            s = lo;
        } else if (!std::isinf(hi) && slope(hi) >= 0.0) {
            s = hi;
        } else {
            double a = lo, c = std::max(2.0 * lo, 1.0);
            if (std::isinf(hi))
                while (slope(c) > 0.0) c *= 2.0;
            else
                c = hi;
            for (int it = 0; it < 200 && c - a > 1e-15 * c; ++it) {
                const double mid = 0.5 * (a + c);
                if (slope(mid) > 0.0)
                    a = mid;
                else
                    c = mid;
            }
            s = 0.5 * (a + c);
        }
        std::array<double, 2> v{0.0, 0.0};
        v[i] = fixed;
        v[j] = s;
        consider(v, std::hypot(fixed, s) >= set.vmax * (1.0 - 1e-14));
    }
    return best;
}

/// Clamped power b t^m, extended linearly beyond P.
inline double clamped_power(double t, double m, double b, double P) {
    if (t <= P) return b * std::pow(t, m);
    return b * std::pow(P, m) + m * b * std::pow(P, m - 1.0) * (t - P);
}

/**
 * @brief Monotone finite-difference operator for F + lambda u on a grid.
 *
 * Interior nodes: centred second differences (seven-point stencil for a12), Godunov
 * upwind slopes per axis combined in the Euclidean norm, Hamiltonian clamped beyond P.
 * Boundary nodes of bounded domains: on each constrained axis the outward one-sided
 * slope enters the Hamiltonian with the admissible velocity bounded below by
 * kappa a_ii / h_i, which replaces the normal second difference. Generalized Dirichlet
 * nodes use max(F, u - g), so that u <= g with the equation active wherever the data is lost.
 */
class SchemeOperator {
public:
    using Triplets = std::vector<Eigen::Triplet<double>>;

    /**
     * @throws ConfigError for non-power Hamiltonians, non-monotone cross diffusion, or a
     * shift on a bounded grid.
     */
    SchemeOperator(const ProblemSpec& spec, const Grid& grid, double lambda = 0.0, Vec shift = {0.0, 0.0},
                   double layer_constant = 0.0)
        : grid_(grid), lambda_(lambda), shift_(shift), m_(spec.hamiltonian.m) {
        if (spec.hamiltonian.form != Hamiltonian::Form::power)
            throw ConfigError("problem.hamiltonian: the grid solver handles the power form b|p|^m + l only");
        if (spec.dimension != grid.dimension()) throw ConfigError("grid and problem dimensions differ");
        if (!(m_ > 1.0)) throw ConfigError("problem.m: the grid solver needs m > 1");
        if (!grid.periodic() && (shift[0] != 0.0 || shift[1] != 0.0))
            throw ConfigError("a slope shift requires a periodic grid");
        generalized_dirichlet_ = spec.boundary.kind == BoundaryCondition::Kind::generalized_dirichlet;
        const std::size_t n = grid.size();
        a11_.resize(n);
        a12_.resize(n);
        a22_.resize(n);
        b_.resize(n);
        ell_.resize(n);
        c_.resize(n);
        f_.resize(n);
        g_.resize(n);
        const double hx = grid.spacing(0), hy = grid.dimension() == 2 ? grid.spacing(1) : 1.0;
        double worst_a = 0.0, worst_c = 0.0;
        b_min_ = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            const Point x = grid.node(k);
            a11_[k] = spec.diffusion.a11(x);
            a22_[k] = grid.dimension() == 2 ? spec.diffusion.a22(x) : 0.0;
            a12_[k] = grid.dimension() == 2 ? spec.diffusion.a12(x) : 0.0;
            b_[k] = spec.hamiltonian.b(x);
            ell_[k] = spec.hamiltonian.lower_order(x);
            c_[k] = spec.c(x);
            f_[k] = spec.f(x);
            g_[k] = spec.boundary.g(x);
            if (a11_[k] < 0.0 || a22_[k] < 0.0) throw ConfigError("problem.diffusion: negative diagonal entry");
            if (!(b_[k] > 0.0)) throw ConfigError("problem.b must be positive");
            if (grid.is_boundary(k) && std::abs(a12_[k]) <= 1e-12 * (1.0 + a11_[k] + a22_[k])) a12_[k] = 0.0;
            if (grid.is_boundary(k) && a12_[k] != 0.0)
                throw ConfigError("problem.diffusion: a12 must vanish on the boundary for the monotone stencil");
            if (a11_[k] / hx < std::abs(a12_[k]) / hy - 1e-14 || a22_[k] / hy < std::abs(a12_[k]) / hx - 1e-14)
                throw ConfigError("problem.diffusion: cross diffusion violates the stencil dominance condition "
                                  "a11/hx >= |a12|/hy and a22/hy >= |a12|/hx");
            worst_a = std::max(worst_a, 2.0 * a11_[k] / (hx * hx) + (grid.dimension() == 2 ? 2.0 * a22_[k] / (hy * hy) : 0.0));
            worst_c = std::max(worst_c, std::max(c_[k], 0.0));
            b_min_ = std::min(b_min_, b_[k]);
            b_max_ = std::max(b_max_, b_[k]);
        }
        diffusion_rate_ = worst_a;
        c_plus_ = worst_c;
        kappa_ = layer_constant > 0.0 ? layer_constant : (m_ > 2.0 ? calibrated_layer_constant(m_) : 2.0);
        v0_max_ = 0.0;
        for (std::size_t k : grid.boundary_nodes()) {
            v0_max_ = std::max(v0_max_, kappa_ * a11_[k] / hx);
            if (grid.dimension() == 2) v0_max_ = std::max(v0_max_, kappa_ * a22_[k] / hy);
        }
        set_clamp(std::numeric_limits<double>::infinity());
    }

    const Grid& grid() const { return grid_; }
    double lambda() const { return lambda_; }
    double layer_constant() const { return kappa_; }
    double exponent() const { return m_; }
    bool generalized_dirichlet() const { return generalized_dirichlet_; }
    double boundary_data(std::size_t k) const { return g_[k]; }

    /// Sets the gradient clamp P, raised if needed so that the velocity bound is at least twice the layer bound.
    void set_clamp(double P) {
        if (std::isinf(P)) {
            clamp_ = P;
            return;
        }
        const double needed = v0_max_ > 0.0 ? std::pow(2.0 * v0_max_ / (m_ * b_min_), 1.0 / (m_ - 1.0)) : 0.0;
        clamp_ = std::max(P, needed);
    }
    double clamp() const { return clamp_; }

    /// Adds (u - u_old)/dt to the equation part of every node.
    void set_time_term(const Eigen::VectorXd* u_old, double dt) {
        u_old_ = u_old;
        dt_ = dt;
    }

    /// When false, generalized Dirichlet nodes report the equation part without the data branch.
    void set_data_branch(bool on) { data_branch_ = on; }

    /// Stable explicit step size sigma / (diffusion + velocity + zeroth-order rates).
    double time_step(double cfl) const {
        double velocity = 0.0;
        if (!std::isinf(clamp_)) {
            for (int a = 0; a < grid_.dimension(); ++a) velocity += m_ * b_max_ * std::pow(clamp_, m_ - 1.0) / grid_.spacing(a);
        } else {
            throw SolverError("time_step needs a finite clamp");
        }
        double rate = diffusion_rate_ + velocity + lambda_ + c_plus_;
        if (generalized_dirichlet_) rate = std::max(rate, 1.0);
        if (u_old_) rate += 1.0 / dt_;
        return cfl / rate;
    }

    struct Evaluation {
        bool clamp_active = false;
        std::vector<char> data_active;
    };

    /// Residual (and optionally the Jacobian triplets) of the discrete operator at u.
    Evaluation residual(const Eigen::VectorXd& u, Eigen::VectorXd& r, Triplets* jac = nullptr) const {
        const std::size_t n = grid_.size();
        r.resize(static_cast<Eigen::Index>(n));
        Evaluation ev;
        ev.data_active.assign(n, 0);
        if (jac) {
            jac->clear();
            jac->reserve(n * (grid_.dimension() == 2 ? 9 : 3));
        }
        for (std::size_t k = 0; k < n; ++k) node(u, k, r, jac, ev);
        return ev;
    }

    /// Rate bounds used by tests: diffusion and zeroth order.
    double diffusion_rate() const { return diffusion_rate_; }

private:
    struct Entry {
        long col;
        double val;
    };

    double at(const Eigen::VectorXd& u, long j) const { return u[static_cast<Eigen::Index>(j)]; }

    void node(const Eigen::VectorXd& u, std::size_t k, Eigen::VectorXd& r, Triplets* jac, Evaluation& ev) const {
        const int dim = grid_.dimension();
        const double uk = u[static_cast<Eigen::Index>(k)];
        Entry entries[12];
        int ne = 0;
        auto add = [&](long col, double val) {
            for (int e = 0; e < ne; ++e)
                if (entries[e].col == col) {
                    entries[e].val += val;
                    return;
                }
            entries[ne++] = {col, val};
        };
        const auto& sides = grid_.sides(k);
        const double a_diag[2] = {a11_[k], a22_[k]};
        double value = 0.0;

        std::array<double, 2> q{0.0, 0.0};
        std::array<long, 2> q_plus{-1, -1}, q_minus{-1, -1};
        std::array<double, 2> q_scale{0.0, 0.0};
        VelocitySet set;
        set.dimension = dim;
        set.vmax = std::isinf(clamp_) ? clamp_ : m_ * b_[k] * std::pow(clamp_, m_ - 1.0);

        for (int a = 0; a < dim; ++a) {
            const double h = grid_.spacing(a);
            const int di = a == 0 ? 1 : 0, dj = a == 1 ? 1 : 0;
            if (sides.constrained(a)) {
                const long inner = grid_.neighbour(k, sides.lower[a] ? di : -di, sides.lower[a] ? dj : -dj);
                q[a] = (uk - at(u, inner)) / h;
                q_plus[a] = static_cast<long>(k);
                q_minus[a] = inner;
                q_scale[a] = 1.0 / h;
                set.constrained[a] = true;
                set.lower[a] = kappa_ * a_diag[a] / h;
                continue;
            }
            const long jp = grid_.neighbour(k, di, dj), jm = grid_.neighbour(k, -di, -dj);
            const double up = at(u, jp), um = at(u, jm);
            const double coef = a_diag[a] / (h * h);
            value += -coef * (up - 2.0 * uk + um);
            add(static_cast<long>(k), 2.0 * coef);
            add(jp, -coef);
            add(jm, -coef);
            const double back = (uk - um) / h + shift_[a];
            const double fwd = (up - uk) / h + shift_[a];
            const double g1 = std::max(back, 0.0), g2 = std::max(-fwd, 0.0);
            if (g1 >= g2 && g1 > 0.0) {
                q[a] = g1;
                q_plus[a] = static_cast<long>(k);
                q_minus[a] = jm;
                q_scale[a] = 1.0 / h;
            } else if (g2 > g1) {
                q[a] = g2;
                q_plus[a] = static_cast<long>(k);
                q_minus[a] = jp;
                q_scale[a] = 1.0 / h;
            }
        }

        if (dim == 2 && a12_[k] != 0.0) {
            const double a12 = a12_[k];
            const double w = std::abs(a12) / (grid_.spacing(0) * grid_.spacing(1));
            const int s = a12 > 0.0 ? 1 : -1;
            const long e = grid_.neighbour(k, 1, 0), wst = grid_.neighbour(k, -1, 0);
            const long nn = grid_.neighbour(k, 0, 1), ss = grid_.neighbour(k, 0, -1);
            const long d1 = grid_.neighbour(k, 1, s), d2 = grid_.neighbour(k, -1, -s);
            const long t1 = s > 0 ? nn : ss, t2 = s > 0 ? ss : nn;
            const double mixed = at(u, d1) - at(u, e) - at(u, t1) + 2.0 * uk - at(u, wst) - at(u, t2) + at(u, d2);
            value += -w * mixed;
            add(static_cast<long>(k), -2.0 * w);
            add(d1, -w);
            add(d2, -w);
            add(e, w);
            add(wst, w);
            add(t1, w);
            add(t2, w);
        }

        HamiltonianValue hv;
        if (!sides.any()) {
            const double qn = dim == 1 ? q[0] : std::hypot(q[0], q[1]);
            const double P = clamp_;
            hv.value = clamped_power(qn, m_, b_[k], P);
            const double speed = qn > P ? m_ * b_[k] * std::pow(P, m_ - 1.0) : m_ * b_[k] * std::pow(qn, m_ - 1.0);
            hv.saturated = qn > P;
            for (int a = 0; a < dim; ++a) hv.v[a] = qn > 0.0 ? speed * q[a] / qn : 0.0;
        } else {
            hv = constrained_hamiltonian(q, set, m_, b_[k]);
        }
        if (hv.saturated) ev.clamp_active = true;
        value += hv.value;
        for (int a = 0; a < dim; ++a) {
            if (q_plus[a] < 0 || hv.v[a] == 0.0) continue;
            add(q_plus[a], hv.v[a] * q_scale[a]);
            add(q_minus[a], -hv.v[a] * q_scale[a]);
        }
        const double zeroth = c_[k] + lambda_;
        value += ell_[k] + zeroth * uk - f_[k];
        add(static_cast<long>(k), zeroth);
        if (u_old_) {
            value += (uk - (*u_old_)[static_cast<Eigen::Index>(k)]) / dt_;
            add(static_cast<long>(k), 1.0 / dt_);
        }

        if (generalized_dirichlet_ && data_branch_ && sides.any()) {
            const double data = uk - g_[k];
            if (data > value) {
                value = data;
                ne = 0;
                entries[ne++] = {static_cast<long>(k), 1.0};
                ev.data_active[k] = 1;
            }
        }
        r[static_cast<Eigen::Index>(k)] = value;
        if (jac)
            for (int e = 0; e < ne; ++e)
                jac->emplace_back(static_cast<int>(k), static_cast<int>(entries[e].col), entries[e].val);
    }

    Grid grid_;
    double lambda_ = 0.0;
    Vec shift_{0.0, 0.0};
    double m_ = 3.0;
    bool generalized_dirichlet_ = false;
    std::vector<double> a11_, a12_, a22_, b_, ell_, c_, f_, g_;
    double diffusion_rate_ = 0.0;
    double c_plus_ = 0.0;
    double b_min_ = 1.0, b_max_ = 0.0;
    double kappa_ = 2.0;
    double v0_max_ = 0.0;
    double clamp_ = std::numeric_limits<double>::infinity();
    bool data_branch_ = true;
    const Eigen::VectorXd* u_old_ = nullptr;
    double dt_ = 1.0;
};

/**
 * @brief Unclamped discrete residual of F + lambda u at every node.
 * @throws ConfigError as SchemeOperator.
 */
inline DiscreteField discrete_residual(const ProblemSpec& spec, const DiscreteField& u, double lambda = 0.0,
                                       Vec shift = {0.0, 0.0}, double layer_constant = 0.0) {
    SchemeOperator op(spec, u.grid(), lambda, shift, layer_constant);
    Eigen::VectorXd r;
    op.residual(u.values(), r);
    return DiscreteField(u.grid_ptr(), std::move(r));
}

}  // namespace sqhj
