#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chi.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "growth.hpp"

namespace sqhj {

/**
 * @brief Smoothed distance to the unit sphere, d(x) = 1 - phi(|x|).
 *
 * phi is constant (= 3/8) on [0, 1/4], equal to the identity on [1/2, inf), and on
 * [1/4, 1/2] it is the quartic 3/8 + (z^3 - z^4/2)/4 with z = 4(s - 1/4), whose
 * derivative is the smoothstep 3z^2 - 2z^3. phi is C^2, nondecreasing and convex.
 */
struct RegularizedDistance {
    struct Value {
        double d = 0.0;
        Vec Dd{0.0, 0.0};
        SymMatrix D2d{};
    };

    static double phi(double s) {
        if (s <= 0.25) return 0.375;
        if (s >= 0.5) return s;
        const double z = 4.0 * (s - 0.25);
        return 0.375 + 0.25 * (z * z * z - 0.5 * z * z * z * z);
    }
    static double dphi(double s) {
        if (s <= 0.25) return 0.0;
        if (s >= 0.5) return 1.0;
        const double z = 4.0 * (s - 0.25);
        return 3.0 * z * z - 2.0 * z * z * z;
    }
    static double d2phi(double s) {
        if (s <= 0.25 || s >= 0.5) return 0.0;
        const double z = 4.0 * (s - 0.25);
        return 24.0 * z * (1.0 - z);
    }

    /// d, d', d'' as functions of the radius.
    static std::array<double, 3> radial(double rho) { return {1.0 - phi(rho), -dphi(rho), -d2phi(rho)}; }

    static double center_value() { return 1.0 - phi(0.0); }

    /**
     * @brief d, Dd and D^2 d at x.
     * @throws DomainError if |x| > 1.
     */
    static Value evaluate(const Point& x, int dimension) {
        const double rho = dimension == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
        if (rho > 1.0 + 1e-12) throw DomainError("regularized distance is defined on the closed unit ball");
        Value v;
        const auto r = radial(rho);
        v.d = r[0];
        if (rho == 0.0) return v;
        const double ex = x[0] / rho;
        const double ey = dimension == 2 ? x[1] / rho : 0.0;
        v.Dd = {r[1] * ex, r[1] * ey};
        const double tang = r[1] / rho;
        if (dimension == 1) {
            v.D2d = {r[2], 0.0, 0.0};
        } else {
            v.D2d = {r[2] * ex * ex + tang * (1.0 - ex * ex), (r[2] - tang) * ex * ey,
                     r[2] * ey * ey + tang * (1.0 - ey * ey)};
        }
        return v;
    }
};

/** @brief Value, first and second radial derivative of a radial profile. */
struct RadialJet {
    double w = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
};

/**
 * @brief G(X, p) = -L sum_i max(lambda_i(X), 0) + K1 h(|p|) - K2.
 */
struct BarrierOperator {
    int dimension = 2;
    double diffusion_bound = 0.0;
    double K1 = 1.0;
    double K2 = 0.0;
    GrowthFunction h = GrowthFunction::power(3.0);

    double operator()(const SymMatrix& X, const Vec& p) const {
        const auto ev = eigenvalues(X, dimension);
        double positive = std::max(ev[1], 0.0);
        if (dimension == 2) positive += std::max(ev[0], 0.0);
        return -diffusion_bound * positive + K1 * h(norm(p, dimension)) - K2;
    }

    /// G for a radial function, from its radial jet at radius rho > 0.
    double radial(double rho, const RadialJet& j) const {
        double positive = std::max(j.w2, 0.0);
        if (dimension == 2) positive += std::max(j.w1 / rho, 0.0);
        return -diffusion_bound * positive + K1 * h(std::abs(j.w1)) - K2;
    }
};

/**
 * @brief Radial barrier w_r on the ball of radius r centred at the origin.
 *
 * Power kind: w_1 = C1 |x|^alpha + C2 (d(0)^alpha - d(x)^alpha) and w_r(x) = r^alpha w_1(x/r).
 * General kind: w_1 = C1 chi1(|x|) + C2 (chi2(d(0)) - chi2(d(x))) and w_r(x) = r w_1(x/r),
 * where the unit profile of a scaled general barrier is built for (r K1, r K2).
 */
class Barrier {
public:
    enum class Kind { power, general };

    Kind kind = Kind::power;
    int dimension = 2;
    double radius = 1.0;
    double alpha = 0.5;
    double C1 = 0.0;
    double C2 = 0.0;
    double margin = 0.0;
    double eta = 0.0;
    BarrierOperator op{};
    BarrierOperator unit_op{};
    std::shared_ptr<const ChiPair> chi;

    RadialJet unit_jet(double rho) const {
        const auto d = RegularizedDistance::radial(rho);
        RadialJet j;
        if (kind == Kind::power) {
            const double a = alpha;
            const double d0a = std::pow(RegularizedDistance::center_value(), a);
            const double dist = d[0];
            const double da = dist > 0.0 ? std::pow(dist, a) : 0.0;
            j.w = (rho > 0.0 ? C1 * std::pow(rho, a) : 0.0) + C2 * (d0a - da);
            if (rho > 0.0) {
                j.w1 = a * C1 * std::pow(rho, a - 1.0);
                j.w2 = a * (a - 1.0) * C1 * std::pow(rho, a - 2.0);
            }
            if (C2 != 0.0 && d[1] != 0.0) {
                const double g1 = a * std::pow(dist, a - 1.0);
                const double g2 = a * (a - 1.0) * std::pow(dist, a - 2.0);
                j.w1 -= C2 * g1 * d[1];
                j.w2 -= C2 * (g2 * d[1] * d[1] + g1 * d[2]);
            }
            return j;
        }
        const ChiTable& c1 = chi->first;
        const ChiTable& c2 = chi->second;
        const double d0 = RegularizedDistance::center_value();
        j.w = C1 * c1(rho) + C2 * (c2(d0) - c2(d[0]));
        if (rho > 0.0) {
            j.w1 = C1 * c1.derivative(rho);
            j.w2 = C1 * c1.second_derivative(rho);
        }
        if (C2 != 0.0 && d[1] != 0.0) {
            const double s1 = c2.derivative(d[0]);
            const double s2 = c2.second_derivative(d[0]);
            j.w1 -= C2 * s1 * d[1];
            j.w2 -= C2 * (s2 * d[1] * d[1] + s1 * d[2]);
        }
        return j;
    }

    /// Radial jet of w_r at radius rho in [0, r].
    RadialJet jet(double rho) const {
        const double r = radius;
        const RadialJet u = unit_jet(rho / r);
        if (kind == Kind::power) {
            const double ra = std::pow(r, alpha);
            return {ra * u.w, ra / r * u.w1, ra / (r * r) * u.w2};
        }
        return {r * u.w, u.w1, u.w2 / r};
    }

    double value(const Point& y) const { return jet(checked_radius(y)).w; }

    Vec gradient(const Point& y) const {
        const double rho = checked_radius(y);
        if (rho == 0.0) return {0.0, 0.0};
        const RadialJet j = jet(rho);
        return {j.w1 * y[0] / rho, dimension == 2 ? j.w1 * y[1] / rho : 0.0};
    }

    SymMatrix hessian(const Point& y) const {
        const double rho = checked_radius(y);
        if (rho == 0.0) return {};
        const RadialJet j = jet(rho);
        if (dimension == 1) return {j.w2, 0.0, 0.0};
        const double ex = y[0] / rho, ey = y[1] / rho, tang = j.w1 / rho;
        return {j.w2 * ex * ex + tang * (1.0 - ex * ex), (j.w2 - tang) * ex * ey,
                j.w2 * ey * ey + tang * (1.0 - ey * ey)};
    }

private:
    double checked_radius(const Point& y) const {
        const double rho = dimension == 1 ? std::abs(y[0]) : std::hypot(y[0], y[1]);
        if (rho > radius * (1.0 + 1e-12)) throw DomainError("barrier evaluated outside its ball");
        return std::min(rho, radius);
    }
};

namespace detail {

/// Radii used by the constant search: dense near the origin, near the sphere, and in the bridge.
inline std::vector<double> barrier_search_radii() {
    std::vector<double> rho;
    for (int i = 0; i <= 800; ++i) rho.push_back(1e-4 * std::pow(0.5 / 1e-4, i / 800.0));
    for (int i = 0; i <= 800; ++i) rho.push_back(1.0 - 1e-7 * std::pow(0.5 / 1e-7, i / 800.0));
    for (int i = 0; i <= 400; ++i) rho.push_back(0.2 + 0.35 * i / 400.0);
    return rho;
}

struct SearchOutcome {
    double value = 0.0;
    bool ok = false;
    std::string diagnostic;
};

/**
 * @brief Smallest constant (up to bisection) accepted by a predicate that holds for
 * all large constants: doubling (or halving) from 1 followed by one bisection stage.
 */
inline SearchOutcome minimal_constant(const std::function<bool(double)>& accepted, const std::string& name) {
    const double cap = std::ldexp(1.0, 60);
    SearchOutcome out;
    double hi = 1.0;
    double lo = 0.0;
    if (accepted(hi)) {
        double c = hi;
        while (c > std::ldexp(1.0, -60) && accepted(0.5 * c)) c *= 0.5;
        hi = c;
        lo = 0.5 * c;
    } else {
        while (!accepted(hi)) {
            hi *= 2.0;
            if (hi > cap) {
                out.diagnostic = name + " search exceeded the cap 2^60";
                return out;
            }
        }
        lo = 0.5 * hi;
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (accepted(mid))
            hi = mid;
        else
            lo = mid;
    }
    out.value = hi;
    out.ok = true;
    return out;
}

inline std::string worst_margin_report(const Barrier& b, const BarrierOperator& G,
                                       const std::vector<double>& radii) {
    double worst = std::numeric_limits<double>::infinity();
    double at = 0.0;
    for (double rho : radii) {
        const double g = G.radial(rho, b.unit_jet(rho));
        if (g < worst) {
            worst = g;
            at = rho;
        }
    }
    std::ostringstream os;
    os << "binding inequality G(D^2 w, Dw) >= eta fails with margin " << worst << " at |x| = " << at;
    return os.str();
}

inline void search_constants(Barrier& b, const BarrierOperator& G, double eta) {
    const auto radii = barrier_search_radii();
    const double target = eta * (1.0 + 5e-4);
    if (G.diffusion_bound > 0.0) {
        auto dist_ok = [&](double c2) {
            Barrier trial = b;
            trial.C1 = 0.0;
            trial.C2 = c2;
            BarrierOperator Gd = G;
            Gd.K2 = 0.0;
            for (double rho : radii) {
                if (rho < 0.5) continue;
                if (Gd.radial(rho, trial.unit_jet(rho)) < 0.0) return false;
            }
            return true;
        };
        const auto c2 = minimal_constant(dist_ok, "C2");
        if (!c2.ok) throw SolverError(c2.diagnostic + ": distance term stays negative");
        b.C2 = c2.value;
    } else {
        b.C2 = 0.0;
    }
    auto full_ok = [&](double c1) {
        Barrier trial = b;
        trial.C1 = c1;
        for (double rho : radii)
            if (!(G.radial(rho, trial.unit_jet(rho)) >= target)) return false;
        return true;
    };
    const auto c1 = minimal_constant(full_ok, "C1");
    if (!c1.ok) {
        Barrier trial = b;
        trial.C1 = std::ldexp(1.0, 60);
        throw SolverError(c1.diagnostic + "; " + worst_margin_report(trial, G, radii));
    }
    b.C1 = c1.value;
}

}  // namespace detail

/**
 * @brief Power barrier for G = -sup_a sum lambda^+ + K1 |p|^m - R with target margin eta.
 * @throws DomainError on invalid parameters; SolverError if a constant search hits its cap.
 */
inline Barrier build_power_barrier(double m, double sup_a, double K1, double R, double eta, int dimension = 2) {
    if (!(m > 2.0)) throw DomainError("power barrier needs m > 2");
    if (!(K1 > 0.0)) throw DomainError("power barrier needs K1 > 0");
    if (!(sup_a >= 0.0) || !(R >= 0.0) || !(eta > 0.0)) throw DomainError("power barrier needs sup_a, R >= 0 and eta > 0");
    if (dimension != 1 && dimension != 2) throw DomainError("barrier dimension must be 1 or 2");
    Barrier b;
    b.kind = Barrier::Kind::power;
    b.dimension = dimension;
    b.alpha = (m - 2.0) / (m - 1.0);
    b.op = BarrierOperator{dimension, sup_a, K1, R, GrowthFunction::power(m)};
    b.unit_op = b.op;
    b.eta = eta;
    b.margin = eta;
    detail::search_constants(b, b.op, eta);
    return b;
}

/**
 * @brief General barrier built from the chi pair of a class P growth function h.
 */
inline Barrier build_general_barrier(std::shared_ptr<const ChiPair> chi, double L_R, double K1, double K2, double eta,
                                     int dimension = 2) {
    if (!chi) throw DomainError("general barrier needs a chi pair");
    if (!(K1 > 0.0)) throw DomainError("general barrier needs K1 > 0");
    if (!(L_R >= 0.0) || !(K2 >= 0.0) || !(eta > 0.0)) throw DomainError("general barrier needs L_R, K2 >= 0 and eta > 0");
    if (dimension != 1 && dimension != 2) throw DomainError("barrier dimension must be 1 or 2");
    Barrier b;
    b.kind = Barrier::Kind::general;
    b.dimension = dimension;
    b.alpha = std::numeric_limits<double>::quiet_NaN();
    if (auto e = chi->first.growth().power_exponent) b.alpha = (*e - 2.0) / (*e - 1.0);
    b.chi = std::move(chi);
    b.op = BarrierOperator{dimension, L_R, K1, K2, b.chi->first.growth()};
    b.unit_op = b.op;
    b.eta = eta;
    b.margin = eta;
    detail::search_constants(b, b.op, eta);
    return b;
}

inline Barrier build_general_barrier(const GrowthFunction& h, double L_R, double K1, double K2, double eta,
                                     int dimension = 2) {
    return build_general_barrier(std::make_shared<const ChiPair>(build_chi_pair(h)), L_R, K1, K2, eta, dimension);
}

/**
 * @brief The barrier on B_r: r^alpha w_1(x/r) (power) or r w_1(x/r) with constants rebuilt
 * for r K1, r K2 (general).
 * @throws DomainError unless 0 < r <= 1.
 */
inline Barrier scale_barrier(const Barrier& b, double r) {
    if (!(r > 0.0) || r > 1.0) throw DomainError("scale_barrier needs 0 < r <= 1");
    if (b.radius != 1.0) throw DomainError("scale_barrier expects a unit barrier");
    if (r == 1.0) return b;
    Barrier s = b;
    s.radius = r;
    if (b.kind == Barrier::Kind::power) {
        s.margin = b.eta * std::pow(r, b.alpha - 2.0);
        return s;
    }
    BarrierOperator scaled_op = b.op;
    scaled_op.K1 = r * b.op.K1;
    scaled_op.K2 = r * b.op.K2;
    Barrier unit = b;
    unit.op = scaled_op;
    detail::search_constants(unit, scaled_op, b.eta);
    s.C1 = unit.C1;
    s.C2 = unit.C2;
    s.unit_op = scaled_op;
    s.margin = b.eta / r;
    return s;
}

/** @brief Grid certification of a barrier: minimum margin and boundary blow-up proxy. */
struct BarrierCertificate {
    int n = 0;
    double exclusion_radius = 0.0;
    std::size_t node_count = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    Point argmin{0.0, 0.0};
    bool passed = false;
    double normal_derivative_proxy = 0.0;
    double proxy_threshold = std::numeric_limits<double>::quiet_NaN();
    bool proxy_exceeds_threshold = false;
    struct Row {
        Point y;
        double w;
        double margin;
    };
    std::vector<Row> rows;
};

/**
 * @brief Evaluates G(D^2 w, Dw) at the nodes (i, j) r/n of the ball with
 * delta_excl r <= |y| < r, and the one-sided difference (w(r) - w(r - r/n))/(r/n).
 * @throws DomainError if delta_excl < 4/n.
 */
inline BarrierCertificate verify_supersolution_on_grid(const Barrier& b, const BarrierOperator& G, int n,
                                                       double delta_excl, bool keep_rows = false) {
    if (n < 4) throw DomainError("certification grid needs n >= 4");
    if (delta_excl < 4.0 / n - 1e-15) throw DomainError("exclusion radius must be at least 4/n");
    BarrierCertificate cert;
    cert.n = n;
    cert.exclusion_radius = delta_excl;
    const double r = b.radius;
    const double h = r / n;
    const int jmax = b.dimension == 2 ? n : 0;
    for (int i = -n; i <= n; ++i) {
        for (int j = -jmax; j <= jmax; ++j) {
            const Point y{i * h, j * h};
            const double rho = std::hypot(y[0], y[1]);
            if (rho < delta_excl * r - 1e-14 || rho >= r * (1.0 - 1e-12)) continue;
            const double g = G(b.hessian(y), b.gradient(y));
            ++cert.node_count;
            if (g < cert.min_margin) {
                cert.min_margin = g;
                cert.argmin = y;
            }
            if (keep_rows) cert.rows.push_back({y, b.value(y), g});
        }
    }
    cert.passed = cert.min_margin >= b.margin;
    cert.normal_derivative_proxy = (b.jet(r).w - b.jet(r - h).w) / h;
    if (b.kind == Barrier::Kind::power) {
        cert.proxy_threshold = std::pow(n, 1.0 - b.alpha) * b.alpha * b.C1 / 2.0 * std::pow(r, b.alpha - 1.0);
        cert.proxy_exceeds_threshold = cert.normal_derivative_proxy > cert.proxy_threshold;
    }
    return cert;
}

/// -Delta(C|x|^alpha) + |D(C|x|^alpha)|^p in dimension N at radius rho.
inline double subquadratic_residual(int N, double p, double alpha, double C, double rho) {
    return -C * alpha * (alpha + N - 2.0) * std::pow(rho, alpha - 2.0) +
           std::pow(C * alpha, p) * std::pow(rho, (alpha - 1.0) * p);
}

struct SubquadraticReport {
    double max_residual = -std::numeric_limits<double>::infinity();
    double argmax_radius = 0.0;
    int samples = 0;
    double family_scale = 0.5;
    double family_modulus = 0.0;
};

/**
 * @brief Samples the residual of C|x|^alpha on log-spaced radii in [rho_min, 1] and
 * evaluates the family modulus alpha^{-1} s^alpha at s = family_scale.
 * @throws DomainError unless N >= 3, 1 <= p <= 2, 0 < alpha < 1, C > 0 and C alpha <= 1.
 */
inline SubquadraticReport subquadratic_counterexample(int N, double p, double alpha, double C, double rho_min = 1e-3,
                                                      int samples = 400, double family_scale = 0.5) {
    if (N < 3) throw DomainError("subquadratic counterexample needs N >= 3");
    if (!(p >= 1.0 && p <= 2.0)) throw DomainError("subquadratic counterexample needs 1 <= p <= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("subquadratic counterexample needs 0 < alpha < 1");
    if (!(C > 0.0) || C * alpha > 1.0) throw DomainError("subquadratic counterexample needs C > 0 and C alpha <= 1");
    SubquadraticReport r;
    r.samples = samples;
    for (int i = 0; i < samples; ++i) {
        const double rho = rho_min * std::pow(1.0 / rho_min, i / double(samples - 1));
        const double v = subquadratic_residual(N, p, alpha, C, rho);
        if (v > r.max_residual) {
            r.max_residual = v;
            r.argmax_radius = rho;
        }
    }
    r.family_scale = family_scale;
    r.family_modulus = std::pow(family_scale, alpha) / alpha;
    return r;
}

}  // namespace sqhj
