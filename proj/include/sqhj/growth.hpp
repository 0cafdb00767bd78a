#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace sqhj {

/** @brief Growth function h with derivative; power laws carry their exponent. */
struct GrowthFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::optional<double> power_exponent;
    std::string label;

    static GrowthFunction power(double m) {
        GrowthFunction h;
        h.value = [m](double t) { return std::pow(t, m); };
        h.derivative = [m](double t) { return m * std::pow(t, m - 1.0); };
        h.power_exponent = m;
        h.label = "t^" + std::to_string(m);
        return h;
    }

    double operator()(double t) const { return value(t); }
};

/** @brief Result of a semi-infinite integral with its tail model. */
struct TailQuadrature {
    double value = 0.0;
    double body = 0.0;
    double tail = 0.0;
    double cutoff = 0.0;
    double decay_exponent = 0.0;
    bool finite = true;
};

namespace detail {

/// Integral of q over [a, b] computed in the variable s = log t.
inline double log_quadrature(const std::function<double(double)>& q, double a, double b) {
    if (b <= a) return 0.0;
    auto integrand = [&q](double s) {
        const double t = std::exp(s);
        return q(t) * t;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    return GK::integrate(integrand, std::log(a), std::log(b), 15, 1e-14);
}

/// Local decay exponent nu of q at T, assuming q(t) ~ C t^{-nu}.
inline double decay_exponent(const std::function<double(double)>& q, double T) {
    const double q1 = q(T);
    const double q2 = q(2.0 * T);
    if (!(q1 > 0.0) || !(q2 > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log(q2 / q1) / std::log(2.0);
}

}  // namespace detail

/**
 * @brief Integral of a positive, eventually power-like decaying q over [a, inf).
 *
 * The range is split at a cutoff T. Beyond T the integrand is modelled by its local
 * power law q(T)(t/T)^{-nu}, giving the tail q(T) T/(nu - 1). The cutoff grows tenfold
 * until the local exponent is stable, or until the tail is negligible. A local exponent
 * nu <= 1 at the largest cutoff marks the integral as divergent.
 */
inline TailQuadrature tail_quadrature(const std::function<double(double)>& q, double a, double tol = 1e-12,
                                      double max_cutoff = 1e15) {
    if (!(a > 0.0)) throw DomainError("tail quadrature needs a positive lower limit");
    TailQuadrature out;
    double T = std::max(10.0 * a, a + 1.0);
    double body = detail::log_quadrature(q, a, T);
    for (;;) {
        const double nu = detail::decay_exponent(q, T);
        const double nu_far = detail::decay_exponent(q, 4.0 * T);
        out.cutoff = T;
        out.decay_exponent = nu;
        if (std::isinf(nu)) {
            out.body = body;
            out.tail = 0.0;
            out.value = body;
            return out;
        }
        const bool stable = std::abs(nu - nu_far) <= 1e-9 * std::max(1.0, std::abs(nu));
        if (nu > 1.0 + 1e-9) {
            const double tail = q(T) * T / (nu - 1.0);
            if (stable || tail <= tol * body || 10.0 * T > max_cutoff) {
                out.body = body;
                out.tail = tail;
                out.value = body + tail;
                return out;
            }
        } else if (10.0 * T > max_cutoff || (stable && nu <= 1.0 + 1e-9)) {
            out.body = body;
            out.tail = std::numeric_limits<double>::infinity();
            out.value = std::numeric_limits<double>::infinity();
            out.finite = false;
            return out;
        }
        body += detail::log_quadrature(q, T, 10.0 * T);
        T *= 10.0;
    }
}

/**
 * @brief Integral of 1/h over [tau, inf).
 *
 * The tail beyond the cutoff T uses the local power law and is capped by the bound
 * T/h(T) that follows from h(t) >= (t/T)^2 h(T).
 * @throws DomainError if tau <= 0 or h(tau) = 0.
 */
inline double tail_integral(const GrowthFunction& h, double tau, double tol = 1e-12) {
    if (!(tau > 0.0)) throw DomainError("tail_integral needs tau > 0");
    if (!(h(tau) > 0.0)) throw DomainError("tail_integral: h vanishes at tau = " + std::to_string(tau));
    const std::function<double(double)> q = [&h](double t) { return 1.0 / h(t); };
    TailQuadrature r = tail_quadrature(q, tau, tol);
    if (!r.finite) throw DomainError("tail_integral: integral of 1/h diverges");
    const double cap = r.cutoff / h(r.cutoff);
    if (r.tail > cap) r.value = r.body + cap;
    return r.value;
}

/** @brief Outcome of the class P checks (i)-(iv). */
struct ClassPReport {
    bool convex = false;
    double worst_midpoint_gap = 0.0;
    bool ratio_monotone = false;
    double worst_ratio_drop = 0.0;
    bool integral_iii_finite = false;
    double integral_iii = 0.0;
    double tail_iii = 0.0;
    bool integral_iv_finite = false;
    double integral_iv = 0.0;
    double tail_iv = 0.0;
    double t_max = 0.0;
    int grid_size = 0;
    double tolerance = 0.0;

    bool passed() const { return convex && ratio_monotone && integral_iii_finite && integral_iv_finite; }
};

/**
 * @brief Checks convexity, monotonicity of h(t)/t^2 on t >= 1, and finiteness of
 * the integrals of t/h and t^2 h'/h^2 over [1, inf).
 *
 * Convexity uses midpoint inequalities on a log grid over [1e-3, t_max]; the ratio
 * test compares adjacent log-grid points on [1, t_max]. The integrals use quadrature
 * on [1, t_max] and a power-law tail fitted at t_max; a local decay exponent <= 1
 * there is reported as divergence.
 */
inline ClassPReport validate_class_p(const GrowthFunction& h, double t_max = 1e6, int grid_size = 400,
                                     double tolerance = 1e-9) {
    if (!(t_max >= 10.0)) throw DomainError("validate_class_p needs t_max >= 10");
    if (grid_size < 8) throw DomainError("validate_class_p needs grid_size >= 8");
    ClassPReport r;
    r.t_max = t_max;
    r.grid_size = grid_size;
    r.tolerance = tolerance;

    std::vector<double> t(static_cast<std::size_t>(grid_size));
    const double lo = std::log(1e-3), hi = std::log(t_max);
    for (int i = 0; i < grid_size; ++i) t[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (grid_size - 1));

    double worst_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t step : {std::size_t{1}, std::size_t{2}, std::size_t{8}, std::size_t{32}}) {
            if (i + step >= t.size()) continue;
            const double a = t[i], b = t[i + step];
            const double avg = 0.5 * (h(a) + h(b));
            const double gap = (h(0.5 * (a + b)) - avg) / (1.0 + std::abs(avg));
            worst_gap = std::max(worst_gap, gap);
        }
    }
    r.worst_midpoint_gap = worst_gap;
    r.convex = worst_gap <= tolerance;

    double worst_drop = 0.0;
    const double l1 = 0.0;
    double prev = h(1.0);
    for (int i = 1; i < grid_size; ++i) {
        const double s = std::exp(l1 + (hi - l1) * i / (grid_size - 1));
        const double ratio = h(s) / (s * s);
        worst_drop = std::max(worst_drop, (prev - ratio) / std::max(std::abs(prev), 1e-300));
        prev = ratio;
    }
    r.worst_ratio_drop = worst_drop;
    r.ratio_monotone = worst_drop <= tolerance;

    const std::function<double(double)> q3 = [&h](double s) { return s / h(s); };
    const std::function<double(double)> q4 = [&h](double s) {
        const double v = h(s);
        return s * s * h.derivative(s) / (v * v);
    };
    auto finite_integral = [&](const std::function<double(double)>& q, double& value, double& tail) {
        const double body = detail::log_quadrature(q, 1.0, t_max);
        const double nu = detail::decay_exponent(q, t_max);
        if (nu > 1.0 + 1e-9) {
            tail = q(t_max) * t_max / (nu - 1.0);
            value = body + tail;
            return std::isfinite(value);
        }
        tail = std::numeric_limits<double>::infinity();
        value = std::numeric_limits<double>::infinity();
        return false;
    };
    r.integral_iii_finite = finite_integral(q3, r.integral_iii, r.tail_iii);
    r.integral_iv_finite = finite_integral(q4, r.integral_iv, r.tail_iv);
    return r;
}

}  // namespace sqhj
