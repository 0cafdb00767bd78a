#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "errors.hpp"
#include "growth.hpp"

namespace sqhj {

/// Log-spaced grid on [t_min, t_max] with the given density.
inline std::vector<double> log_grid(double t_min, double t_max, int per_decade) {
    if (!(t_min > 0.0 && t_max > t_min) || per_decade < 1) throw DomainError("invalid log grid");
    const double decades = std::log10(t_max / t_min);
    const int n = std::max(4, static_cast<int>(std::ceil(decades * per_decade)) + 1);
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = t_min * std::pow(10.0, decades * i / (n - 1));
    t.back() = t_max;
    return t;
}

/**
 * @brief Tabulated chi function with first derivative.
 *
 * Values and derivatives are interpolated by monotone piecewise-cubic (pchip) curves
 * in log-log coordinates and extrapolated by the end power laws. The second
 * derivative comes from the defining relation: chi2'' = -h(chi2') and
 * chi1'' = 1/g'(chi1') with g(tau) = tau/h(tau).
 */
class ChiTable {
public:
    enum class Kind { first, second };

    ChiTable(Kind kind, GrowthFunction h, std::vector<double> t, std::vector<double> value,
             std::vector<double> slope)
        : kind_(kind), h_(std::move(h)), t_(std::move(t)), value_(std::move(value)), slope_(std::move(slope)) {
        std::vector<double> lt, lv, ls;
        for (std::size_t i = 0; i < t_.size(); ++i) {
            lt.push_back(std::log(t_[i]));
            lv.push_back(std::log(value_[i]));
            ls.push_back(std::log(slope_[i]));
        }
        log_t_ = lt;
        log_value_ = lv;
        log_slope_ = ls;
        using boost::math::interpolators::pchip;
        value_interp_ = std::make_shared<pchip<std::vector<double>>>(std::vector<double>(lt), std::move(lv));
        slope_interp_ = std::make_shared<pchip<std::vector<double>>>(std::move(lt), std::move(ls));

        increasing_ = true;
        concave_ = true;
        for (std::size_t i = 1; i < t_.size(); ++i) {
            if (!(value_[i] > value_[i - 1])) increasing_ = false;
            if (i + 1 < t_.size()) {
                const double s0 = (value_[i] - value_[i - 1]) / (t_[i] - t_[i - 1]);
                const double s1 = (value_[i + 1] - value_[i]) / (t_[i + 1] - t_[i]);
                if (s1 > s0 * (1.0 + 1e-12)) concave_ = false;
            }
        }
    }

    Kind kind() const { return kind_; }
    const GrowthFunction& growth() const { return h_; }
    const std::vector<double>& t() const { return t_; }
    const std::vector<double>& values() const { return value_; }
    const std::vector<double>& slopes() const { return slope_; }
    bool increasing() const { return increasing_; }
    bool concave() const { return concave_; }
    double value_at_tmin() const { return value_.front(); }
    double slope_at_tmin() const { return slope_.front(); }

    double operator()(double t) const {
        if (t <= 0.0) return 0.0;
        return std::exp(log_eval(*value_interp_, log_value_, std::log(t)));
    }

    double derivative(double t) const {
        if (t <= 0.0) return std::numeric_limits<double>::infinity();
        return std::exp(log_eval(*slope_interp_, log_slope_, std::log(t)));
    }

    double second_derivative(double t) const {
        const double tau = derivative(t);
        if (kind_ == Kind::second) return -h_(tau);
        const double hv = h_(tau);
        const double gprime = 1.0 / hv - tau * h_.derivative(tau) / (hv * hv);
        return 1.0 / gprime;
    }

private:
    template <class Interp>
    double log_eval(const Interp& interp, const std::vector<double>& ly, double lt) const {
        const std::size_t n = log_t_.size();
        if (lt < log_t_.front()) {
            const double slope = (ly[1] - ly[0]) / (log_t_[1] - log_t_[0]);
            return ly[0] + slope * (lt - log_t_[0]);
        }
        if (lt > log_t_.back()) {
            const double slope = (ly[n - 1] - ly[n - 2]) / (log_t_[n - 1] - log_t_[n - 2]);
            return ly[n - 1] + slope * (lt - log_t_[n - 1]);
        }
        return interp(lt);
    }

    Kind kind_;
    GrowthFunction h_;
    std::vector<double> t_, value_, slope_;
    std::vector<double> log_t_, log_value_, log_slope_;
    std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> value_interp_;
    std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> slope_interp_;
    bool increasing_ = false;
    bool concave_ = false;
};

namespace detail {

/// Root of a strictly decreasing function F(tau) = target by bisection in log tau.
inline double invert_decreasing(const std::function<double(double)>& F, double target, double guess,
                                const std::string& what) {
    double lo = guess, hi = guess;
    int guard = 0;
    while (F(lo) < target) {
        lo *= 0.5;
        if (++guard > 2000 || !(lo > 0.0)) throw SolverError(what + ": bisection bracket failure at t = " + std::to_string(target));
    }
    guard = 0;
    while (F(hi) > target) {
        hi *= 2.0;
        if (++guard > 2000 || !std::isfinite(hi))
            throw SolverError(what + ": bisection bracket failure at t = " + std::to_string(target));
    }
    for (int it = 0; it < 200 && hi > lo * (1.0 + 4e-16); ++it) {
        const double mid = std::sqrt(lo * hi);
        if (F(mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace detail

/**
 * @brief chi2 on t_grid: chi2'(t) solves int_{chi2'}^inf ds/h = t, and
 * chi2(t) = int_{chi2'(t)}^inf s/h(s) ds so that chi2(0) = 0.
 */
inline ChiTable chi2(const GrowthFunction& h, const std::vector<double>& t_grid) {
    if (t_grid.size() < 4) throw DomainError("chi2 needs at least four grid points");
    std::vector<double> value(t_grid.size()), slope(t_grid.size());
    const std::function<double(double)> F = [&h](double tau) { return tail_integral(h, tau); };
    const std::function<double(double)> q = [&h](double s) { return s / h(s); };
    double guess = 1.0;
    for (std::size_t k = t_grid.size(); k-- > 0;) {
        const double t = t_grid[k];
        if (!(t > 0.0)) throw DomainError("chi2 grid must be positive");
        const double tau = detail::invert_decreasing(F, t, guess, "chi2");
        guess = tau;
        slope[k] = tau;
        value[k] = tail_quadrature(q, tau).value;
    }
    return ChiTable(ChiTable::Kind::second, h, t_grid, std::move(value), std::move(slope));
}

/**
 * @brief chi1 on t_grid: chi1'(t) solves tau/h(tau) = t, and
 * chi1(t) = int_{chi1'(t)}^inf (s^2 h'/h^2 - s/h) ds so that chi1(0) = 0.
 */
inline ChiTable chi1(const GrowthFunction& h, const std::vector<double>& t_grid) {
    if (t_grid.size() < 4) throw DomainError("chi1 needs at least four grid points");
    std::vector<double> value(t_grid.size()), slope(t_grid.size());
    const std::function<double(double)> g = [&h](double tau) { return tau / h(tau); };
    const std::function<double(double)> q = [&h](double s) {
        const double v = h(s);
        return s * s * h.derivative(s) / (v * v) - s / v;
    };
    double guess = 1.0;
    for (std::size_t k = t_grid.size(); k-- > 0;) {
        const double t = t_grid[k];
        if (!(t > 0.0)) throw DomainError("chi1 grid must be positive");
        const double tau = detail::invert_decreasing(g, t, guess, "chi1");
        guess = tau;
        slope[k] = tau;
        value[k] = tail_quadrature(q, tau).value;
    }
    return ChiTable(ChiTable::Kind::first, h, t_grid, std::move(value), std::move(slope));
}

/** @brief The pair (chi1, chi2) sharing one growth function and t-grid. */
struct ChiPair {
    ChiTable first;
    ChiTable second;
};

inline ChiPair build_chi_pair(const GrowthFunction& h, double t_min = 1e-6, int per_decade = 512) {
    const auto grid = log_grid(t_min, 1.0, per_decade);
    return ChiPair{chi1(h, grid), chi2(h, grid)};
}

}  // namespace sqhj
