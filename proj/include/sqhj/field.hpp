#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace sqhj {

using Point = std::array<double, 2>;
using Vec = std::array<double, 2>;

/** @brief Symmetric 2x2 matrix; one-dimensional problems use only xx. */
struct SymMatrix {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;
};

inline double norm(const Vec& v, int dimension) {
    return dimension == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]);
}

/// Eigenvalues in ascending order (dimension 1 returns {xx, xx}).
inline std::array<double, 2> eigenvalues(const SymMatrix& a, int dimension) {
    if (dimension == 1) return {a.xx, a.xx};
    const double mean = 0.5 * (a.xx + a.yy);
    const double radius = std::hypot(0.5 * (a.xx - a.yy), a.xy);
    return {mean - radius, mean + radius};
}

/**
 * @brief Declarative scalar coefficient field drawn from a fixed registry.
 *
 * Kinds:
 *  - constant:          value
 *  - affine:            value + slope . x
 *  - trigonometric:     offset + amplitude * sin(pi * k . x + phase)
 *  - sin_squared:       offset + amplitude * sin^2(pi * k . x + phase)
 *  - piecewise_linear:  linear interpolation of (knots, values) along one axis,
 *                       optionally extended periodically with period knots.back() - knots.front()
 *  - sum:               sum of the terms
 *
 * Every kind is evaluated at argument_scale * x, which is how oscillatory
 * families x -> V(x / eps) are expressed.
 */
class ScalarField {
public:
    enum class Kind { constant, affine, trigonometric, sin_squared, piecewise_linear, sum };

    ScalarField() = default;

    static ScalarField constant(double value) {
        ScalarField f;
        f.kind_ = Kind::constant;
        f.value_ = value;
        return f;
    }

    static ScalarField affine(double value, Vec slope) {
        ScalarField f;
        f.kind_ = Kind::affine;
        f.value_ = value;
        f.slope_ = slope;
        return f;
    }

    static ScalarField trigonometric(double offset, double amplitude, Vec wavenumber, double phase = 0.0) {
        ScalarField f;
        f.kind_ = Kind::trigonometric;
        f.value_ = offset;
        f.amplitude_ = amplitude;
        f.slope_ = wavenumber;
        f.phase_ = phase;
        return f;
    }

    static ScalarField sin_squared(double offset, double amplitude, Vec wavenumber, double phase = 0.0) {
        ScalarField f = trigonometric(offset, amplitude, wavenumber, phase);
        f.kind_ = Kind::sin_squared;
        return f;
    }

    static ScalarField piecewise_linear(std::vector<double> knots, std::vector<double> values, int axis = 0,
                                        bool periodic = false) {
        if (knots.size() < 2 || knots.size() != values.size())
            throw ConfigError("piecewise_linear field needs at least two knots and matching values");
        if (!std::is_sorted(knots.begin(), knots.end()) ||
            std::adjacent_find(knots.begin(), knots.end()) != knots.end())
            throw ConfigError("piecewise_linear knots must be strictly increasing");
        if (axis != 0 && axis != 1) throw ConfigError("piecewise_linear axis must be 0 or 1");
        ScalarField f;
        f.kind_ = Kind::piecewise_linear;
        f.knots_ = std::move(knots);
        f.values_ = std::move(values);
        f.axis_ = axis;
        f.periodic_ = periodic;
        return f;
    }

    static ScalarField sum(std::vector<ScalarField> terms) {
        ScalarField f;
        f.kind_ = Kind::sum;
        f.terms_ = std::move(terms);
        return f;
    }

    double operator()(const Point& x) const {
        const Point y{argument_scale_ * x[0], argument_scale_ * x[1]};
        switch (kind_) {
            case Kind::constant:
                return value_;
            case Kind::affine:
                return value_ + slope_[0] * y[0] + slope_[1] * y[1];
            case Kind::trigonometric:
                return value_ + amplitude_ * std::sin(phase_argument(y));
            case Kind::sin_squared: {
                const double s = std::sin(phase_argument(y));
                return value_ + amplitude_ * s * s;
            }
            case Kind::piecewise_linear:
                return interpolate(y[axis_]);
            case Kind::sum: {
                double total = 0.0;
                for (const auto& t : terms_) total += t(y);
                return total;
            }
        }
        return 0.0;
    }

    /// Field x -> this(scale * x).
    ScalarField with_argument_scale(double scale) const {
        ScalarField f = *this;
        f.argument_scale_ *= scale;
        return f;
    }

    /// Field x -> this(x) + shift.
    ScalarField shifted(double shift) const {
        ScalarField f = *this;
        switch (kind_) {
            case Kind::piecewise_linear:
                for (auto& v : f.values_) v += shift;
                break;
            case Kind::sum:
                f.terms_.push_back(constant(shift));
                break;
            default:
                f.value_ += shift;
        }
        return f;
    }

    /// Field x -> factor * this(x).
    ScalarField scaled(double factor) const {
        ScalarField f = *this;
        switch (kind_) {
            case Kind::constant:
                f.value_ *= factor;
                break;
            case Kind::affine:
                f.value_ *= factor;
                f.slope_ = {factor * slope_[0], factor * slope_[1]};
                break;
            case Kind::trigonometric:
            case Kind::sin_squared:
                f.value_ *= factor;
                f.amplitude_ *= factor;
                break;
            case Kind::piecewise_linear:
                for (auto& v : f.values_) v *= factor;
                break;
            case Kind::sum:
                for (auto& t : f.terms_) t = t.scaled(factor);
                break;
        }
        return f;
    }

    Kind kind() const { return kind_; }
    bool is_constant() const { return kind_ == Kind::constant; }
    double value() const { return value_; }
    double amplitude() const { return amplitude_; }
    const Vec& slope() const { return slope_; }
    const Vec& wavenumber() const { return slope_; }
    double phase() const { return phase_; }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    int axis() const { return axis_; }
    bool periodic() const { return periodic_; }
    const std::vector<ScalarField>& terms() const { return terms_; }
    double argument_scale() const { return argument_scale_; }

    friend bool operator==(const ScalarField&, const ScalarField&) = default;

private:
    double phase_argument(const Point& y) const {
        return std::numbers::pi * (slope_[0] * y[0] + slope_[1] * y[1]) + phase_;
    }

    double interpolate(double s) const {
        const double lo = knots_.front();
        const double hi = knots_.back();
        if (periodic_) {
            const double period = hi - lo;
            s = lo + (s - lo) - period * std::floor((s - lo) / period);
        }
        if (s <= lo) return values_.front();
        if (s >= hi) return values_.back();
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
        const std::size_t j = static_cast<std::size_t>(it - knots_.begin());
        const double t = (s - knots_[j - 1]) / (knots_[j] - knots_[j - 1]);
        return (1.0 - t) * values_[j - 1] + t * values_[j];
    }

    Kind kind_ = Kind::constant;
    double value_ = 0.0;
    double amplitude_ = 0.0;
    Vec slope_{0.0, 0.0};
    double phase_ = 0.0;
    std::vector<double> knots_;
    std::vector<double> values_;
    int axis_ = 0;
    bool periodic_ = false;
    std::vector<ScalarField> terms_;
    double argument_scale_ = 1.0;
};

inline std::string to_string(ScalarField::Kind kind) {
    switch (kind) {
        case ScalarField::Kind::constant: return "constant";
        case ScalarField::Kind::affine: return "affine";
        case ScalarField::Kind::trigonometric: return "trigonometric";
        case ScalarField::Kind::sin_squared: return "sin_squared";
        case ScalarField::Kind::piecewise_linear: return "piecewise_linear";
        case ScalarField::Kind::sum: return "sum";
    }
    return "unknown";
}

}  // namespace sqhj
