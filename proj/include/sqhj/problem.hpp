#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "field.hpp"

namespace sqhj {

/** @brief Geometric domain: interval, axis-aligned box, ball, or the unit torus [0,1)^N. */
struct Domain {
    enum class Kind { interval, box, ball, torus };

    Kind kind = Kind::interval;
    int dimension = 1;
    Point lower{-1.0, -1.0};
    Point upper{1.0, 1.0};
    Point center{0.0, 0.0};
    double radius = 1.0;

    static Domain interval(double a, double b) {
        if (!(a < b)) throw ConfigError("interval requires lower < upper");
        Domain d;
        d.kind = Kind::interval;
        d.dimension = 1;
        d.lower = {a, 0.0};
        d.upper = {b, 0.0};
        return d;
    }

    static Domain box(Point lo, Point hi) {
        if (!(lo[0] < hi[0] && lo[1] < hi[1])) throw ConfigError("box requires lower < upper on both axes");
        Domain d;
        d.kind = Kind::box;
        d.dimension = 2;
        d.lower = lo;
        d.upper = hi;
        return d;
    }

    static Domain ball(int dimension, Point c, double r) {
        if (dimension != 1 && dimension != 2) throw ConfigError("ball dimension must be 1 or 2");
        if (!(r > 0.0)) throw ConfigError("ball radius must be positive");
        Domain d;
        d.kind = Kind::ball;
        d.dimension = dimension;
        d.center = c;
        d.radius = r;
        d.lower = {c[0] - r, dimension == 2 ? c[1] - r : 0.0};
        d.upper = {c[0] + r, dimension == 2 ? c[1] + r : 0.0};
        return d;
    }

    static Domain torus(int dimension) {
        if (dimension != 1 && dimension != 2) throw ConfigError("torus dimension must be 1 or 2");
        Domain d;
        d.kind = Kind::torus;
        d.dimension = dimension;
        d.lower = {0.0, 0.0};
        d.upper = {1.0, dimension == 2 ? 1.0 : 0.0};
        return d;
    }

    bool contains(const Point& x, double tol = 1e-12) const {
        switch (kind) {
            case Kind::torus:
                return true;
            case Kind::ball: {
                const double dx = x[0] - center[0];
                const double dy = dimension == 2 ? x[1] - center[1] : 0.0;
                return std::hypot(dx, dy) <= radius + tol;
            }
            default:
                for (int i = 0; i < dimension; ++i)
                    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
                return true;
        }
    }

    /// Distance to the boundary; +inf on the torus.
    double distance_to_boundary(const Point& x) const {
        switch (kind) {
            case Kind::torus:
                return std::numeric_limits<double>::infinity();
            case Kind::ball: {
                const double dx = x[0] - center[0];
                const double dy = dimension == 2 ? x[1] - center[1] : 0.0;
                return radius - std::hypot(dx, dy);
            }
            default: {
                double d = std::numeric_limits<double>::infinity();
                for (int i = 0; i < dimension; ++i) d = std::min({d, x[i] - lower[i], upper[i] - x[i]});
                return d;
            }
        }
    }

    friend bool operator==(const Domain&, const Domain&) = default;
};

inline std::string to_string(Domain::Kind k) {
    switch (k) {
        case Domain::Kind::interval: return "interval";
        case Domain::Kind::box: return "box";
        case Domain::Kind::ball: return "ball";
        case Domain::Kind::torus: return "torus";
    }
    return "unknown";
}

/** @brief Matrix-valued diffusion a(x) given by its three independent entries. */
struct Diffusion {
    ScalarField a11 = ScalarField::constant(0.0);
    ScalarField a12 = ScalarField::constant(0.0);
    ScalarField a22 = ScalarField::constant(0.0);

    static Diffusion isotropic(const ScalarField& a) { return {a, ScalarField::constant(0.0), a}; }

    SymMatrix operator()(const Point& x) const { return {a11(x), a12(x), a22(x)}; }

    friend bool operator==(const Diffusion&, const Diffusion&) = default;
};

/**
 * @brief Hamiltonian in power form b(x)|p|^m + l(x), or the quasilinear form
 * (1+|p|^k)(|p|^m + c(x)u - f(x)) produced by rewrite_quasilinear.
 */
struct Hamiltonian {
    enum class Form { power, quasilinear };

    Form form = Form::power;
    double m = 3.0;
    double k = 0.0;
    ScalarField b = ScalarField::constant(1.0);
    ScalarField lower_order = ScalarField::constant(0.0);

    friend bool operator==(const Hamiltonian&, const Hamiltonian&) = default;
};

struct BoundaryCondition {
    enum class Kind { generalized_dirichlet, state_constraint, periodic };

    Kind kind = Kind::state_constraint;
    ScalarField g = ScalarField::constant(0.0);

    friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;
};

inline std::string to_string(BoundaryCondition::Kind k) {
    switch (k) {
        case BoundaryCondition::Kind::generalized_dirichlet: return "generalized_dirichlet";
        case BoundaryCondition::Kind::state_constraint: return "state_constraint";
        case BoundaryCondition::Kind::periodic: return "periodic";
    }
    return "unknown";
}

/**
 * @brief F(M, p, u, x) = -Tr(a(x) M) + H(x, p) + c(x) u - f(x) with domain and boundary condition.
 */
struct ProblemSpec {
    std::string name = "unnamed";
    int dimension = 1;
    Domain domain = Domain::interval(-1.0, 1.0);
    Diffusion diffusion = Diffusion::isotropic(ScalarField::constant(1.0));
    Hamiltonian hamiltonian{};
    ScalarField c = ScalarField::constant(0.0);
    ScalarField f = ScalarField::constant(0.0);
    BoundaryCondition boundary{};
    bool superquadratic = true;

    /// Growth exponent of H in p: m for the power form, k + m for the quasilinear form.
    double exponent() const {
        return hamiltonian.form == Hamiltonian::Form::power ? hamiltonian.m : hamiltonian.k + hamiltonian.m;
    }

    /// Hoelder exponent (m - 2)/(m - 1) attached to the growth exponent.
    double holder_exponent() const {
        const double m = exponent();
        return (m - 2.0) / (m - 1.0);
    }

    friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

inline double hamiltonian_value(const ProblemSpec& spec, const Vec& p, double u, const Point& x) {
    const Hamiltonian& h = spec.hamiltonian;
    const double q = norm(p, spec.dimension);
    if (h.form == Hamiltonian::Form::power) return h.b(x) * std::pow(q, h.m) + h.lower_order(x);
    const double weight = 1.0 + std::pow(q, h.k);
    return weight * (std::pow(q, h.m) + spec.c(x) * u - spec.f(x));
}

/**
 * @brief Evaluates F(M, p, u, x).
 * @throws DomainError if x lies outside the closed domain.
 */
inline double evaluate_operator(const ProblemSpec& spec, const SymMatrix& M, const Vec& p, double u,
                                const Point& x) {
    if (!spec.domain.contains(x)) {
        std::ostringstream os;
        os << "point (" << x[0] << ", " << x[1] << ") lies outside the domain";
        throw DomainError(os.str());
    }
    const SymMatrix a = spec.diffusion(x);
    const double trace = spec.dimension == 1 ? a.xx * M.xx : a.xx * M.xx + 2.0 * a.xy * M.xy + a.yy * M.yy;
    if (spec.hamiltonian.form == Hamiltonian::Form::quasilinear) return -trace + hamiltonian_value(spec, p, u, x);
    return -trace + hamiltonian_value(spec, p, u, x) + spec.c(x) * u - spec.f(x);
}

namespace detail {

inline Point sample_point(const Domain& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (;;) {
        Point x{d.lower[0] + (d.upper[0] - d.lower[0]) * unit(rng),
                d.dimension == 2 ? d.lower[1] + (d.upper[1] - d.lower[1]) * unit(rng) : 0.0};
        if (d.kind == Domain::Kind::torus) {
            x = {unit(rng), d.dimension == 2 ? unit(rng) : 0.0};
        }
        if (d.contains(x)) return x;
    }
}

inline Vec sample_vector(int dimension, double radius, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    Vec v{radius * sym(rng), dimension == 2 ? radius * sym(rng) : 0.0};
    return v;
}

inline SymMatrix sample_symmetric(int dimension, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-5.0, 5.0);
    if (dimension == 1) return {sym(rng), 0.0, 0.0};
    return {sym(rng), sym(rng), sym(rng)};
}

inline SymMatrix sample_psd(int dimension, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-2.0, 2.0);
    if (dimension == 1) {
        const double b = sym(rng);
        return {b * b, 0.0, 0.0};
    }
    const double b11 = sym(rng), b12 = sym(rng), b21 = sym(rng), b22 = sym(rng);
    return {b11 * b11 + b12 * b12, b11 * b21 + b12 * b22, b21 * b21 + b22 * b22};
}

inline SymMatrix add(const SymMatrix& a, const SymMatrix& b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }

}  // namespace detail

struct EllipticityReport {
    bool passed = true;
    double worst_violation = 0.0;
    int samples = 0;
    double tolerance = 1e-10;
};

/**
 * @brief Samples (x, p, u, Y) and PSD increments P and records max F(Y+P) - F(Y).
 */
inline EllipticityReport check_ellipticity(const ProblemSpec& spec, int sample_count, std::uint64_t seed) {
    if (sample_count < 1) throw DomainError("sample_count must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ur(-10.0, 10.0);
    EllipticityReport report;
    report.samples = sample_count;
    double worst = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < sample_count; ++s) {
        const Point x = detail::sample_point(spec.domain, rng);
        const Vec p = detail::sample_vector(spec.dimension, 10.0, rng);
        const double u = ur(rng);
        const SymMatrix Y = detail::sample_symmetric(spec.dimension, rng);
        const SymMatrix P = detail::sample_psd(spec.dimension, rng);
        const double gap =
            evaluate_operator(spec, detail::add(Y, P), p, u, x) - evaluate_operator(spec, Y, p, u, x);
        worst = std::max(worst, gap);
    }
    report.worst_violation = std::max(worst, 0.0);
    report.passed = worst <= report.tolerance;
    return report;
}

/// Smallest eigenvalue of a(x) over deterministic samples.
inline double min_diffusion_eigenvalue(const ProblemSpec& spec, int sample_count = 256, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < sample_count; ++s) {
        const Point x = detail::sample_point(spec.domain, rng);
        worst = std::min(worst, eigenvalues(spec.diffusion(x), spec.dimension)[0]);
    }
    return worst;
}

struct SuperquadraticBound {
    bool certified = false;
    double K1 = 0.0;
    double K2 = 0.0;
    double m = 0.0;
    std::string message;
};

/**
 * @brief Certifies H(x,p) >= K1 |p|^m - K2 on sampled x in the domain, |p| <= p_radius, |u| <= R.
 *
 * Power form: K1 = min b and K2 = max(0, -min l) over the samples.
 * Quasilinear form: K1 is the leading coefficient (halved when the lower-order part is
 * nonzero, which keeps K2 finite) and K2 is the sampled worst gap.
 */
inline SuperquadraticBound check_superquadratic_bound(const ProblemSpec& spec, double R, double p_radius = 1e3,
                                                      int samples = 2000, std::uint64_t seed = 7) {
    if (samples < 1) throw DomainError("samples must be at least 1");
    SuperquadraticBound out;
    out.m = spec.exponent();
    if (!spec.superquadratic || out.m <= 2.0) {
        out.message = "bound not certified: spec is not superquadratic (m = " + std::to_string(out.m) + ")";
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Hamiltonian& h = spec.hamiltonian;

    if (h.form == Hamiltonian::Form::power) {
        double bmin = std::numeric_limits<double>::infinity();
        double lmin = std::numeric_limits<double>::infinity();
        for (int s = 0; s < samples; ++s) {
            const Point x = detail::sample_point(spec.domain, rng);
            bmin = std::min(bmin, h.b(x));
            lmin = std::min(lmin, h.lower_order(x));
        }
        if (!(bmin > 0.0)) {
            out.message = "bound not certified: b(x) is not bounded below by a positive constant";
            return out;
        }
        out.K1 = bmin;
        out.K2 = std::max(0.0, -lmin);
        out.certified = true;
        out.message = "certified from the power form";
        return out;
    }

    std::vector<Point> xs(static_cast<std::size_t>(samples));
    bool lower_terms = false;
    for (auto& x : xs) {
        x = detail::sample_point(spec.domain, rng);
        if (spec.c(x) != 0.0 || spec.f(x) != 0.0) lower_terms = true;
    }
    out.K1 = lower_terms ? 0.5 : 1.0;
    double gap = 0.0;
    for (int s = 0; s < samples; ++s) {
        const Point& x = xs[static_cast<std::size_t>(s)];
        const double q = s == 0 ? 0.0 : p_radius * std::pow(unit(rng), 2.0);
        const Vec p{q, 0.0};
        for (double u : {-R, R}) {
            const double H = hamiltonian_value(spec, p, u, x);
            gap = std::max(gap, out.K1 * std::pow(q, out.m) - H);
        }
    }
    out.K2 = gap;
    out.certified = true;
    out.message = "certified on samples with |p| <= " + std::to_string(p_radius);
    return out;
}

/**
 * @brief The quasilinear equation -Delta u + |Du|^m + c u = f multiplied through by 1 + |Du|^k.
 * @throws DomainError unless k, m > 0 and k + m > 2.
 */
inline ProblemSpec rewrite_quasilinear(double k, double m, const ScalarField& c, const ScalarField& f,
                                       const Domain& domain = Domain::interval(-1.0, 1.0)) {
    if (!(k > 0.0 && m > 0.0)) throw DomainError("quasilinear rewrite needs k > 0 and m > 0");
    if (!(k + m > 2.0)) throw DomainError("quasilinear rewrite needs k + m > 2");
    ProblemSpec spec;
    spec.name = "quasilinear";
    spec.dimension = domain.dimension;
    spec.domain = domain;
    spec.diffusion = Diffusion::isotropic(ScalarField::constant(1.0));
    spec.hamiltonian.form = Hamiltonian::Form::quasilinear;
    spec.hamiltonian.k = k;
    spec.hamiltonian.m = m;
    spec.c = c;
    spec.f = f;
    spec.boundary.kind = domain.kind == Domain::Kind::torus ? BoundaryCondition::Kind::periodic
                                                            : BoundaryCondition::Kind::state_constraint;
    return spec;
}

/**
 * @brief Structural validation: dimensions, boundary tag, exponent, PSD diffusion, positive b.
 * @throws ConfigError naming the offending field.
 */
inline void validate_spec(const ProblemSpec& spec, int sample_count = 256) {
    if (spec.dimension != 1 && spec.dimension != 2) throw ConfigError("problem.dimension must be 1 or 2");
    if (spec.domain.dimension != spec.dimension) throw ConfigError("problem.domain dimension does not match");
    const bool torus = spec.domain.kind == Domain::Kind::torus;
    const bool periodic = spec.boundary.kind == BoundaryCondition::Kind::periodic;
    if (torus != periodic) throw ConfigError("problem.boundary: periodic boundary requires a torus domain");
    if (spec.superquadratic && !(spec.exponent() > 2.0))
        throw ConfigError("problem.m: superquadratic specs need m > 2");
    if (!(spec.hamiltonian.m > 0.0)) throw ConfigError("problem.m must be positive");
    if (min_diffusion_eigenvalue(spec, sample_count) < -1e-12)
        throw ConfigError("problem.diffusion: a(x) is not positive semidefinite");
    if (spec.hamiltonian.form == Hamiltonian::Form::power) {
        std::mt19937_64 rng(3);
        for (int s = 0; s < sample_count; ++s) {
            const Point x = detail::sample_point(spec.domain, rng);
            if (!(spec.hamiltonian.b(x) > 0.0)) throw ConfigError("problem.b must be positive");
        }
    }
}

}  // namespace sqhj
