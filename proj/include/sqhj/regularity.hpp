#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "barrier.hpp"
#include "errors.hpp"
#include "grid.hpp"

namespace sqhj {

/** @brief Node subset on which a modulus is measured. */
struct Region {
    enum class Kind { whole, interior, boundary_band };
    Kind kind = Kind::whole;
    double delta = 0.0;

    static Region whole() { return {}; }
    /// Nodes with distance to the boundary at least delta.
    static Region interior(double delta) { return {Kind::interior, delta}; }
    /// Nodes with distance to the boundary at most delta.
    static Region boundary_band(double delta) { return {Kind::boundary_band, delta}; }

    bool contains(const Grid& g, std::size_t k) const {
        if (kind == Kind::whole || g.periodic()) return true;
        const double d = g.distance_to_boundary(k);
        return kind == Kind::interior ? d >= delta - 1e-12 : d <= delta + 1e-12;
    }

    std::string describe() const {
        switch (kind) {
            case Kind::whole: return "whole";
            case Kind::interior: return "interior(" + format_number(delta) + ")";
            case Kind::boundary_band: return "boundary_band(" + format_number(delta) + ")";
        }
        return "unknown";
    }
};

/** @brief Sampled modulus of continuity. */
struct ModulusTable {
    std::vector<double> scales;
    std::vector<double> omega;
    Region region;
    /// Scale at which the modulus saturates: the band width, or the domain diameter.
    double saturation_scale = 0.0;
    double spacing = 0.0;
    std::string pattern;
};

/** @brief Power-law fit omega(s) ~ K s^alpha. */
struct HolderEstimate {
    double alpha = 0.0;
    double K = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    int scales_used = 0;
    double residual = 0.0;
    /// Set when alpha is at least 0.95, i.e. consistent with a Lipschitz modulus.
    bool lipschitz_or_smoother = false;
};

namespace detail {

/// Largest (max - min) over windows of `width + 1` consecutive entries, skipping masked-out entries.
inline double windowed_oscillation(const std::vector<double>& v, const std::vector<char>& mask, std::size_t width) {
    std::deque<std::size_t> hi, lo;
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        while (!hi.empty() && hi.front() + width < i) hi.pop_front();
        while (!lo.empty() && lo.front() + width < i) lo.pop_front();
        if (mask[i]) {
            while (!hi.empty() && v[hi.back()] <= v[i]) hi.pop_back();
            while (!lo.empty() && v[lo.back()] >= v[i]) lo.pop_back();
            hi.push_back(i);
            lo.push_back(i);
        }
        if (!hi.empty()) best = std::max(best, v[hi.front()] - v[lo.front()]);
    }
    return best;
}

/// Lines of node indices along a lattice direction (dx, dy) covering the grid.
inline std::vector<std::vector<std::size_t>> grid_lines(const Grid& g, int dx, int dy) {
    std::vector<std::vector<std::size_t>> lines;
    const int nx = g.nodes(0), ny = g.dimension() == 2 ? g.nodes(1) : 1;
    auto trace = [&](int i, int j) {
        std::vector<std::size_t> line;
        while (i >= 0 && i < nx && j >= 0 && j < ny) {
            line.push_back(g.index(i, j));
            i += dx;
            j += dy;
        }
        if (line.size() > 1) lines.push_back(std::move(line));
    };
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const int pi = i - dx, pj = j - dy;
            if (pi >= 0 && pi < nx && pj >= 0 && pj < ny) continue;
            trace(i, j);
        }
    return lines;
}

}  // namespace detail

/// Scales 2h, 4h, 8h, ... up to s_max.
inline std::vector<double> dyadic_scales(double h, double s_max) {
    std::vector<double> s;
    for (double v = 2.0 * h; v <= s_max * (1.0 + 1e-12); v *= 2.0) s.push_back(v);
    return s;
}

/**
 * @brief omega(s) = max |u(x) - u(y)| over node pairs in the region with |x - y| <= s.
 *
 * In 1D all pairs are scanned. In 2D the pairs are those lying on a common grid line
 * in the x, y, diagonal or antidiagonal direction. Pairs never wrap across a periodic seam.
 * @throws DomainError if a scale is below 2 h or the region is empty.
 */
inline ModulusTable modulus_of_continuity(const DiscreteField& u, const Region& region, std::vector<double> scales) {
    const Grid& g = u.grid();
    double h = g.spacing(0);
    if (g.dimension() == 2) h = std::max(h, g.spacing(1));
    std::sort(scales.begin(), scales.end());
    for (double s : scales)
        if (s < 2.0 * h * (1.0 - 1e-9)) throw DomainError("modulus scales must be at least twice the grid spacing");
    std::vector<char> mask(g.size());
    bool any = false;
    for (std::size_t k = 0; k < g.size(); ++k) {
        mask[k] = region.contains(g, k);
        any = any || mask[k];
    }
    if (!any) throw DomainError("modulus region " + region.describe() + " contains no nodes");

    ModulusTable t;
    t.scales = scales;
    t.region = region;
    t.spacing = h;
    double diameter = 0.0;
    for (int a = 0; a < g.dimension(); ++a)
        diameter += std::pow(g.domain().upper[a] - g.domain().lower[a], 2.0);
    diameter = std::sqrt(diameter);
    t.saturation_scale = region.kind == Region::Kind::whole || g.periodic() ? diameter : region.delta;
    t.pattern = g.dimension() == 1 ? "all pairs" : "pairs on x, y, diagonal and antidiagonal grid lines";

    struct Direction {
        int dx, dy;
        double step;
    };
    std::vector<Direction> dirs{{1, 0, g.spacing(0)}};
    if (g.dimension() == 2) {
        const double diag = std::hypot(g.spacing(0), g.spacing(1));
        dirs.push_back({0, 1, g.spacing(1)});
        dirs.push_back({1, 1, diag});
        dirs.push_back({1, -1, diag});
    }
    std::vector<std::pair<std::vector<double>, std::vector<char>>> lines_by_dir[4];
    for (std::size_t d = 0; d < dirs.size(); ++d)
        for (const auto& line : detail::grid_lines(g, dirs[d].dx, dirs[d].dy)) {
            std::vector<double> v(line.size());
            std::vector<char> mk(line.size());
            for (std::size_t i = 0; i < line.size(); ++i) {
                v[i] = u[line[i]];
                mk[i] = mask[line[i]];
            }
            lines_by_dir[d].emplace_back(std::move(v), std::move(mk));
        }
    for (double s : scales) {
        double best = 0.0;
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            const auto width = static_cast<std::size_t>(std::floor(s / dirs[d].step + 1e-9));
            if (width == 0) continue;
            for (const auto& [v, mk] : lines_by_dir[d]) best = std::max(best, detail::windowed_oscillation(v, mk, width));
        }
        t.omega.push_back(best);
    }
    return t;
}

/// Default fit window: drop the two smallest scales and keep s <= saturation/2.
inline std::pair<double, double> default_window(const ModulusTable& t) {
    if (t.scales.size() < 3) throw DomainError("modulus table has fewer than three scales");
    return {t.scales[2], 0.5 * t.saturation_scale};
}

/**
 * @brief Least-squares fit of log omega = log K + alpha log s over the window.
 * @throws DomainError with fewer than four usable scales.
 */
inline HolderEstimate fit_holder_exponent(const ModulusTable& t, std::optional<std::pair<double, double>> window = {}) {
    const auto w = window ? *window : default_window(t);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.scales.size(); ++i) {
        const double s = t.scales[i];
        if (s < w.first * (1.0 - 1e-12) || s > w.second * (1.0 + 1e-12) || !(t.omega[i] > 0.0)) continue;
        xs.push_back(std::log(s));
        ys.push_back(std::log(t.omega[i]));
    }
    if (xs.size() < 4) throw DomainError("Hoelder fit needs at least four scales with positive modulus in the window");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    HolderEstimate e;
    e.alpha = sxy / sxx;
    e.K = std::exp(my - e.alpha * mx);
    e.window_lo = w.first;
    e.window_hi = w.second;
    e.scales_used = static_cast<int>(xs.size());
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = ys[i] - (std::log(e.K) + e.alpha * xs[i]);
        rss += d * d;
    }
    e.residual = std::sqrt(rss / n);
    e.lipschitz_or_smoother = e.alpha >= 0.95;
    return e;
}

inline void write_modulus_csv(const ModulusTable& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "scale,omega\n";
    for (std::size_t i = 0; i < t.scales.size(); ++i)
        out << format_number(t.scales[i]) << "," << format_number(t.omega[i]) << "\n";
}

inline void write_holder_csv(const HolderEstimate& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    out << "alpha,K,window_lo,window_hi,scales_used,residual,lipschitz\n";
    out << format_number(e.alpha) << "," << format_number(e.K) << "," << format_number(e.window_lo) << ","
        << format_number(e.window_hi) << "," << e.scales_used << "," << format_number(e.residual) << ","
        << (e.lipschitz_or_smoother ? 1 : 0) << "\n";
}

/** @brief Outcome of the local barrier bound u(y) <= u(x) + w_r(y - x). */
struct BarrierBoundReport {
    struct Center {
        std::size_t node = 0;
        double radius = 0.0;
        double worst = -std::numeric_limits<double>::infinity();
        std::size_t nodes_checked = 0;
    };
    std::vector<Center> centers;
    double tolerance = 0.0;
    std::size_t violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
};

/**
 * @brief Checks u(y) - u(x) - w_r(y - x) <= tolerance at the nodes y of B_r(x) for each center x,
 * with r given or r = d(x)/2 when omitted. The barrier is the unit barrier, rescaled per radius.
 * @throws DomainError if a center has d(x) < 2r or r > 1.
 */
inline BarrierBoundReport verify_barrier_bound(const DiscreteField& u, const Barrier& unit,
                                               const std::vector<std::size_t>& centers, std::optional<double> r,
                                               double tolerance) {
    const Grid& g = u.grid();
    if (unit.dimension != g.dimension()) throw DomainError("barrier and field dimensions differ");
    BarrierBoundReport rep;
    rep.tolerance = tolerance;
    for (std::size_t c : centers) {
        const double d = g.periodic() ? std::numeric_limits<double>::infinity() : g.distance_to_boundary(c);
        const double radius = r ? *r : 0.5 * d;
        if (!(radius > 0.0) || radius > 1.0) throw DomainError("barrier radius must lie in (0, 1]");
        if (d < 2.0 * radius * (1.0 - 1e-12)) throw DomainError("center too close to the boundary for radius r");
        const Barrier w = scale_barrier(unit, radius);
        BarrierBoundReport::Center cr;
        cr.node = c;
        cr.radius = radius;
        const int span0 = static_cast<int>(std::floor(radius / g.spacing(0)));
        const int span1 = g.dimension() == 2 ? static_cast<int>(std::floor(radius / g.spacing(1))) : 0;
        for (int di = -span0; di <= span0; ++di)
            for (int dj = -span1; dj <= span1; ++dj) {
                const long k = g.neighbour(c, di, dj);
                if (k < 0) continue;
                const Point y{di * g.spacing(0), g.dimension() == 2 ? dj * g.spacing(1) : 0.0};
                if (std::hypot(y[0], y[1]) > radius) continue;
                const double gap = u[static_cast<std::size_t>(k)] - u[c] - w.value(y);
                cr.worst = std::max(cr.worst, gap);
                ++cr.nodes_checked;
                if (gap > tolerance) ++rep.violations;
            }
        rep.worst = std::max(rep.worst, cr.worst);
        rep.centers.push_back(cr);
    }
    return rep;
}

/** @brief Dyadic chain x_k = x - (delta / 2^k) n(x) towards a boundary point. */
struct ChainReport {
    bool passed = false;
    double sum = 0.0;
    double bound = 0.0;
    int steps = 0;
    std::vector<double> positions;
    std::vector<double> values;
};

/// K-bar = K_hat * sum_{k=1..K_max} 2^{-alpha k}.
inline double chain_constant(double K_hat, double alpha, int K_max) {
    double s = 0.0;
    for (int k = 1; k <= K_max; ++k) s += std::pow(2.0, -alpha * k);
    return K_hat * s;
}

/**
 * @brief Sums |u(x_k) - u(x_{k-1})| over the chain towards the boundary node nearest to x
 * (k up to ceil(log2(delta/h))) and checks the sum against K_bar delta^alpha.
 * Chain values are interpolated by a monotone cubic along the normal grid line.
 * @throws DomainError if the chain leaves the grid or the grid is periodic.
 */
inline ChainReport boundary_chain_check(const DiscreteField& u, std::size_t x, double delta, double alpha,
                                        double K_bar) {
    const Grid& g = u.grid();
    if (g.periodic()) throw DomainError("boundary chain needs a bounded domain");
    const auto ij = g.indices(x);
    int axis = 0;
    int dir = 0;
    double best = std::numeric_limits<double>::infinity();
    const Point px = g.node(x);
    for (int a = 0; a < g.dimension(); ++a) {
        const double dl = px[a] - g.domain().lower[a], du = g.domain().upper[a] - px[a];
        if (dl < best) {
            best = dl;
            axis = a;
            dir = -1;
        }
        if (du < best) {
            best = du;
            axis = a;
            dir = 1;
        }
    }
    std::vector<double> s, v;
    const int n = g.nodes(axis);
    for (int i = 0; i < n; ++i) {
        const std::size_t k = axis == 0 ? g.index(i, ij[1]) : g.index(ij[0], i);
        s.push_back(g.node(k)[axis]);
        v.push_back(u[k]);
    }
    const double base = px[axis];
    const double far = base - dir * delta;
    if (far < s.front() - 1e-12 || far > s.back() + 1e-12) throw DomainError("boundary chain exits the grid");
    using boost::math::interpolators::pchip;
    pchip<std::vector<double>> interp(std::move(s), std::move(v));
    const double h = g.spacing(axis);
    ChainReport rep;
    rep.steps = std::max(1, static_cast<int>(std::ceil(std::log2(delta / h))));
    double prev = interp(far);
    rep.positions.push_back(far);
    rep.values.push_back(prev);
    for (int k = 1; k <= rep.steps; ++k) {
        const double pos = base - dir * delta / std::pow(2.0, k);
        const double val = interp(pos);
        rep.sum += std::abs(val - prev);
        rep.positions.push_back(pos);
        rep.values.push_back(val);
        prev = val;
    }
    rep.bound = K_bar * std::pow(delta, alpha);
    rep.passed = rep.sum <= rep.bound;
    return rep;
}

/** @brief Boundary data attainment for generalized Dirichlet solutions. */
struct BoundaryLossReport {
    std::vector<std::size_t> loss_nodes;
    std::vector<std::size_t> overshoot_nodes;
    double max_overshoot = 0.0;
    double max_loss = 0.0;
    double tolerance = 0.0;
};

/// Default tolerance 1e-4 (1 + sup |g|) over the boundary nodes.
inline double default_loss_tolerance(const DiscreteField& u, const ScalarField& g) {
    double gmax = 0.0;
    for (std::size_t k : u.grid().boundary_nodes()) gmax = std::max(gmax, std::abs(g(u.grid().node(k))));
    return 1e-4 * (1.0 + gmax);
}

/**
 * @brief Lists boundary nodes with u < g - tol (data lost) and u > g + tol (overshoot).
 */
inline BoundaryLossReport boundary_loss_report(const DiscreteField& u, const ScalarField& g,
                                               std::optional<double> tol = {}) {
    BoundaryLossReport rep;
    rep.tolerance = tol ? *tol : default_loss_tolerance(u, g);
    for (std::size_t k : u.grid().boundary_nodes()) {
        const double gap = u[k] - g(u.grid().node(k));
        if (gap > rep.tolerance) rep.overshoot_nodes.push_back(k);
        if (gap < -rep.tolerance) rep.loss_nodes.push_back(k);
        rep.max_overshoot = std::max(rep.max_overshoot, gap);
        rep.max_loss = std::max(rep.max_loss, -gap);
    }
    rep.max_overshoot = std::max(rep.max_overshoot, 0.0);
    return rep;
}

}  // namespace sqhj
