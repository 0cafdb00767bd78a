#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "problem.hpp"

namespace sqhj {

/**
 * @brief Uniform grid on an interval, a box or the unit torus.
 *
 * Bounded domains place n nodes per axis including both end points; the torus places
 * n nodes per axis at i/n. Nodes are numbered with the x index running fastest.
 */
class Grid {
public:
    /// Outward sides of a boundary node, one flag per axis and direction.
    struct Sides {
        std::array<bool, 2> lower{false, false};
        std::array<bool, 2> upper{false, false};

        bool any() const { return lower[0] || lower[1] || upper[0] || upper[1]; }
        bool constrained(int axis) const { return lower[axis] || upper[axis]; }
    };

    Grid() = default;

    /**
     * @throws ConfigError for balls, for fewer than 8 nodes per axis, or on dimension mismatch.
     */
    Grid(const Domain& domain, std::array<int, 2> nodes) : domain_(domain) {
        if (domain.kind == Domain::Kind::ball)
            throw ConfigError("grid.domain: the finite-difference grid supports interval, box and torus domains");
        dimension_ = domain.dimension;
        nodes_ = {nodes[0], dimension_ == 2 ? nodes[1] : 1};
        for (int i = 0; i < dimension_; ++i)
            if (nodes_[i] < 8) throw ConfigError("grid.n: at least 8 nodes per axis are required");
        periodic_ = domain.kind == Domain::Kind::torus;
        for (int i = 0; i < dimension_; ++i) {
            const double length = domain.upper[i] - domain.lower[i];
            spacing_[i] = periodic_ ? length / nodes_[i] : length / (nodes_[i] - 1);
            if (!(spacing_[i] > 0.0)) throw ConfigError("grid: degenerate domain extent");
        }
        sides_.resize(size());
        for (std::size_t k = 0; k < size(); ++k) {
            if (periodic_) continue;
            const auto ij = indices(k);
            Sides s;
            for (int a = 0; a < dimension_; ++a) {
                s.lower[a] = ij[a] == 0;
                s.upper[a] = ij[a] == nodes_[a] - 1;
            }
            sides_[k] = s;
            if (s.any()) boundary_.push_back(k);
        }
    }

    static Grid uniform(const Domain& domain, int n) { return Grid(domain, {n, n}); }

    int dimension() const { return dimension_; }
    const Domain& domain() const { return domain_; }
    bool periodic() const { return periodic_; }
    int nodes(int axis) const { return nodes_[axis]; }
    double spacing(int axis) const { return spacing_[axis]; }
    std::size_t size() const { return static_cast<std::size_t>(nodes_[0]) * static_cast<std::size_t>(nodes_[1]); }

    std::size_t index(int i, int j = 0) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nodes_[0]) + static_cast<std::size_t>(i);
    }

    std::array<int, 2> indices(std::size_t k) const {
        return {static_cast<int>(k % static_cast<std::size_t>(nodes_[0])),
                static_cast<int>(k / static_cast<std::size_t>(nodes_[0]))};
    }

    Point node(std::size_t k) const {
        const auto ij = indices(k);
        return {domain_.lower[0] + ij[0] * spacing_[0],
                dimension_ == 2 ? domain_.lower[1] + ij[1] * spacing_[1] : 0.0};
    }

    /// Neighbour index offset by (di, dj), wrapping on the torus; -1 if it leaves the grid.
    long neighbour(std::size_t k, int di, int dj = 0) const {
        auto ij = indices(k);
        ij[0] += di;
        ij[1] += dj;
        for (int a = 0; a < 2; ++a) {
            const int n = nodes_[a];
            if (periodic_) {
                ij[a] = ((ij[a] % n) + n) % n;
            } else if (ij[a] < 0 || ij[a] >= n) {
                return -1;
            }
        }
        return static_cast<long>(index(ij[0], ij[1]));
    }

    bool is_boundary(std::size_t k) const { return sides_[k].any(); }
    const Sides& sides(std::size_t k) const { return sides_[k]; }
    const std::vector<std::size_t>& boundary_nodes() const { return boundary_; }

    /// Distance from a node to the boundary of a bounded domain.
    double distance_to_boundary(std::size_t k) const { return domain_.distance_to_boundary(node(k)); }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.domain_ == b.domain_ && a.nodes_ == b.nodes_;
    }

private:
    Domain domain_ = Domain::interval(-1.0, 1.0);
    int dimension_ = 1;
    std::array<int, 2> nodes_{8, 1};
    std::array<double, 2> spacing_{0.0, 0.0};
    bool periodic_ = false;
    std::vector<Sides> sides_;
    std::vector<std::size_t> boundary_;
};

/** @brief One value per grid node. */
class DiscreteField {
public:
    DiscreteField() = default;
    explicit DiscreteField(std::shared_ptr<const Grid> grid, double value = 0.0)
        : grid_(std::move(grid)), values_(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid_->size()), value)) {}

    /// @throws DomainError if the value count differs from the node count or a value is not finite.
    DiscreteField(std::shared_ptr<const Grid> grid, Eigen::VectorXd values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_->size())
            throw DomainError("field value count does not match the grid");
        if (!values_.allFinite()) throw DomainError("field contains non-finite values");
    }

    template <class Fn>
    static DiscreteField sample(std::shared_ptr<const Grid> grid, Fn&& fn) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
        for (std::size_t k = 0; k < grid->size(); ++k) v[static_cast<Eigen::Index>(k)] = fn(grid->node(k));
        return DiscreteField(std::move(grid), std::move(v));
    }

    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
    double& operator[](std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }

    double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

    DiscreteField operator+(double c) const {
        DiscreteField out = *this;
        out.values_.array() += c;
        return out;
    }
    DiscreteField operator*(double c) const {
        DiscreteField out = *this;
        out.values_ *= c;
        return out;
    }

private:
    std::shared_ptr<const Grid> grid_;
    Eigen::VectorXd values_;
};

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes "x,value" (1D) or "x,y,value" (2D) rows with a header line.
inline void write_field_csv(const DiscreteField& u, const std::string& path, const std::string& value_name = "value") {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot write " + path);
    const Grid& g = u.grid();
    out << (g.dimension() == 1 ? "x," : "x,y,") << value_name << "\n";
    for (std::size_t k = 0; k < u.size(); ++k) {
        const Point x = g.node(k);
        out << format_number(x[0]) << ",";
        if (g.dimension() == 2) out << format_number(x[1]) << ",";
        out << format_number(u[k]) << "\n";
    }
}

/**
 * @brief Reads a field written by write_field_csv onto the given grid.
 * @throws DomainError if the row count or coordinates disagree with the grid.
 */
inline DiscreteField read_field_csv(std::shared_ptr<const Grid> grid, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot read " + path);
    std::string line;
    std::getline(in, line);
    Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
    std::size_t k = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (k >= grid->size()) throw DomainError(path + ": more rows than grid nodes");
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cols;
        while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
        if (cols.size() != static_cast<std::size_t>(grid->dimension() + 1))
            throw DomainError(path + ": wrong column count at row " + std::to_string(k + 2));
        const Point x = grid->node(k);
        for (int a = 0; a < grid->dimension(); ++a)
            if (std::abs(cols[static_cast<std::size_t>(a)] - x[a]) > 1e-9)
                throw DomainError(path + ": coordinates do not match the grid at row " + std::to_string(k + 2));
        v[static_cast<Eigen::Index>(k)] = cols.back();
        ++k;
    }
    if (k != grid->size()) throw DomainError(path + ": fewer rows than grid nodes");
    return DiscreteField(std::move(grid), std::move(v));
}

}  // namespace sqhj
