#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sqhj/barrier.hpp"
#include "sqhj/registry.hpp"
#include "sqhj/regularity.hpp"
#include "sqhj/solver.hpp"

using namespace sqhj;

namespace {

std::shared_ptr<const Grid> line(int n) {
    return std::make_shared<const Grid>(Grid::uniform(Domain::interval(-1.0, 1.0), n));
}

DiscreteField sample(std::shared_ptr<const Grid> g, double (*fn)(double)) {
    return DiscreteField::sample(std::move(g), [fn](const Point& x) { return fn(x[0]); });
}

SolveReport holder_solve(int n, double m = 3.0, double f_shift = 0.0) {
    const auto spec = ProblemRegistry::make("holder_1d", {{"m", m}, {"f0", 1.0 + f_shift}});
    return solve_stationary(spec, line(n), {}, 1.0);
}

}  // namespace

TEST(Modulus, LinearFunctionIsIdentity) {
    auto g = line(201);
    const auto t = modulus_of_continuity(sample(g, [](double x) { return x; }), Region::whole(),
                                         dyadic_scales(g->spacing(0), 1.0));
    for (std::size_t i = 0; i < t.scales.size(); ++i) EXPECT_NEAR(t.omega[i], t.scales[i], 1e-12);
}

TEST(Modulus, SquareRootOfAbsoluteValue) {
    auto g = line(2001);
    const auto t = modulus_of_continuity(sample(g, [](double x) { return std::sqrt(std::abs(x)); }), Region::whole(),
                                         dyadic_scales(g->spacing(0), 1.0));
    for (std::size_t i = 0; i < t.scales.size(); ++i) EXPECT_NEAR(t.omega[i], std::sqrt(t.scales[i]), 1e-9);
    const auto e = fit_holder_exponent(t);
    EXPECT_NEAR(e.alpha, 0.5, 0.05);
    EXPECT_FALSE(e.lipschitz_or_smoother);
}

TEST(Modulus, ConstantIsZero) {
    auto g = std::make_shared<const Grid>(Grid::uniform(Domain::box({0.0, 0.0}, {1.0, 1.0}), 24));
    const auto t = modulus_of_continuity(DiscreteField(g, 4.0), Region::whole(), dyadic_scales(g->spacing(0), 0.5));
    for (double w : t.omega) EXPECT_EQ(w, 0.0);
}

TEST(Modulus, RejectsSubgridScalesAndEmptyRegions) {
    auto g = line(101);
    const DiscreteField u(g, 0.0);
    EXPECT_THROW(modulus_of_continuity(u, Region::whole(), {g->spacing(0)}), DomainError);
    EXPECT_THROW(modulus_of_continuity(u, Region::interior(1.5), {0.1}), DomainError);
}

TEST(Modulus, TwoDimensionalDiagonalPairs) {
    auto g = std::make_shared<const Grid>(Grid::uniform(Domain::box({0.0, 0.0}, {1.0, 1.0}), 33));
    // u = x + y varies fastest along the diagonal: a diagonal pair of length s has increment sqrt(2) s.
    const auto u = DiscreteField::sample(g, [](const Point& x) { return x[0] + x[1]; });
    const auto t = modulus_of_continuity(u, Region::whole(), dyadic_scales(g->spacing(0), 0.5));
    const double h = g->spacing(0);
    for (std::size_t i = 0; i < t.scales.size(); ++i) {
        const double diag = std::floor(t.scales[i] / (std::sqrt(2.0) * h) + 1e-9) * 2.0 * h;
        EXPECT_NEAR(t.omega[i], std::max(t.scales[i], diag), 1e-12);
    }
}

TEST(Modulus, MonotoneAndSubadditive) {
    const auto rep = holder_solve(1601);
    ASSERT_TRUE(rep.converged);
    const double h = rep.solution.grid().spacing(0);
    std::vector<double> scales;
    for (int j = 2; j <= 60; ++j) scales.push_back(j * h);
    const auto t = modulus_of_continuity(rep.solution, Region::whole(), scales);
    const auto e = fit_holder_exponent(modulus_of_continuity(rep.solution, Region::boundary_band(0.3),
                                                             dyadic_scales(h, 0.3)));
    const double slack = 2.0 * e.K * std::pow(h, e.alpha);
    for (std::size_t i = 1; i < t.omega.size(); ++i) EXPECT_GE(t.omega[i], t.omega[i - 1]);
    for (std::size_t i = 0; i < scales.size(); ++i)
        for (std::size_t j = 0; i + j + 2 < scales.size(); ++j) {
            // scales[i] + scales[j] = (i + j + 4) h = scales[i + j + 2]
            EXPECT_LE(t.omega[i + j + 2], t.omega[i] + t.omega[j] + slack);
        }
}

TEST(HolderFit, SyntheticPowerLawIsExact) {
    ModulusTable t;
    for (int k = 0; k < 8; ++k) {
        const double s = 0.01 * std::pow(2.0, k);
        t.scales.push_back(s);
        t.omega.push_back(3.0 * std::pow(s, 2.0 / 3.0));
    }
    t.saturation_scale = 10.0;
    const auto e = fit_holder_exponent(t, std::make_pair(0.0, 10.0));
    EXPECT_NEAR(e.alpha, 2.0 / 3.0, 1e-6);
    EXPECT_NEAR(e.K, 3.0, 1e-6);
    EXPECT_EQ(e.scales_used, 8);
    EXPECT_LT(e.residual, 1e-12);
}

TEST(HolderFit, LinearFieldFlaggedLipschitz) {
    auto g = line(401);
    const auto t = modulus_of_continuity(sample(g, [](double x) { return 2.0 * x; }), Region::whole(),
                                         dyadic_scales(g->spacing(0), 1.0));
    const auto e = fit_holder_exponent(t);
    EXPECT_NEAR(e.alpha, 1.0, 0.05);
    EXPECT_TRUE(e.lipschitz_or_smoother);
}

TEST(HolderFit, NeedsFourScales) {
    ModulusTable t;
    t.scales = {0.1, 0.2, 0.4, 0.8, 1.6};
    t.omega = {0.1, 0.2, 0.4, 0.8, 1.6};
    t.saturation_scale = 2.0;
    EXPECT_THROW(fit_holder_exponent(t), DomainError);
    EXPECT_NO_THROW(fit_holder_exponent(t, std::make_pair(0.0, 2.0)));
    t.omega = {0.0, 0.0, 0.4, 0.8, 1.6};
    EXPECT_THROW(fit_holder_exponent(t, std::make_pair(0.0, 2.0)), DomainError);
}

TEST(HolderFit, InvariantUnderShiftAndSignFlip) {
    const auto rep = holder_solve(1601);
    ASSERT_TRUE(rep.converged);
    const Region band = Region::boundary_band(0.3);
    const auto scales = dyadic_scales(rep.solution.grid().spacing(0), 0.3);
    const double a0 = fit_holder_exponent(modulus_of_continuity(rep.solution, band, scales)).alpha;
    const double a1 = fit_holder_exponent(modulus_of_continuity(rep.solution + 100.0, band, scales)).alpha;
    const double a2 = fit_holder_exponent(modulus_of_continuity(rep.solution * -1.0, band, scales)).alpha;
    EXPECT_NEAR(a1, a0, 1e-9);
    EXPECT_EQ(a2, a0);
}

TEST(HolderFit, SourceShiftFamilyStable) {
    std::vector<double> alphas;
    for (double shift : {0.0, 1.0, 3.0}) {
        const auto rep = holder_solve(1601, 3.0, shift);
        ASSERT_TRUE(rep.converged);
        const auto scales = dyadic_scales(rep.solution.grid().spacing(0), 0.3);
        alphas.push_back(
            fit_holder_exponent(modulus_of_continuity(rep.solution, Region::boundary_band(0.3), scales)).alpha);
    }
    for (double a : alphas) EXPECT_NEAR(a, alphas.front(), 0.1);
}

TEST(HolderFit, CsvExport) {
    ModulusTable t;
    t.scales = {0.1, 0.2};
    t.omega = {0.3, 0.5};
    const auto path = std::filesystem::temp_directory_path() / "sqhj_modulus.csv";
    write_modulus_csv(t, path.string());
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "scale,omega");
    EXPECT_EQ(row, "0.10000000000000001,0.29999999999999999");
    std::filesystem::remove(path);
}

TEST(BarrierBound, ConstantFieldHasSlack) {
    auto g = line(201);
    const auto unit = build_power_barrier(3.0, 1.0, 1.0, 1.0, 0.05, 1);
    const auto rep = verify_barrier_bound(DiscreteField(g, 2.0), unit, {100, 80, 120}, std::nullopt, 0.0);
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_LE(rep.worst, 0.0);
    ASSERT_EQ(rep.centers.size(), 3u);
    EXPECT_NEAR(rep.centers[0].radius, 0.5, 1e-12);
}

TEST(BarrierBound, ConvergedSolutionSatisfiesLocalBound) {
    const auto spec = ProblemRegistry::make("holder_1d");
    const auto rep = solve_stationary(spec, line(1601), {}, 1.0);
    ASSERT_TRUE(rep.converged);
    const auto& u = rep.solution;
    double R = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) R = std::max(R, spec.f(u.grid().node(k)) - 1.0 * u[k]);
    const auto unit = build_power_barrier(3.0, 1.0, 1.0, std::max(R, 1e-3), 0.05, 1);
    const double h = u.grid().spacing(0);
    const auto fit = fit_holder_exponent(modulus_of_continuity(u, Region::interior(0.2), dyadic_scales(h, 0.4)));
    const double tol = 2.0 * fit.K * std::pow(h, unit.alpha);
    std::vector<std::size_t> centers;
    for (std::size_t k = 200; k <= 1400; k += 100) centers.push_back(k);
    const auto check = verify_barrier_bound(u, unit, centers, std::nullopt, tol);
    EXPECT_EQ(check.violations, 0u) << "worst " << check.worst;
}

TEST(BarrierBound, ArtificialJumpReported) {
    auto g = line(401);
    const auto unit = build_power_barrier(3.0, 1.0, 1.0, 1.0, 0.05, 1);
    const double r = 0.25, h = g->spacing(0);
    const double w_h = scale_barrier(unit, r).value({h, 0.0});
    DiscreteField u(g, 0.0);
    u[201] = 10.0 * w_h;
    const auto rep = verify_barrier_bound(u, unit, {200}, r, 0.0);
    EXPECT_GE(rep.violations, 1u);
    EXPECT_NEAR(rep.worst, 9.0 * w_h, 1e-12);
}

TEST(BarrierBound, CenterTooCloseToBoundary) {
    auto g = line(101);
    const auto unit = build_power_barrier(3.0, 1.0, 1.0, 1.0, 0.05, 1);
    EXPECT_THROW(verify_barrier_bound(DiscreteField(g, 0.0), unit, {5}, 0.2, 0.0), DomainError);
}

TEST(BoundaryChain, SquareRootDistancePasses) {
    auto g = line(2001);
    const auto u = sample(g, [](double x) { return std::sqrt(1.0 - std::abs(x)); });
    const double delta = 0.1, alpha = 0.5;
    const int steps = static_cast<int>(std::ceil(std::log2(delta / g->spacing(0))));
    const auto rep = boundary_chain_check(u, 2000, delta, alpha, chain_constant(1.0, alpha, steps));
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.steps, steps);
    // The chain sum telescopes to sqrt(delta) (1 - 2^{-K/2}); the last point sits inside the final cell.
    EXPECT_NEAR(rep.sum, std::sqrt(delta) * (1.0 - std::pow(2.0, -0.5 * steps)), 0.1 * std::sqrt(g->spacing(0)));
    EXPECT_LE(rep.bound, std::sqrt(delta) / (1.0 - std::sqrt(0.5)));
}

TEST(BoundaryChain, LinearPasses) {
    auto g = line(1001);
    const auto u = sample(g, [](double x) { return 0.5 * x; });
    const auto rep = boundary_chain_check(u, 0, 0.2, 0.5, chain_constant(1.0, 0.5, 8));
    EXPECT_TRUE(rep.passed);
    EXPECT_NEAR(rep.sum, 0.5 * (0.2 - 0.2 / std::pow(2.0, rep.steps)), 1e-12);
}

TEST(BoundaryChain, QuarterPowerFailsUnderRefinement) {
    const double delta = 1e-3, alpha = 0.5;
    double previous_sum = 0.0;
    bool failed = false;
    for (int n : {2001, 20001, 200001}) {
        auto g = line(n);
        const auto u = sample(g, [](double x) { return std::pow(1.0 - std::abs(x), 0.25); });
        const int steps = std::max(1, static_cast<int>(std::ceil(std::log2(delta / g->spacing(0)))));
        const auto rep = boundary_chain_check(u, static_cast<std::size_t>(n - 1), delta, alpha,
                                              chain_constant(1.0, alpha, steps));
        EXPECT_GT(rep.sum, previous_sum);
        EXPECT_LT(rep.sum, std::pow(delta, 0.25));
        previous_sum = rep.sum;
        failed = !rep.passed;
    }
    EXPECT_TRUE(failed);
}

TEST(BoundaryChain, Errors) {
    auto g = line(101);
    const DiscreteField u(g, 0.0);
    EXPECT_THROW(boundary_chain_check(u, 100, 3.0, 0.5, 1.0), DomainError);
    auto torus = std::make_shared<const Grid>(Grid::uniform(Domain::torus(1), 32));
    EXPECT_THROW(boundary_chain_check(DiscreteField(torus, 0.0), 0, 0.1, 0.5, 1.0), DomainError);
}

TEST(BoundaryLoss, SmoothDataAttained) {
    const auto spec = ProblemRegistry::make("dirichlet_1d");
    const auto rep = solve_stationary(spec, line(201), {}, 1.0);
    ASSERT_TRUE(rep.converged);
    const auto loss = boundary_loss_report(rep.solution, spec.boundary.g);
    EXPECT_TRUE(loss.loss_nodes.empty());
    EXPECT_TRUE(loss.overshoot_nodes.empty());
}

TEST(BoundaryLoss, SpikeIsLost) {
    const auto spec = ProblemRegistry::make("dirichlet_1d", {{"spike", 10.0}});
    const auto rep = solve_stationary(spec, line(201), {}, 1.0);
    ASSERT_TRUE(rep.converged);
    const auto loss = boundary_loss_report(rep.solution, spec.boundary.g);
    ASSERT_EQ(loss.loss_nodes.size(), 1u);
    EXPECT_EQ(loss.loss_nodes.front(), 200u);
    EXPECT_TRUE(loss.overshoot_nodes.empty());
    EXPECT_GT(loss.max_loss, 1.0);
    EXPECT_NEAR(loss.tolerance, 1e-4 * 11.0, 1e-12);
}

TEST(BoundaryLoss, ExactDataGivesEmptyReport) {
    auto g = line(51);
    const auto data = ScalarField::affine(0.3, {2.0, 0.0});
    const auto u = DiscreteField::sample(g, [&](const Point& x) { return data(x); });
    const auto loss = boundary_loss_report(u, data);
    EXPECT_TRUE(loss.loss_nodes.empty());
    EXPECT_TRUE(loss.overshoot_nodes.empty());
    EXPECT_EQ(loss.max_overshoot, 0.0);
}

TEST(BoundaryLoss, NeverOvershootsOnConvergedSolves) {
    for (double g0 : {-1.0, 0.0, 0.5, 2.0})
        for (double spike : {0.0, 3.0}) {
            const auto spec = ProblemRegistry::make("dirichlet_1d", {{"g0", g0}, {"spike", spike}});
            const auto rep = solve_stationary(spec, line(101), {}, 1.0);
            ASSERT_TRUE(rep.converged);
            EXPECT_TRUE(boundary_loss_report(rep.solution, spec.boundary.g).overshoot_nodes.empty()) << g0;
        }
}
