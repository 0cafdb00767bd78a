#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

#include "sqhj/homogenization.hpp"
#include "sqhj/registry.hpp"

using namespace sqhj;

namespace {

constexpr double kSolverTol = 1e-8;

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
    return v;
}

std::shared_ptr<const Grid> torus(int dim, int n) {
    return std::make_shared<const Grid>(Grid::uniform(Domain::torus(dim), n));
}

std::shared_ptr<const Grid> line(int n) {
    return std::make_shared<const Grid>(Grid::uniform(Domain::interval(-1.0, 1.0), n));
}

EffectiveHamiltonian cubic_table(double half_width = 2.0, int nodes = 8001, double shift = 0.0) {
    return EffectiveHamiltonian::from_function([&](double p) { return std::pow(std::abs(p), 3.0) - shift; },
                                               linspace(-half_width, half_width, nodes));
}

/// Midpoint quadrature and plain bisection for |p| = int (c + V)^{1/m}.
double brute_effective(const std::function<double(double)>& V, double m, double p) {
    constexpr int N = 200000;
    double vmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) vmin = std::min(vmin, V((i + 0.5) / N));
    auto I = [&](double c) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += std::pow(std::max(c + V((i + 0.5) / N), 0.0), 1.0 / m);
        return s / N;
    };
    if (std::abs(p) <= I(-vmin)) return -vmin;
    double lo = -vmin, hi = std::pow(std::abs(p), m) - vmin + 1.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (I(mid) < std::abs(p) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(ParallelFor, FillsEverySlotOnce) {
    std::vector<int> hits(257, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += static_cast<int>(i); });
    for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(hits[i], static_cast<int>(i));
}

TEST(ParallelFor, RethrowsAfterJoining) {
    std::atomic<int> done{0};
    EXPECT_THROW(parallel_for(16, 3,
                              [&](std::size_t i) {
                                  ++done;
                                  if (i == 5) throw SolverError("boom");
                              }),
                 SolverError);
    EXPECT_EQ(done.load(), 16);
}

TEST(OracleEffective, ConstantPotentialGivesPowerLaw) {
    const auto V = ScalarField::constant(0.0);
    for (double p : {-2.0, -0.3, 0.0, 0.7, 1.5}) EXPECT_NEAR(oracle_effective_1d(V, 3.0, p), std::pow(std::abs(p), 3.0), 1e-9);
}

TEST(OracleEffective, FlatPieceAtZeroSlope) {
    const auto V = ProblemRegistry::potential_1d(0.0, 1.0);
    EXPECT_NEAR(oracle_effective_1d(V, 3.0, 0.0), 0.0, 1e-10);
    EXPECT_NEAR(oracle_effective_1d(V, 3.0, 0.5), 0.0, 1e-10);
    const auto lifted = ProblemRegistry::potential_1d(0.4, 1.0);
    EXPECT_NEAR(oracle_effective_1d(lifted, 3.0, 0.2), -0.4, 1e-10);
}

TEST(OracleEffective, AgreesWithBruteForceQuadrature) {
    const auto V = ProblemRegistry::potential_1d(0.0, 1.0);
    auto v = [&](double y) { return V({y, 0.0}); };
    for (double m : {2.5, 3.0, 4.0})
        for (double p : {1.0, 2.0})
            EXPECT_NEAR(oracle_effective_1d(V, m, p), brute_effective(v, m, p), 1e-6) << "m=" << m << " p=" << p;
}

TEST(OracleEffective, LargeSlopesGrowLikePower) {
    const auto V = ProblemRegistry::potential_1d(0.0, 1.0);
    const double r1 = oracle_effective_1d(V, 3.0, 10.0) / 1e3;
    const double r2 = oracle_effective_1d(V, 3.0, 100.0) / 1e6;
    EXPECT_LT(std::abs(r2 - 1.0), std::abs(r1 - 1.0));
    EXPECT_NEAR(r2, 1.0, 0.01);
}

TEST(OracleEffective, RejectsInvalidArguments) {
    const auto V = ScalarField::constant(0.0);
    EXPECT_THROW(oracle_effective_1d(V, 2.0, 1.0), DomainError);
    EXPECT_THROW(oracle_effective_1d(V, 3.0, std::nan("")), DomainError);
}

TEST(SolveCell, YIndependentCellHasFlatCorrector) {
    const auto cell = ProblemRegistry::make("cell_1d", {{"a", 1.0}, {"v0", 0.3}, {"v1", 0.0}});
    const auto g = torus(1, 64);
    for (double p : {-1.5, -0.25, 0.0, 1.0}) {
        const auto s = solve_cell(cell, {p, 0.0}, {0.0, 0.0}, g);
        EXPECT_NEAR(s.value, std::pow(std::abs(p), 3.0) - 0.3, 1e-6) << p;
        EXPECT_LT(s.corrector.sup_norm(), 1e-8);
        EXPECT_TRUE(s.converged);
    }
}

TEST(SolveCell, MatchesOracleOnNineSlopes) {
    const auto g = torus(1, 200);
    for (const ProblemParams& params : {ProblemParams{{"v0", 0.0}, {"v1", 1.0}}, ProblemParams{{"v0", 0.5}, {"v1", 2.0}}}) {
        const auto cell = ProblemRegistry::make("cell_1d", params);
        const auto V = ProblemRegistry::potential_1d(params.at("v0"), params.at("v1"));
        for (double p : linspace(-2.0, 2.0, 9)) {
            const auto s = solve_cell(cell, {p, 0.0}, {0.0, 0.0}, g);
            EXPECT_NEAR(s.value, oracle_effective_1d(V, 3.0, p), 1e-2) << "p=" << p;
        }
    }
}

TEST(SolveCell, CorrectorIsPeriodicAcrossTheSeam) {
    const auto g = torus(1, 200);
    for (double a : {0.0, 1.0}) {
        const auto cell = ProblemRegistry::make("cell_1d", {{"a", a}});
        for (double p : {-1.0, 0.5, 1.5}) {
            const auto s = solve_cell(cell, {p, 0.0}, {0.0, 0.0}, g);
            ASSERT_TRUE(s.converged);
            EXPECT_LT(s.seam_defect, kSolverTol) << "a=" << a << " p=" << p;
            EXPECT_EQ(s.corrector[0], 0.0);
        }
    }
}

TEST(SolveCell, ShiftingThePotentialShiftsTheConstant) {
    const auto g = torus(1, 128);
    for (double delta : {0.7, -2.0}) {
        const auto base = solve_cell(ProblemRegistry::make("cell_1d", {{"a", 0.5}}), {1.2, 0.0}, {0.0, 0.0}, g);
        const auto moved =
            solve_cell(ProblemRegistry::make("cell_1d", {{"a", 0.5}, {"v0", delta}}), {1.2, 0.0}, {0.0, 0.0}, g);
        EXPECT_NEAR(moved.value, base.value - delta, 2.0 * kSolverTol);
    }
}

TEST(SolveCell, EvenProblemGivesEvenConstant) {
    const auto g = torus(1, 128);
    const auto cell = ProblemRegistry::make("cell_1d", {{"a", 1.0}});
    for (double p : {0.4, 1.1, 1.9}) {
        const double plus = solve_cell(cell, {p, 0.0}, {0.0, 0.0}, g).value;
        const double minus = solve_cell(cell, {-p, 0.0}, {0.0, 0.0}, g).value;
        EXPECT_NEAR(plus, minus, 2.0 * kSolverTol);
    }
}

TEST(SolveCell, TwoDimensionalCellSitsAboveTheLowerBound) {
    const auto g = torus(2, 24);
    const auto cell = ProblemRegistry::make("cell_2d", {{"a", 0.5}});
    const auto s = solve_cell(cell, {1.0, -0.5}, {0.0, 0.0}, g);
    const double q = std::pow(std::hypot(1.0, 0.5), 3.0);
    EXPECT_GE(s.value, q - 1.0 - 2.0 * kSolverTol);
    EXPECT_LE(s.value, q + 2.0 * kSolverTol);
    EXPECT_LT(s.seam_defect, kSolverTol);
}

TEST(SolveCell, RejectsBoundedGridsAndBadSlopes) {
    const auto cell = ProblemRegistry::make("cell_1d");
    EXPECT_THROW(solve_cell(cell, {1.0, 0.0}, {0.0, 0.0}, line(32)), DomainError);
    EXPECT_THROW(solve_cell(cell, {std::numeric_limits<double>::infinity(), 0.0}, {0.0, 0.0}, torus(1, 32)), DomainError);
}

TEST(EffectiveTable, InterpolantIsExactAtNodesAndLinearBetween) {
    const EffectiveHamiltonian H({-1.0, 0.0, 2.0}, {3.0, -1.0, 5.0});
    EXPECT_EQ(H(-1.0), 3.0);
    EXPECT_EQ(H(0.0), -1.0);
    EXPECT_EQ(H(2.0), 5.0);
    EXPECT_DOUBLE_EQ(H(1.0), 2.0);
    EXPECT_DOUBLE_EQ(H(-2.0), 7.0);
    EXPECT_DOUBLE_EQ(H(3.0), 8.0);
    EXPECT_TRUE(H.coercive_ends());
}

TEST(EffectiveTable, RejectsMalformedTables) {
    EXPECT_THROW(EffectiveHamiltonian({0.0}, {1.0}), DomainError);
    EXPECT_THROW(EffectiveHamiltonian({0.0, 0.0}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(EffectiveHamiltonian({0.0, 1.0}, {1.0, std::nan("")}), DomainError);
    EXPECT_THROW(EffectiveHamiltonian({0.0, 1.0}, {1.0}), DomainError);
}

TEST(EffectiveTable, GodunovFluxIsConsistentAndMonotone) {
    const auto H = EffectiveHamiltonian::from_function(
        [](double p) { return std::pow(std::abs(p - 0.3), 3.0) - std::cos(3.0 * p); }, linspace(-3.0, 3.0, 121));
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-2.5, 2.5), step(0.0, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const double a = U(rng), b = U(rng), da = step(rng), db = step(rng);
        EXPECT_DOUBLE_EQ(H.godunov(a, a), H(a));
        EXPECT_LE(H.godunov(a, b), H.godunov(a + da, b) + 1e-12);
        EXPECT_GE(H.godunov(a, b), H.godunov(a, b + db) - 1e-12);
    }
}

TEST(EffectiveTable, DoublingKeepsNodesAndAddsOuterSlopes) {
    const auto H = cubic_table(0.5, 11);
    const auto D = H.doubled([](double p) { return std::pow(std::abs(p), 3.0); });
    EXPECT_DOUBLE_EQ(D.p_min(), -1.0);
    EXPECT_DOUBLE_EQ(D.p_max(), 1.0);
    EXPECT_EQ(D.slopes().size(), 17u);
    for (double p : H.slopes()) EXPECT_DOUBLE_EQ(D(p), H(p));
}

TEST(EffectiveTable, CsvHasOneRowPerSlope) {
    const auto H = cubic_table(1.0, 5);
    const auto path = std::filesystem::temp_directory_path() / "sqhj_effective.csv";
    write_effective_csv(H, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "p,Fbar");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5);
    std::filesystem::remove(path);
}

TEST(Tabulate, YIndependentTableIsThePointwiseHamiltonian) {
    const auto cell = ProblemRegistry::make("cell_1d", {{"a", 1.0}, {"v0", -0.2}, {"v1", 0.0}});
    const auto p = linspace(-2.0, 2.0, 9);
    const auto H = tabulate_effective(cell, p, {0.0, 0.0}, torus(1, 64));
    ASSERT_EQ(H.slopes().size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(H.values()[i], std::pow(std::abs(p[i]), 3.0) + 0.2, 1e-6);
}

TEST(Tabulate, TwoDimensionalYIndependentAlongADirection) {
    const auto cell = ProblemRegistry::make("cell_2d", {{"a", 0.5}, {"v0", 0.1}, {"v1", 0.0}});
    TabulateOptions o;
    o.direction = {0.6, 0.8};
    const auto p = linspace(-1.0, 1.0, 5);
    const auto H = tabulate_effective(cell, p, {0.0, 0.0}, torus(2, 16), o);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(H.values()[i], std::pow(std::abs(p[i]), 3.0) - 0.1, 1e-6);
}

TEST(Tabulate, CoercivityReport) {
    const auto tol = ErgodicOptions{}.scheme.tolerance;
    for (double a : {0.0, 1.0}) {
        const auto cell = ProblemRegistry::make("cell_1d", {{"a", a}});
        const auto H = tabulate_effective(cell, linspace(-3.0, 3.0, 13), {0.0, 0.0}, torus(1, 128));
        const auto& rep = H.coercivity;
        ASSERT_EQ(rep.lower_bound.size(), 13u);
        for (std::size_t i = 0; i < 13; ++i) {
            EXPECT_NEAR(rep.lower_bound[i], std::pow(std::abs(H.slopes()[i]), 3.0) - 1.0, 1e-12);
            EXPECT_GE(H.values()[i], rep.lower_bound[i] - 2.0 * tol);
        }
        EXPECT_TRUE(rep.lower_bound_ok);
        EXPECT_TRUE(rep.growing);
        EXPECT_TRUE(rep.growth_ok);
        EXPECT_GT(rep.growth_ratio, 0.9);
        EXPECT_TRUE(H.failures.empty());
    }
}

TEST(Tabulate, FailedSolvesAreRecorded) {
    TabulateOptions o;
    o.ergodic.lambdas = {0.5};
    const auto cell = ProblemRegistry::make("cell_1d");
    EXPECT_THROW(tabulate_effective(cell, {0.0, 1.0}, {0.0, 0.0}, torus(1, 32), o), SolverError);
    EXPECT_THROW(tabulate_effective(cell, {1.0, 0.0}, {0.0, 0.0}, torus(1, 32)), DomainError);
}

TEST(SolveHomogenized, CubicTableReproducesTheDirectSolve) {
    const auto spec = ProblemRegistry::make("oscillatory_1d", {{"v1", 0.0}});
    const auto g = line(201);
    const auto direct = solve_stationary(spec, g, {}, 0.0);
    ASSERT_TRUE(direct.converged);
    const auto hom = solve_homogenized(cubic_table(), spec.boundary.g, g);
    EXPECT_LT(hom.residual, 1e-10);
    for (std::size_t k = 0; k < g->size(); ++k) EXPECT_NEAR(hom.solution[k], direct.solution[k], 1e-6);
}

TEST(SolveHomogenized, ZeroDataAndFlatMinimumGiveZero) {
    const auto V = ProblemRegistry::potential_1d(0.0, 1.0);
    const auto H = EffectiveHamiltonian::from_function([&](double p) { return oracle_effective_1d(V, 3.0, p); },
                                                       linspace(-2.0, 2.0, 41));
    const auto hom = solve_homogenized(H, ScalarField::constant(0.0), line(101));
    EXPECT_LT(hom.solution.sup_norm(), 1e-12);
}

TEST(SolveHomogenized, OrderedDataGiveOrderedSolutions) {
    const auto H = cubic_table(3.0, 601, 0.5);
    const auto g = line(81);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-2.0, 1.0), gap(0.0, 0.5);
    for (int trial = 0; trial < 25; ++trial) {
        const double c = U(rng), s = 0.5 * U(rng), d = gap(rng);
        const auto lo = ScalarField::affine(c, {s, 0.0});
        const auto hi = ScalarField::affine(c + d, {s + 0.5 * d * (gap(rng) - 0.25), 0.0});
        const auto u1 = solve_homogenized(H, lo, g).solution;
        const auto u2 = solve_homogenized(H, hi, g).solution;
        for (std::size_t k = 0; k < g->size(); ++k) EXPECT_LE(u1[k], u2[k] + 1e-10);
    }
}

TEST(SolveHomogenized, ShortTableIsExtendedByDoubling) {
    const auto spec = ProblemRegistry::make("oscillatory_1d", {{"v1", 0.0}});
    const auto g = line(101);
    const auto full = solve_homogenized(cubic_table(), spec.boundary.g, g);
    auto cube = [](double p) { return std::pow(std::abs(p), 3.0); };
    const auto short_table = EffectiveHamiltonian::from_function(cube, linspace(-0.125, 0.125, 11));
    const auto ext = solve_homogenized(short_table, spec.boundary.g, g, {}, cube);
    EXPECT_GT(ext.extensions, 0);
    EXPECT_GE(ext.table.p_max(), 0.5);
    EXPECT_LT((ext.solution.values() - full.solution.values()).cwiseAbs().maxCoeff(), 1e-2);
    const auto again = solve_homogenized(ext.table, spec.boundary.g, g);
    EXPECT_EQ(again.extensions, 0);
    EXPECT_LT((again.solution.values() - ext.solution.values()).cwiseAbs().maxCoeff(), 1e-12);

    EXPECT_THROW(solve_homogenized(short_table, spec.boundary.g, g), SolverError);
    HomogenizedOptions capped;
    capped.slope_cap = 0.2;
    EXPECT_THROW(solve_homogenized(short_table, spec.boundary.g, g, capped, cube), SolverError);
}

TEST(SolveHomogenized, LosesDataWhereTheEquationWins) {
    const auto H = cubic_table(3.0, 601, 1.0);
    const auto hom = solve_homogenized(H, ScalarField::constant(5.0), line(101));
    EXPECT_NEAR(hom.solution[50], 1.0, 1e-9);
    EXPECT_LE(hom.solution.values().maxCoeff(), 5.0);
    EXPECT_EQ(hom.data_active.front(), 0);
    EXPECT_EQ(hom.data_active.back(), 0);
}

TEST(SolveHomogenized, RejectsUnsupportedInputs) {
    const auto H = cubic_table(1.0, 21);
    const auto box = std::make_shared<const Grid>(Grid::uniform(Domain::box({-1.0, -1.0}, {1.0, 1.0}), 16));
    EXPECT_THROW(solve_homogenized(H, ScalarField::constant(0.0), box), ConfigError);
    EXPECT_THROW(solve_homogenized(H, ScalarField::constant(0.0), torus(1, 32)), ConfigError);
    const EffectiveHamiltonian increasing({-1.0, 0.0, 1.0}, {-1.0, 0.0, 1.0});
    EXPECT_THROW(solve_homogenized(increasing, ScalarField::constant(0.0), line(32)), SolverError);
}

TEST(EpsilonSweep, FirstOrderErrorsDecrease) {
    const auto V = ProblemRegistry::potential_1d(0.0, 1.0);
    const auto H = EffectiveHamiltonian::from_function([&](double p) { return oracle_effective_1d(V, 3.0, p); },
                                                       linspace(-3.0, 3.0, 601));
    auto family = [](double e) { return ProblemRegistry::make("oscillatory_1d", {{"eps", e}}); };
    const auto r = epsilon_sweep(family, {0.25, 0.125, 0.0625}, H);
    EXPECT_EQ(r.variant, "first-order");
    ASSERT_EQ(r.errors.size(), 3u);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_LE(r.errors[i], 1.2 * r.errors[i - 1]);
    EXPECT_LT(r.errors.back(), 0.5 * r.errors.front());
    EXPECT_EQ(r.nodes, (std::vector<int>{257, 513, 1025}));
    for (double K : r.holder_constants) EXPECT_LE(K, 2.0 * r.holder_constants.front());
}

TEST(EpsilonSweep, YIndependentFamilyMatchesExactly) {
    auto family = [](double e) { return ProblemRegistry::make("oscillatory_1d", {{"eps", e}, {"v0", 0.3}, {"v1", 0.0}}); };
    const auto r = epsilon_sweep(family, {0.25, 0.125, 0.0625}, cubic_table(2.0, 8001, 0.3));
    for (double e : r.errors) EXPECT_LT(e, 1e-6);
}

TEST(EpsilonSweep, DiffusiveVariantUsesCellTable) {
    const auto cell = ProblemRegistry::make("cell_1d", {{"a", 1.0}});
    const auto H = tabulate_effective(cell, linspace(-3.0, 3.0, 61), {0.0, 0.0}, torus(1, 128));
    auto family = [](double e) { return ProblemRegistry::make("oscillatory_1d", {{"eps", e}, {"a", 1.0}}); };
    const auto r = epsilon_sweep(family, {0.25, 0.125, 0.0625}, H);
    EXPECT_EQ(r.variant, "eps-diffusion");
    for (std::size_t i = 1; i < 3; ++i) EXPECT_LE(r.errors[i], 1.2 * r.errors[i - 1]);
}

TEST(EpsilonSweep, RejectsUnderResolvedAndUnorderedLists) {
    auto family = [](double e) { return ProblemRegistry::make("oscillatory_1d", {{"eps", e}}); };
    const auto H = cubic_table(2.0, 41);
    EpsSweepOptions coarse;
    coarse.nodes_per_period = 8;
    EXPECT_THROW(epsilon_sweep(family, {0.25}, H, coarse), ConfigError);
    EXPECT_THROW(epsilon_sweep(family, {0.125, 0.25}, H), ConfigError);
    EXPECT_THROW(epsilon_sweep(family, {}, H), ConfigError);
    auto planar = [](double) { return ProblemRegistry::make("box_2d"); };
    EXPECT_THROW(epsilon_sweep(planar, {0.25}, H), ConfigError);
}

TEST(EpsilonSweep, CsvExport) {
    auto family = [](double e) { return ProblemRegistry::make("oscillatory_1d", {{"eps", e}, {"v1", 0.0}}); };
    const auto r = epsilon_sweep(family, {0.5, 0.25}, cubic_table(2.0, 401));
    const auto path = std::filesystem::temp_directory_path() / "sqhj_eps.csv";
    write_eps_sweep_csv(r, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "eps,error_sup,nodes,holder_constant");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2);
    std::filesystem::remove(path);
}
