#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pertsde/picard.hpp"
#include "pertsde/stepper.hpp"

using namespace pertsde;

namespace {

const Coefficient kOne = presets::constant(1.0);
const Coefficient kZero = presets::constant(0.0);

SamplePath random_driver(std::mt19937_64& rng, std::size_t n, double start) {
    std::normal_distribution<double> z(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> d(n + 1);
    d[0] = start;
    for (std::size_t k = 1; k <= n; ++k) d[k] = d[k - 1] + z(rng);
    return SamplePath(TimeGrid(1.0, n), std::move(d));
}

double sup_diff(const SamplePath& a, const SamplePath& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

SamplePath scaled(const SamplePath& p, double c) {
    std::vector<double> v(p.values().begin(), p.values().end());
    for (double& x : v) x *= c;
    return SamplePath(p.grid(), std::move(v));
}

}  // namespace

TEST(CoupledSolve, BetaZeroIsScaledRunningMax) {
    std::mt19937_64 rng(1);
    const SamplePath d = random_driver(rng, 256, 0.3);
    const CoupledSolution s = coupled_max_min_solve_detailed(d, 0.4, 0.0);
    const SamplePath rmax = running_max(d);
    for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(s.solution.max[k], rmax[k] / 0.6, 1e-14);
    EXPECT_LE(s.iterations, 2u);
}

TEST(CoupledSolve, UnperturbedReturnsDriver) {
    std::mt19937_64 rng(2);
    const SamplePath d = random_driver(rng, 128, -0.2);
    const CoupledSolution s = coupled_max_min_solve_detailed(d, 0.0, 0.0);
    EXPECT_EQ(s.solution.x, d);
    EXPECT_EQ(s.iterations, 0u);
}

TEST(CoupledSolve, MatchesStepperOnRandomDrivers) {
    std::mt19937_64 rng(3);
    for (auto [alpha, beta] : {std::pair{0.25, 0.25}, std::pair{0.4, -0.8}, std::pair{0.1, 0.6}}) {
        for (int trial = 0; trial < 200; ++trial) {
            const SamplePath d = random_driver(rng, 256, 0.5);
            const auto whole = coupled_max_min_solve(d, alpha, beta);
            const auto stepped = step_along_driver(d, alpha, beta);
            ASSERT_LE(sup_diff(whole.x, stepped.x), 1e-10) << alpha << "," << beta;
            ASSERT_LE(sup_diff(whole.max, stepped.max), 1e-10);
            ASSERT_LE(sup_diff(whole.min, stepped.min), 1e-10);
        }
    }
}

TEST(CoupledSolve, IdentityHoldsNodeWise) {
    std::mt19937_64 rng(4);
    const SamplePath d = random_driver(rng, 512, 1.0);
    const auto s = coupled_max_min_solve(d, 0.3, 0.4);
    const SamplePath rmax = running_max(s.x);
    const SamplePath rmin = running_min(s.x);
    for (std::size_t k = 0; k < d.size(); ++k) {
        EXPECT_NEAR(s.x[k], d[k] + 0.3 * s.max[k] + 0.4 * s.min[k], 1e-12);
        EXPECT_EQ(s.max[k], rmax[k]);
        EXPECT_EQ(s.min[k], rmin[k]);
    }
}

TEST(CoupledSolve, GeometricRateWithinContractionFactor) {
    std::mt19937_64 rng(5);
    for (auto [alpha, beta] : {std::pair{0.25, 0.25}, std::pair{0.4, -0.8}, std::pair{0.1, 0.6}, std::pair{0.45, 0.45}}) {
        const double kappa = contraction_factor(alpha, beta);
        for (int trial = 0; trial < 20; ++trial) {
            const CoupledSolution s =
                coupled_max_min_solve_detailed(random_driver(rng, 256, 0.2), alpha, beta, {.tol = 1e-14, .max_iter = 500});
            for (std::size_t j = 1; j < s.sup_changes.size(); ++j) {
                if (s.sup_changes[j - 1] < 1e-11) break;
                ASSERT_LE(s.sup_changes[j] / s.sup_changes[j - 1], kappa + 0.05) << alpha << "," << beta;
            }
        }
    }
}

TEST(CoupledSolve, InitializationDoesNotChangeTheSolution) {
    std::mt19937_64 rng(6);
    constexpr double tol = 1e-12;
    for (int trial = 0; trial < 50; ++trial) {
        const SamplePath d = random_driver(rng, 256, 0.7);
        const auto a = coupled_max_min_solve_detailed(d, 0.3, 0.5, {.tol = tol, .init = MinInit::Zero});
        const auto b = coupled_max_min_solve_detailed(d, 0.3, 0.5, {.tol = tol, .init = MinInit::ScaledRunningMin});
        ASSERT_LE(sup_diff(a.solution.x, b.solution.x), 2 * tol);
    }
}

TEST(CoupledSolve, PositivelyHomogeneous) {
    std::mt19937_64 rng(7);
    const SamplePath d = random_driver(rng, 256, 0.4);
    const auto base = coupled_max_min_solve(d, 0.25, 0.25);
    for (double lambda : {0.5, 2.0}) {
        // Powers of two scale every floating-point operation exactly.
        const auto s = coupled_max_min_solve(scaled(d, lambda), 0.25, 0.25);
        EXPECT_EQ(s.x, scaled(base.x, lambda));
        EXPECT_EQ(s.max, scaled(base.max, lambda));
        EXPECT_EQ(s.min, scaled(base.min, lambda));
    }
    const auto s3 = coupled_max_min_solve(scaled(d, 3.0), 0.25, 0.25);
    EXPECT_LE(sup_diff(s3.x, scaled(base.x, 3.0)), 1e-11);
}

TEST(CoupledSolve, RejectsInadmissibleAndReportsNonConvergence) {
    std::mt19937_64 rng(8);
    const SamplePath d = random_driver(rng, 64, 0.0);
    EXPECT_THROW(coupled_max_min_solve(d, 0.5, 0.5), std::invalid_argument);
    EXPECT_THROW(coupled_max_min_solve(d, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(coupled_max_min_solve_detailed(d, 0.45, 0.45, {.tol = 1e-15, .max_iter = 1}), ConvergenceError);
}

TEST(Picard, UnitNoiseNeedsOneCorrection) {
    const SamplePath w = generate_brownian(TimeGrid(1.0, 512), 9);
    const ProblemSpec spec = ProblemSpec::doubly(0.25, 0.25, 1.0, kOne, kZero);
    const PicardReport r = picard_solve(spec, w);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.sup_deltas.size(), 2u);
    std::vector<double> d(w.values().begin(), w.values().end());
    for (double& v : d) v += 1.0;
    const auto direct = coupled_max_min_solve(SamplePath(w.grid(), d), 0.25, 0.25);
    EXPECT_LE(sup_diff(r.final.x, direct.x), 1e-12);
}

TEST(Picard, FactorialDecaySignature) {
    const ProblemSpec spec =
        ProblemSpec::doubly(0.25, 0.25, 1.0, presets::bounded_sine(0.5, 0.5), presets::affine(0.0, -0.5));
    for (std::uint64_t p = 0; p < 20; ++p) {
        const PicardReport r = picard_solve(spec, generate_brownian(TimeGrid(1.0, 1024), 10, p));
        ASSERT_TRUE(r.converged);
        EXPECT_LE(r.iterations, 25u);
        EXPECT_LE(r.sup_deltas.back(), r.tolerance);
        for (std::size_t j = 1; j < r.sup_deltas.size(); ++j) {
            // n * delta_n / delta_{n-1} stays bounded.
            EXPECT_LE(static_cast<double>(j) * r.sup_deltas[j] / r.sup_deltas[j - 1], 10.0);
        }
    }
}

TEST(Picard, ConvergedFlagMatchesLastDelta) {
    const ProblemSpec spec =
        ProblemSpec::doubly(0.25, 0.25, 1.0, presets::bounded_sine(0.5, 0.5), presets::affine(0.0, -0.5));
    const SamplePath w = generate_brownian(TimeGrid(1.0, 256), 11);
    const PicardReport capped = picard_solve(spec, w, {.tol = 1e-10, .max_iter = 3});
    EXPECT_FALSE(capped.converged);
    EXPECT_EQ(capped.sup_deltas.size(), 3u);
    EXPECT_GT(capped.sup_deltas.back(), capped.tolerance);
    const PicardReport full = picard_solve(spec, w);
    EXPECT_TRUE(full.converged);
    EXPECT_LE(full.sup_deltas.back(), full.tolerance);
}

TEST(Picard, AgreesWithStepperAcrossResolutions) {
    const ProblemSpec spec =
        ProblemSpec::doubly(0.25, 0.25, 1.0, presets::bounded_sine(0.5, 0.5), presets::affine(0.0, -0.5));
    for (std::size_t n : {256u, 512u, 1024u, 2048u}) {
        const double dt = 1.0 / static_cast<double>(n);
        for (std::uint64_t p = 0; p < 10; ++p) {
            const SamplePath w = generate_brownian(TimeGrid(1.0, n), 12, p);
            const double gap = sup_diff(picard_solve(spec, w).final.x, simulate(spec, w).x);
            EXPECT_LE(gap, std::pow(dt, 0.45)) << n;
            EXPECT_LE(gap, 1e-9) << n;
        }
    }
}

TEST(Picard, Preconditions) {
    const SamplePath w = generate_brownian(TimeGrid(1.0, 32), 13);
    EXPECT_THROW(picard_solve(ProblemSpec::max_perturbed(0.5, kOne, kZero), w), std::invalid_argument);
    EXPECT_THROW(picard_solve(ProblemSpec::doubly(0.5, 0.5, 1.0, kOne, kZero), w), std::invalid_argument);
    EXPECT_THROW(picard_solve(ProblemSpec::doubly(0.25, 0.25, 1.0, presets::piecewise(0.5, 1.5), kZero), w),
                 std::invalid_argument);
}
