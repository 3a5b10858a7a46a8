#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sgghmc/model.hpp"
#include "sgghmc/rng.hpp"
#include "sgghmc/stats.hpp"

using namespace sgghmc;

namespace {

Vec random_point(std::uint64_t seed, std::uint32_t idx, int dim, double span,
                 std::uint32_t base = 0) {
    Vec x(dim);
    DrawContext ctx{seed, idx, 0};
    for (int i = 0; i < dim; ++i) x[i] = span * ctx.normal(base + static_cast<std::uint32_t>(i));
    return x;
}

}  // namespace

TEST_CASE("gaussian target evaluates the linear drift with its constants", "[model]") {
    ForceField f = make_gaussian_target(2, 1.0);
    Vec b = f(Vec{1.0, 0.0});
    CHECK(b[0] == 1.0);
    CHECK(b[1] == 0.0);
    CHECK(f.m == 1.0);
    CHECK(f.L == 1.0);
    CHECK(f.R == 0.0);

    ForceField g = make_gaussian_target(1, 2.0);
    CHECK(g(Vec{3.0})[0] == 6.0);

    CHECK_THROWS_AS(make_gaussian_target(2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_gaussian_target(0, 1.0), std::invalid_argument);
}

TEST_CASE("double well has critical points at the origin and the wells", "[model]") {
    ForceField f = make_double_well_target(1, 1.0, 1.0);
    CHECK(f(Vec{0.0})[0] == 0.0);
    CHECK(std::abs(f(Vec{1.0})[0]) < 1e-15);
    CHECK_THROWS_AS(make_double_well_target(1, -1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_double_well_target(1, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("double well (m, L, R) match an exhaustive grid scan", "[model]") {
    // dim 1, a = 1, scale = 1, cap radius 3: recorded constants (2, 26, 1).
    ForceField f = make_double_well_target(1, 1.0, 1.0);
    CHECK(f.m == 2.0);
    CHECK(f.L == 26.0);
    CHECK(f.R == 1.0);

    // independent oracle: centered differences of b over a dense grid
    const double step = 1e-3, eps = 1e-6;
    double min_outside = 1e300, max_abs = 0.0;
    for (double x = -10.0; x <= 10.0; x += step) {
        double d = (f(Vec{x + eps})[0] - f(Vec{x - eps})[0]) / (2.0 * eps);
        max_abs = std::max(max_abs, std::abs(d));
        if (std::abs(x) >= f.R) min_outside = std::min(min_outside, d);
    }
    CHECK(min_outside >= f.m * (1.0 - 1e-4));
    CHECK(max_abs <= f.L * (1.0 + 1e-4));
    // both extremes are attained, so the constants are tight
    CHECK(min_outside <= f.m * (1.0 + 1e-4));
    CHECK(max_abs >= f.L * (1.0 - 1e-4));
}

TEST_CASE("minibatch target averages the selected components", "[model]") {
    // two components x+1 and x-1
    ForceField g1 = make_gaussian_target(1, 1.0);
    g1.eval = [](const Vec& x, const GradientIndex&) { return Vec{x[0] + 1.0}; };
    g1.potential = [](const Vec& x) { return 0.5 * x[0] * x[0] + x[0]; };
    ForceField g2 = make_gaussian_target(1, 1.0);
    g2.eval = [](const Vec& x, const GradientIndex&) { return Vec{x[0] - 1.0}; };
    g2.potential = [](const Vec& x) { return 0.5 * x[0] * x[0] - x[0]; };

    ForceField f = make_minibatch_target({g1, g2}, 2);
    CHECK(f(Vec{0.7}, GradientIndex::minibatch({0, 1}))[0] == Catch::Approx(0.7));
    CHECK(f(Vec{0.7}, GradientIndex::full())[0] == Catch::Approx(0.7));
    CHECK(f(Vec{0.7}, GradientIndex::minibatch({0}))[0] == Catch::Approx(1.7));

    // single-draw variance at any x is exactly 1 for these two components
    ForceField f1 = make_minibatch_target({g1, g2}, 1);
    CHECK(f1.stochastic->variance_bound == Catch::Approx(1.0).margin(1e-12));

    CHECK_THROWS_AS(make_minibatch_target({g1, g2}, 3), std::invalid_argument);
}

TEST_CASE("mixture helper reproduces the two-point example", "[model]") {
    ForceField f = make_minibatch_gaussian_mixture(1, 1.0, 1.0, 2, 1);
    CHECK(f.stochastic->variance_bound == Catch::Approx(1.0));
    CHECK(f(Vec{0.3}, GradientIndex::full())[0] == Catch::Approx(0.3));
}

TEST_CASE("minibatch draws are unbiased", "[model]") {
    ForceField f = make_minibatch_gaussian_mixture(2, 1.0, 1.5, 5, 2);
    SlotLayout layout{f.dim, f.batch()};
    const long draws = 100000;
    for (int trial = 0; trial < 10; ++trial) {
        Vec x = random_point(900 + trial, 0, 2, 3.0);
        Vec full = f(x, GradientIndex::full());
        std::vector<double> first_coord(draws);
        for (long i = 0; i < draws; ++i) {
            DrawContext ctx{77, static_cast<std::uint32_t>(trial),
                            static_cast<std::uint32_t>(i)};
            GradientIndex theta = f.draw_index(ctx, layout.theta(0, 0));
            first_coord[i] = f(x, theta)[0];
        }
        MeanVar mv = mean_var(first_coord);
        CHECK(std::abs(mv.mean - full[0]) <= 4.0 * mv.stderr_mean() + 1e-12);
    }
}

TEST_CASE("Lipschitz sweep stays below L", "[model][property]") {
    for (auto field : {make_double_well_target(2, 1.0, 1.0), make_gaussian_target(3, 2.5)}) {
        double worst = 0.0;
        for (long i = 0; i < 10000; ++i) {
            Vec x = random_point(31, static_cast<std::uint32_t>(i), field.dim, 4.0, 0);
            Vec y = random_point(32, static_cast<std::uint32_t>(i), field.dim, 4.0, 16);
            double dx = norm(x - y);
            if (dx == 0.0) continue;
            worst = std::max(worst, norm(field(x) - field(y)) / dx);
        }
        CHECK(worst <= field.L * (1.0 + 1e-9));
    }
}

TEST_CASE("outside-ball directional convexity stays above m", "[model][property]") {
    for (auto field : {make_double_well_target(1, 1.0, 1.0), make_double_well_target(3, 0.5, 2.0),
                       make_gaussian_target(2, 1.5)}) {
        double worst = 1e300;
        long tested = 0;
        for (long i = 0; tested < 10000 && i < 200000; ++i) {
            Vec x = random_point(41, static_cast<std::uint32_t>(i), field.dim, 5.0, 0);
            if (norm(x) < field.R) continue;
            Vec u = random_point(42, static_cast<std::uint32_t>(i), field.dim, 1.0, 16);
            double un = norm(u);
            if (un == 0.0) continue;
            u = (1.0 / un) * u;
            double eps = 1e-5 * (norm(x) + 1.0);
            Vec xs = x;
            axpy(eps, u, xs);
            // probe from x outward so the segment stays outside the ball
            if (norm(xs) < norm(x)) {
                for (auto& c : u) c = -c;
                xs = x;
                axpy(eps, u, xs);
            }
            ++tested;
            worst = std::min(worst, dot(u, field(xs) - field(x)) / eps);
        }
        REQUIRE(tested == 10000);
        CHECK(worst >= field.m * (1.0 - 1e-3));
    }
}
