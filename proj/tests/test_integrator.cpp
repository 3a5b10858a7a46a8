#include <catch2/catch_amalgamated.hpp>
#include <array>
#include <cmath>

#include "sgghmc/algo.hpp"
#include "sgghmc/model.hpp"

using namespace sgghmc;

namespace {

ForceField zero_field(int dim) {
    ForceField f;
    f.dim = dim;
    f.m = 1e-12;
    f.L = 1e-9;
    f.R = 0.0;
    f.eval = [](const Vec& x, const GradientIndex&) { return Vec(x.size(), 0.0); };
    f.potential = [](const Vec&) { return 0.0; };
    return f;
}

LegRandomness deterministic_leg(int K, double midpoint = 0.5) {
    LegRandomness r;
    r.thetas.assign(K, GradientIndex::full());
    r.theta_primes.assign(K, GradientIndex::full());
    r.midpoints.assign(K, midpoint);
    return r;
}

// 2x2 linear map of one Verlet sub-step on the quadratic target, applied
// per coordinate; the K-step leg is its K-th power.
std::array<double, 4> verlet_matrix_power(double curvature, double h, int K) {
    double k = curvature;
    std::array<double, 4> M = {1.0 - k * h * h / 2.0, h,
                               k * k * h * h * h / 4.0 - k * h, 1.0 - k * h * h / 2.0};
    std::array<double, 4> P = {1.0, 0.0, 0.0, 1.0};
    for (int i = 0; i < K; ++i) {
        std::array<double, 4> N = {P[0] * M[0] + P[1] * M[2], P[0] * M[1] + P[1] * M[3],
                                   P[2] * M[0] + P[3] * M[2], P[2] * M[1] + P[3] * M[3]};
        P = N;
    }
    return P;
}

}  // namespace

TEST_CASE("velocity refresh", "[integrator]") {
    AlgoParams p{1, 0.1, 0.0, 0};
    ChainState s{Vec{1.0, 2.0}, Vec{3.0, 4.0}};
    Vec g{0.5, -0.5};
    ChainState out = velocity_refresh(s, p, g);
    CHECK(out.x == s.x);
    CHECK(out.v == g);  // eta = 0: full refresh

    p.eta = 0.99;
    out = velocity_refresh(s, p, Vec{0.0, 0.0});
    CHECK(out.v[0] == Catch::Approx(0.99 * 3.0));

    p.eta = 0.6;
    out = velocity_refresh({Vec{0.0}, Vec{1.0}}, AlgoParams{1, 0.1, 0.6, 0}, Vec{0.0});
    CHECK(out.v[0] == Catch::Approx(0.6));
    ChainState two = velocity_refresh({Vec{0.0, 0.0}, Vec{1.0, 0.0}},
                                      AlgoParams{1, 0.1, 0.6, 0}, Vec{0.0, 1.0});
    CHECK(two.v[0] == Catch::Approx(0.6));
    CHECK(two.v[1] == Catch::Approx(0.8));  // sqrt(1 - 0.36)

    CHECK_THROWS_AS(velocity_refresh(s, p, Vec{1.0}), std::invalid_argument);
}

TEST_CASE("verlet step", "[integrator]") {
    SECTION("free flight") {
        ForceField f = zero_field(2);
        ChainState s{Vec{1.0, -1.0}, Vec{2.0, 0.5}};
        ChainState out = verlet_step(s, 0.1, f, {}, {});
        CHECK(out.x[0] == Catch::Approx(1.2));
        CHECK(out.v == s.v);
    }
    SECTION("hand-evaluated kick-drift-kick on the quadratic") {
        ForceField f = make_gaussian_target(1, 1.0);
        ChainState out = verlet_step({Vec{1.0}, Vec{0.0}}, 0.1, f, {}, {});
        CHECK(out.x[0] == Catch::Approx(0.995));
        CHECK(out.v[0] == Catch::Approx(-0.09975));
    }
    SECTION("critical point is a fixed point") {
        ForceField f = make_double_well_target(1, 1.0, 1.0);
        ChainState out = verlet_step({Vec{0.0}, Vec{0.0}}, 0.05, f, {}, {});
        CHECK(out.x[0] == 0.0);
        CHECK(out.v[0] == 0.0);
    }
}

TEST_CASE("randomized midpoint step", "[integrator]") {
    SECTION("free flight") {
        ForceField f = zero_field(1);
        ChainState out = randomized_midpoint_step({Vec{1.0}, Vec{2.0}}, 0.1, f, {}, 0.3);
        CHECK(out.x[0] == Catch::Approx(1.2));
        CHECK(out.v[0] == Catch::Approx(2.0));
    }
    SECTION("hand evaluation on the quadratic") {
        ForceField f = make_gaussian_target(1, 1.0);
        ChainState out = randomized_midpoint_step({Vec{1.0}, Vec{0.0}}, 0.1, f, {}, 0.5);
        CHECK(out.x[0] == Catch::Approx(0.995));
        CHECK(out.v[0] == Catch::Approx(-0.1));
    }
    SECTION("fixed point") {
        ForceField f = make_double_well_target(1, 1.0, 1.0);
        ChainState out = randomized_midpoint_step({Vec{0.0}, Vec{0.0}}, 0.1, f, {}, 0.7);
        CHECK(out.x[0] == 0.0);
        CHECK(out.v[0] == 0.0);
    }
}

TEST_CASE("hamiltonian leg", "[integrator]") {
    SECTION("randomness length must match K") {
        ForceField f = make_gaussian_target(1, 1.0);
        AlgoParams p{3, 0.1, 0.0, 0};
        CHECK_THROWS_AS(hamiltonian_leg({Vec{1.0}, Vec{0.0}}, p, f, deterministic_leg(2)),
                        std::invalid_argument);
    }
    SECTION("K = 1 reduces to a single step") {
        ForceField f = make_gaussian_target(1, 1.0);
        AlgoParams p{1, 0.1, 0.0, 0};
        ChainState leg = hamiltonian_leg({Vec{1.0}, Vec{0.0}}, p, f, deterministic_leg(1));
        ChainState step = verlet_step({Vec{1.0}, Vec{0.0}}, 0.1, f, {}, {});
        CHECK(leg.x[0] == step.x[0]);
        CHECK(leg.v[0] == step.v[0]);
    }
    SECTION("free flight over the full leg is exact") {
        ForceField f = zero_field(2);
        AlgoParams p{3, 0.1, 0.0, 0};
        ChainState s{Vec{1.0, 0.0}, Vec{-1.0, 2.0}};
        for (int u : {0, 1}) {
            p.u = u;
            ChainState out = hamiltonian_leg(s, p, f, deterministic_leg(3));
            CHECK(std::abs(out.x[0] - (1.0 - 0.3)) <= 1e-12);
            CHECK(std::abs(out.x[1] - 0.6) <= 1e-12);
            CHECK(out.v[0] == -1.0);
            CHECK(out.v[1] == 2.0);
        }
    }
    SECTION("quadratic-target leg matches the matrix-power oracle") {
        ForceField f = make_gaussian_target(2, 1.7);
        AlgoParams p{5, 0.05, 0.0, 0};
        ChainState s{Vec{1.0, -0.4}, Vec{0.3, 0.9}};
        ChainState out = hamiltonian_leg(s, p, f, deterministic_leg(5));
        auto M = verlet_matrix_power(1.7, 0.05, 5);
        for (int i = 0; i < 2; ++i) {
            double x = M[0] * s.x[i] + M[1] * s.v[i];
            double v = M[2] * s.x[i] + M[3] * s.v[i];
            CHECK(out.x[i] == Catch::Approx(x).epsilon(1e-10));
            CHECK(out.v[i] == Catch::Approx(v).epsilon(1e-10));
        }
    }
    SECTION("deterministic Verlet leg is time reversible on a conservative field") {
        ForceField f = make_double_well_target(2, 1.0, 1.0);
        AlgoParams p{4, 0.01, 0.0, 0};
        ChainState s{Vec{0.4, -0.2}, Vec{0.3, 0.1}};
        ChainState fwd = hamiltonian_leg(s, p, f, deterministic_leg(4));
        ChainState rev = hamiltonian_leg({fwd.x, -1.0 * fwd.v}, p, f, deterministic_leg(4));
        CHECK(std::abs(rev.x[0] - s.x[0]) < 1e-9);
        CHECK(std::abs(rev.x[1] - s.x[1]) < 1e-9);
        CHECK(std::abs(rev.v[0] + s.v[0]) < 1e-9);
        CHECK(std::abs(rev.v[1] + s.v[1]) < 1e-9);
    }
}

TEST_CASE("ghmc iteration", "[integrator]") {
    SECTION("eta = 0, K = 1, zero force is a Gaussian random walk") {
        ForceField f = zero_field(1);
        AlgoParams p{1, 0.25, 0.0, 0};
        DrawContext ctx{9, 4, 11};
        ChainState out = ghmc_iteration({Vec{2.0}, Vec{5.0}}, p, f, ctx);
        double g = draw_refresh_normal(ctx, 1, 0)[0];
        CHECK(out.v[0] == g);
        CHECK(out.x[0] == Catch::Approx(2.0 + 0.25 * g));
    }
    SECTION("replay with the same address is bit-identical") {
        ForceField f = make_minibatch_gaussian_mixture(2, 1.0, 1.0, 4, 2);
        AlgoParams p{3, 0.05, 0.5, 1};
        ChainState s{Vec{0.5, 0.2}, Vec{0.0, -0.3}};
        DrawContext ctx{123456, 17, 42};
        ChainState a = ghmc_iteration(s, p, f, ctx);
        ChainState b = ghmc_iteration(s, p, f, ctx);
        CHECK(a.x == b.x);
        CHECK(a.v == b.v);
    }
    SECTION("verlet and midpoint runs with one seed share refresh draws") {
        ForceField f = make_gaussian_target(1, 1.0);
        AlgoParams verlet{2, 0.05, 0.5, 0};
        AlgoParams midpoint{2, 0.05, 0.5, 1};
        DrawContext ctx{77, 0, 1};
        Vec g_before = draw_refresh_normal(ctx, f.dim, f.batch());
        ghmc_iteration({Vec{1.0}, Vec{0.0}}, verlet, f, ctx);
        ghmc_iteration({Vec{1.0}, Vec{0.0}}, midpoint, f, ctx);
        Vec g_after = draw_refresh_normal(ctx, f.dim, f.batch());
        CHECK(g_before == g_after);  // counter addressing leaves draws in place
    }
}
