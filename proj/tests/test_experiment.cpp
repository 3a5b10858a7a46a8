#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "sgghmc/config.hpp"
#include "sgghmc/experiment.hpp"

#include "gaussian_cov_oracle.hpp"

using namespace sgghmc;

namespace {

ExperimentConfig contraction_config() {
    ExperimentConfig c = build_config(parse_config_text(
        "target = gaussian\nK = 6\nh = 0.005\neta = 0.5\nseed = 11\n"
        "ensemble = 400\nsteps = 60\nx0 = 1\ny0 = 0\n"));
    return c;
}

}  // namespace

TEST_CASE("r_star can be overridden within its admissible range", "[experiment]") {
    ExperimentConfig c = contraction_config();
    c.ensemble = 20;
    c.steps = 5;
    double t_hat = c.params.T() * std::sqrt(1.5 / 0.5);
    c.r_star = 0.5 / (t_hat * t_hat);
    ContractionResult res = run_contraction(c);
    CHECK(res.aggregates.size() == 6);
    c.r_star = 2.0 / (t_hat * t_hat);
    CHECK_THROWS_AS(run_contraction(c), std::invalid_argument);
}

TEST_CASE("contraction run with identical starts stays at zero", "[experiment]") {
    ExperimentConfig c = contraction_config();
    c.y0 = c.x0;
    c.w0 = c.v0;
    c.ensemble = 50;
    c.steps = 10;
    ContractionResult res = run_contraction(c);
    for (const auto& agg : res.aggregates) {
        CHECK(agg.mean_d == 0.0);
        CHECK(agg.mean_rho == 0.0);
    }
}

TEST_CASE("contraction run decays and respects the per-step bound", "[experiment]") {
    ExperimentConfig c = contraction_config();
    ContractionResult res = run_contraction(c);
    REQUIRE(res.admissibility.pass());
    CHECK(res.aggregates.front().mean_d == Catch::Approx(twisted_distance(
              {Vec{1.0}, Vec{0.0}}, {Vec{0.0}, Vec{0.0}}, res.constants)));
    CHECK(res.aggregates.back().mean_d < res.aggregates.front().mean_d);
    CHECK(res.fitted_rate_dhat >= res.constants.c);
    CHECK(res.rho_bound_violations == 0);
    CHECK(res.envelope_ok);
}

TEST_CASE("branch rule follows the separation", "[experiment]") {
    SECTION("far-apart pairs refresh synchronously") {
        ExperimentConfig c = build_config(parse_config_text(
            "target = gaussian\nK = 1\nh = 0.01\neta = 0\nseed = 13\n"
            "ensemble = 50\nsteps = 3\nx0 = 2\ny0 = 0\n"));
        ContractionResult res = run_contraction(c);
        CHECK(res.aggregates[1].frac_reflection == 0.0);
    }
    SECTION("pairs below R_hat reflect, and the mirror kicks cannot escape") {
        ExperimentConfig c = build_config(parse_config_text(
            "target = gaussian\nK = 1\nh = 0.005\neta = 0\nseed = 14\n"
            "ensemble = 300\nsteps = 200\nx0 = 0.05\ny0 = 0\n"));
        ContractionResult res = run_contraction(c);
        CHECK(res.aggregates[1].frac_reflection == 1.0);
        CHECK(res.aggregates.back().frac_reflection > 0.95);
    }
}

TEST_CASE("serial and parallel contraction runs are byte-identical", "[experiment]") {
    ExperimentConfig c = contraction_config();
    c.ensemble = 101;
    c.steps = 25;
    c.records_output = "run";  // request record CSV in memory
    c.threads = 1;
    ContractionResult serial = run_contraction(c);
    c.threads = 4;
    ContractionResult parallel = run_contraction(c);
    CHECK(serial.aggregates_csv == parallel.aggregates_csv);
    CHECK(serial.records_csv == parallel.records_csv);
    CHECK(!serial.records_csv.empty());
    CHECK(serial.records_csv.substr(0, serial.records_csv.find('\n')) ==
          "step,member,twisted_dist,rho_star,mbar_sq,branch,observable");
    CHECK(serial.aggregates_csv.substr(0, serial.aggregates_csv.find('\n')) ==
          "step,mean_d,var_d,mean_rho,var_rho,frac_reflection");
}

TEST_CASE("split ensembles match the merged ensemble in distribution", "[experiment]") {
    // final x1 observables of two seeded half-ensembles vs one full ensemble
    ExperimentConfig c = build_config(parse_config_text(
        "target = gaussian\nK = 1\nh = 0.05\neta = 0.3\nseed = 5\n"
        "ensemble = 4000\nsteps = 40\nx0 = 0\n"));
    ForceField field = make_field(c);

    auto final_positions = [&](std::uint64_t seed, long members) {
        std::vector<double> out(members);
        for (long m = 0; m < members; ++m) {
            ChainState s{Vec(field.dim, 0.0), Vec(field.dim, 0.0)};
            for (long step = 1; step <= c.steps; ++step)
                s = ghmc_iteration(s, c.params, field,
                                   DrawContext{seed, static_cast<std::uint32_t>(m),
                                               static_cast<std::uint32_t>(step)});
            out[m] = s.x[0];
        }
        return out;
    };
    std::vector<double> full = final_positions(5, 4000);
    std::vector<double> half1 = final_positions(6, 2000);
    std::vector<double> half2 = final_positions(7, 2000);
    half1.insert(half1.end(), half2.begin(), half2.end());
    double d = ks_two_sample(full, half1);
    double crit = ks_critical(0.001, ks_two_sample_n_effective(4000, 4000));
    CHECK(d <= crit);
}

TEST_CASE("concentration run at r = 0 and bound shape", "[experiment]") {
    ExperimentConfig c = build_config(parse_config_text(
        "target = gaussian\nK = 1\nh = 0.01\neta = 0.5\nseed = 21\n"
        "ensemble = 400\nsteps = 10\n"));
    ConcentrationResult res = run_concentration(c, 1, 50, {0.0, 0.05, 0.2});
    REQUIRE(res.rows.size() == 3);
    // at r = 0 the bound is 1 and roughly half the centered averages exceed
    CHECK(res.rows[0].bound == Catch::Approx(1.0));
    CHECK(res.rows[0].empirical > 0.3);
    CHECK(res.rows[0].empirical < 0.7);
    CHECK(res.all_within_bound());
    SECTION("N0 = 0 is rejected when eta != 0") {
        CHECK_THROWS_AS(run_concentration(c, 0, 50, {0.1}), std::invalid_argument);
    }
}

TEST_CASE("doubling N shrinks the exceedance at fixed r", "[experiment]") {
    // long leg so the chain decorrelates within a few iterations
    ExperimentConfig c = build_config(parse_config_text(
        "target = gaussian\nK = 20\nh = 0.25\neta = 0.0\nseed = 22\n"
        "ensemble = 2000\nsteps = 10\n"));
    ConcentrationResult small = run_concentration(c, 1, 25, {0.15});
    ConcentrationResult big = run_concentration(c, 1, 100, {0.15});
    CHECK(big.rows[0].empirical < small.rows[0].empirical);
}

TEST_CASE("bias scan on the gaussian reproduces the exact covariance fixed point",
          "[experiment][statistical]") {
    // cross-check of the control-variate estimator against the closed-form
    // stationary variance of the per-coordinate linear chain, both integrators
    for (int u : {0, 1}) {
        std::string text =
            "target = gaussian\nK = 2\nh = 0.08\neta = 0.5\nseed = 31\n"
            "ensemble = 64\nsteps = 4000\nburn_in = 500\nx0 = 0\nu = " +
            std::to_string(u) + "\n";
        ExperimentConfig c = build_config(parse_config_text(text));
        BiasScanResult res = run_bias_scan(c, {0.08}, true);
        REQUIRE(res.points.size() == 1);
        double exact_bias =
            sgghmc_test::exact_gaussian_stationary_variance(0.08, 2, 0.5, u) - 1.0;
        INFO("u = " << u << " estimated " << res.points[0].bias << " exact " << exact_bias
                    << " se " << res.points[0].stderr_bias);
        CHECK(std::abs(res.points[0].bias - exact_bias) <=
              4.0 * res.points[0].stderr_bias + 1e-4);
    }
}

TEST_CASE("quadrature reference matches frozen and exact moments", "[experiment]") {
    // scipy-frozen value of E x^2 under exp(-U) for the 1d double well
    ForceField dw = make_double_well_target(1, 1.0, 1.0);
    CHECK(detail::quadrature_second_moment(dw, 1) ==
          Catch::Approx(1.0417972965116968).epsilon(1e-9));
    // the radial formula reduces to the exact gaussian moments in d > 1
    CHECK(detail::quadrature_second_moment(make_gaussian_target(2, 1.0), 2) ==
          Catch::Approx(2.0).epsilon(1e-9));
    CHECK(detail::quadrature_second_moment(make_gaussian_target(3, 2.0), 3) ==
          Catch::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("bias scan on the double well tracks the quadrature reference",
          "[experiment][statistical]") {
    ExperimentConfig c = build_config(parse_config_text(
        "target = double_well\na = 1\nscale = 1\nK = 2\nh = 0.05\neta = 0.5\nseed = 32\n"
        "ensemble = 64\nsteps = 4000\nburn_in = 500\nx0 = 1\n"));
    BiasScanResult res = run_bias_scan(c, {0.05}, true);
    REQUIRE(res.points.size() == 1);
    CHECK(res.points[0].reference == Catch::Approx(1.0417972965116968).epsilon(1e-9));
    INFO("moment " << res.points[0].moment << " reference " << res.points[0].reference);
    CHECK(std::abs(res.points[0].bias) <= 4.0 * res.points[0].stderr_bias + 0.03);
}

TEST_CASE("bias scan rejects step sizes that do not divide T", "[experiment]") {
    ExperimentConfig c = build_config(parse_config_text(
        "target = gaussian\nK = 2\nh = 0.08\neta = 0.5\nseed = 33\nensemble = 4\nsteps = 20\n"));
    CHECK_THROWS_AS(run_bias_scan(c, {0.07}, true), std::invalid_argument);
}

TEST_CASE("sg bias vanishes at full batch", "[experiment][statistical]") {
    ExperimentConfig c = build_config(parse_config_text(
        "target = minibatch_gaussian_mixture\ncomponents = 4\noffset = 1\nK = 1\nh = 0.05\n"
        "eta = 0.3\nseed = 41\nensemble = 64\nsteps = 2000\nburn_in = 200\nhorizon = 5\n"));
    SgBiasResult res = run_sg_bias(c, {4});
    REQUIRE(res.points.size() == 1);
    CHECK(std::abs(res.points[0].extra_bias) <= 4.0 * res.points[0].stderr_extra + 1e-9);
    CHECK(res.points[0].gap_short <= res.points[0].bound_short);
}

TEST_CASE("sg bias decreases in p and short gaps stay below the bound",
          "[experiment][statistical]") {
    ExperimentConfig c = build_config(parse_config_text(
        "target = minibatch_gaussian_mixture\ncomponents = 4\noffset = 2\nK = 1\nh = 0.15\n"
        "eta = 0.3\nseed = 42\nensemble = 256\nsteps = 10000\nburn_in = 500\nhorizon = 10\n"
        "threads = 2\n"));
    SgBiasResult res = run_sg_bias(c, {1, 2, 4});
    REQUIRE(res.points.size() == 3);
    for (const auto& pt : res.points) CHECK(pt.gap_short <= pt.bound_short);
    // monotone within 2 sigma of the paired standard errors
    for (int i = 0; i + 1 < 3; ++i) {
        double se = std::hypot(res.points[i].stderr_extra, res.points[i + 1].stderr_extra);
        CHECK(res.points[i].extra_bias >= res.points[i + 1].extra_bias - 2.0 * se);
    }
    // the p = 1 inflation is a real positive effect at these parameters
    CHECK(res.points[0].extra_bias > 2.0 * res.points[0].stderr_extra);
}
