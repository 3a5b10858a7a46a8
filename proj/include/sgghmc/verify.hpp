#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "coupling.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "special.hpp"
#include "stats.hpp"

namespace sgghmc {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace verify_detail {

// K_qhat sampler at the canonical r* = (1-eta)^2/(T^2(1-eta^2)), where
// K = T_hat |q_hat + G - G_hat|.
inline double sample_k(const Vec& q_hat, double t_hat, std::uint64_t seed, std::uint32_t idx) {
    int dim = static_cast<int>(q_hat.size());
    DrawContext ctx{seed, idx, 0};
    Vec g(dim);
    for (int i = 0; i < dim; ++i) g[i] = ctx.normal(static_cast<std::uint32_t>(i));
    double uni = ctx.uniform(static_cast<std::uint32_t>(dim));
    Vec partner = reflection_partner(g, q_hat, uni);
    Vec displaced = q_hat + (g - partner);
    return t_hat * norm(displaced);
}

}  // namespace verify_detail

// Monte Carlo second moment of K against the closed form, within 3 standard
// errors over a (|q_hat|, T, eta) grid.
inline CheckResult check_teos_mc(long samples, const std::vector<double>& qhat_grid,
                                 const std::vector<double>& t_grid,
                                 const std::vector<double>& eta_grid,
                                 std::uint64_t seed = 0x7e05u) {
    CheckResult res{"oracle-teos-second-moment", true, ""};
    std::ostringstream detail;
    int combo = 0;
    for (double qn : qhat_grid)
        for (double T : t_grid)
            for (double eta : eta_grid) {
                ++combo;
                double t_hat = T * std::sqrt((1.0 + eta) / (1.0 - eta));
                Vec q_hat(3, 0.0);
                q_hat[0] = qn;
                std::vector<double> k2(samples);
                for (long i = 0; i < samples; ++i) {
                    double k = verify_detail::sample_k(q_hat, t_hat,
                                                       seed + 131 * combo,
                                                       static_cast<std::uint32_t>(i));
                    k2[i] = k * k;
                }
                MeanVar mv = mean_var(k2);
                double exact = k_second_moment_exact(qn, T, eta);
                double gap = std::abs(mv.mean - exact);
                double tol = 3.0 * mv.stderr_mean() + 1e-12;
                if (gap > tol) {
                    res.pass = false;
                    detail << " violation at |q|=" << qn << " T=" << T << " eta=" << eta
                           << " gap=" << gap << " tol=" << tol << ";";
                }
            }
    res.detail = detail.str();
    return res;
}

// Marginal law of the reflection partner: e . partner is standard normal
// (KS at the 0.1% level) and the partner equals g exactly when q_hat = 0.
inline CheckResult check_reflection_marginal(long draws, std::uint64_t seed = 0x3f1u) {
    CheckResult res{"coupling-reflection-marginal", true, ""};
    std::ostringstream detail;
    for (double qn : {0.5, 2.0}) {
        Vec q_hat(2, 0.0);
        q_hat[0] = qn;
        Vec e = (1.0 / qn) * q_hat;
        std::vector<double> along(draws);
        for (long i = 0; i < draws; ++i) {
            DrawContext ctx{seed + static_cast<std::uint64_t>(qn * 64), static_cast<std::uint32_t>(i), 1};
            Vec g = {ctx.normal(0), ctx.normal(1)};
            double uni = ctx.uniform(2);
            along[i] = dot(e, reflection_partner(g, q_hat, uni));
        }
        double d = ks_statistic(along, [](double x) { return normal_cdf(x); });
        double crit = ks_critical(0.001, static_cast<double>(draws));
        if (d > crit) {
            res.pass = false;
            detail << " KS fail at |q|=" << qn << " D=" << d << " crit=" << crit << ";";
        }
    }
    for (long i = 0; i < 100; ++i) {
        DrawContext ctx{seed, static_cast<std::uint32_t>(i), 2};
        Vec g = {ctx.normal(0), ctx.normal(1)};
        Vec partner = reflection_partner(g, Vec(2, 0.0), ctx.uniform(2));
        if (partner != g) {
            res.pass = false;
            detail << " partner != g at q_hat = 0;";
            break;
        }
    }
    res.detail = detail.str();
    return res;
}

namespace verify_detail {

struct SweepDraw {
    Vec qbar, qbar2, pbar, pbar2;
    double h = 0, eta0 = 0, eta1 = 0, shift = 0;
};

inline Vec random_direction(const DrawContext& ctx, int dim, std::uint32_t base) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = ctx.normal(base + static_cast<std::uint32_t>(i));
    double n = norm(v);
    if (n == 0.0) v[0] = n = 1.0;
    return (1.0 / n) * v;
}

// Draws hypothesis-satisfying inputs for one proposition variant.
inline SweepDraw draw_for_variant(PropositionVariant variant, const ForceField& field,
                                  std::uint64_t seed, std::uint32_t idx) {
    DrawContext ctx{seed, idx, 0};
    int dim = field.dim;
    double L = field.L;
    SweepDraw d;

    double eta1 = 0.2 + 0.7 * ctx.uniform(0);
    double max_delta = 1.0 - eta1;
    switch (variant) {
        case PropositionVariant::LBA:
        case PropositionVariant::LAB:
        case PropositionVariant::LAB2:
            max_delta = std::min(max_delta, 0.5);
            break;
        case PropositionVariant::LBA2:
            max_delta = std::min({max_delta, 0.5, eta1});
            break;
        case PropositionVariant::EXPO2:
            max_delta = std::min(max_delta, eta1);
            break;
        default:
            break;
    }
    double delta = max_delta * (0.05 + 0.9 * ctx.uniform(1));
    d.eta1 = eta1;
    d.eta0 = eta1 + delta;

    double h_cap = delta / std::sqrt(L);
    bool capped = variant == PropositionVariant::LBA2 || variant == PropositionVariant::LAB2 ||
                  variant == PropositionVariant::LBA2_R || variant == PropositionVariant::RVR;
    if (capped) h_cap = std::min(h_cap, 1.0 / (16.0 * std::sqrt(L)));
    d.h = h_cap * (0.1 + 0.85 * ctx.uniform(2));
    d.shift = d.h * (0.05 + 0.9 * ctx.uniform(3));

    double thr = 4.0 * field.R * (1.0 + field.L / field.m);
    Vec dir_q = random_direction(ctx, dim, 8);
    Vec dir_p = random_direction(ctx, dim, 8 + static_cast<std::uint32_t>(dim));
    double base = ctx.uniform(4);
    d.qbar2 = Vec(dim, 0.0);
    d.pbar2 = Vec(dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        d.qbar2[i] = 2.0 * ctx.normal(20 + static_cast<std::uint32_t>(i));
        d.pbar2[i] = 2.0 * ctx.normal(20 + static_cast<std::uint32_t>(dim + i));
    }
    d.qbar = d.qbar2;
    d.pbar = d.pbar2;

    switch (variant) {
        case PropositionVariant::LBA: {
            double mag = std::max(thr, 1e-3) * (1.0 + 9.0 * base);
            axpy(mag, dir_q, d.qbar);
            axpy(3.0 * ctx.normal(5), dir_p, d.pbar);
            break;
        }
        case PropositionVariant::LAB: {
            // place |dq + (h/2) dp| on the admissible side by construction
            double mag = std::max(thr, 1e-3) * (1.0 + 9.0 * base);
            axpy(3.0 * ctx.normal(5), dir_p, d.pbar);
            Vec dp = d.pbar - d.pbar2;
            axpy(mag, dir_q, d.qbar);
            axpy(-0.5 * d.h, dp, d.qbar);
            break;
        }
        case PropositionVariant::LBA_R: {
            double mag = std::max(thr, 1e-3) * (1.0 + 9.0 * base);
            axpy(3.0 * ctx.normal(5), dir_p, d.pbar);
            Vec dp = d.pbar - d.pbar2;
            axpy(mag, dir_q, d.qbar);
            axpy(-d.shift, dp, d.qbar);
            break;
        }
        case PropositionVariant::LBA2:
        case PropositionVariant::LAB2: {
            double qmag = 0.5 * base;
            axpy(qmag, dir_q, d.qbar);
            double pmag = std::sqrt(17.0 * L / 4.0) * qmag * (1.001 + 4.0 * ctx.uniform(5));
            axpy(pmag, dir_p, d.pbar);
            break;
        }
        case PropositionVariant::LBA2_R: {
            double qmag = 0.5 * base;
            axpy(qmag, dir_q, d.qbar);
            double pmag = 4.0 * std::sqrt(L) * qmag * (1.001 + 4.0 * ctx.uniform(5));
            axpy(pmag, dir_p, d.pbar);
            break;
        }
        case PropositionVariant::EXPO:
        case PropositionVariant::EXPO2:
        case PropositionVariant::RVR: {
            axpy(4.0 * ctx.normal(5), dir_q, d.qbar);
            axpy(4.0 * ctx.normal(6), dir_p, d.pbar);
            break;
        }
    }
    return d;
}

}  // namespace verify_detail

// Zero violations of the nine modified-norm inequalities over random
// admissible draws on the given target.
inline CheckResult check_proposition_sweep(const ForceField& field, long draws_per_variant,
                                           std::uint64_t seed = 0x5ee9u) {
    CheckResult res{"oracle-proposition-sweep", true, ""};
    std::ostringstream detail;
    const PropositionVariant variants[] = {
        PropositionVariant::LBA,    PropositionVariant::LAB,   PropositionVariant::LBA2,
        PropositionVariant::LAB2,   PropositionVariant::LBA_R, PropositionVariant::LBA2_R,
        PropositionVariant::EXPO,   PropositionVariant::EXPO2, PropositionVariant::RVR};
    for (auto variant : variants) {
        long checked = 0, violations = 0;
        for (long i = 0; checked < draws_per_variant && i < 4 * draws_per_variant; ++i) {
            auto draw = verify_detail::draw_for_variant(
                variant, field, seed + static_cast<int>(variant), static_cast<std::uint32_t>(i));
            NormCheckResult r = check_norm_inequality(variant, draw.qbar, draw.qbar2, draw.pbar,
                                                      draw.pbar2, draw.h, draw.eta0, draw.eta1,
                                                      field, GradientIndex::full(), draw.shift);
            if (!r.hypotheses_met) continue;
            ++checked;
            if (!r.holds) ++violations;
        }
        if (violations > 0 || checked < draws_per_variant) {
            res.pass = false;
            detail << ' ' << variant_name(variant) << ": " << violations << " violations over "
                   << checked << " draws;";
        }
    }
    res.detail = detail.str();
    return res;
}

// Zero violations of the trajectory a-priori estimates over random coupled
// legs with L T (T+h) <= 1/16^2, both integrators.
inline CheckResult check_apriori_sweep(const ForceField& field, long legs,
                                       std::uint64_t seed = 0xa9u) {
    CheckResult res{"oracle-apriori-estimates", true, ""};
    std::ostringstream detail;
    long violations = 0;
    for (long i = 0; i < legs; ++i) {
        DrawContext ctx{seed, static_cast<std::uint32_t>(i), 0};
        AlgoParams params;
        params.K = 1 + static_cast<int>(ctx.uniform(0) * 6);
        double t_max = std::sqrt(1.0 / (256.0 * field.L) / 2.0);
        double T = t_max * (0.2 + 0.75 * ctx.uniform(1));
        params.h = T / params.K;
        params.eta = 0.5;
        params.u = i % 2 == 0 ? 0 : 1;
        int dim = field.dim;
        ChainState a{Vec(dim), Vec(dim)}, b{Vec(dim), Vec(dim)};
        for (int j = 0; j < dim; ++j) {
            a.x[j] = 2.0 * ctx.normal(static_cast<std::uint32_t>(4 + 4 * j));
            a.v[j] = 2.0 * ctx.normal(static_cast<std::uint32_t>(5 + 4 * j));
            b.x[j] = 2.0 * ctx.normal(static_cast<std::uint32_t>(6 + 4 * j));
            b.v[j] = 2.0 * ctx.normal(static_cast<std::uint32_t>(7 + 4 * j));
        }
        LegRandomness rand;
        rand.thetas.assign(params.K, GradientIndex::full());
        rand.theta_primes.assign(params.K, GradientIndex::full());
        rand.midpoints.resize(params.K);
        for (int k = 0; k < params.K; ++k)
            rand.midpoints[k] = ctx.uniform(static_cast<std::uint32_t>(100 + k));
        AprioriResult r = apriori_check(field, params, a, b, rand);
        if (!r.precondition_met) {
            res.pass = false;
            detail << " draw " << i << ": precondition unexpectedly unmet;";
            continue;
        }
        if (!r.holds_q || !r.holds_p) ++violations;
    }
    if (violations > 0) {
        res.pass = false;
        detail << ' ' << violations << " violations over " << legs << " legs;";
    }
    res.detail = detail.str();
    return res;
}

// Monte Carlo estimates of E[exp(-g_hat C (K - r))] dominate the closed-form
// lower bound at the tuned constants c1 = 0.58, c2 = 0.67.
inline CheckResult check_lemexes_dominance(long samples, std::uint64_t seed = 0x1e3u) {
    CheckResult res{"oracle-lemexes-lower-bound", true, ""};
    std::ostringstream detail;
    const double c1 = 0.58, c2 = 0.67;
    int combo = 0;
    for (double t_hat : {0.05, 0.2})
        for (double g_hat : {0.5, 2.0})
            for (double C : {1.5, 3.0})
                for (double qn : {0.0, 0.5, 2.0, 10.0}) {
                    ++combo;
                    Vec q_hat(3, 0.0);
                    q_hat[0] = qn;
                    double r = qn * t_hat;
                    std::vector<double> vals(samples);
                    for (long i = 0; i < samples; ++i) {
                        double k = verify_detail::sample_k(q_hat, t_hat, seed + 977 * combo,
                                                           static_cast<std::uint32_t>(i));
                        vals[i] = std::exp(-g_hat * C * (k - r));
                    }
                    MeanVar mv = mean_var(vals);
                    double bound = lemexes_lower_bound(qn, g_hat, C, c1, c2, t_hat);
                    if (mv.mean < bound - 3.0 * mv.stderr_mean()) {
                        res.pass = false;
                        detail << " dominance fail at T_hat=" << t_hat << " g_hat=" << g_hat
                               << " C=" << C << " |q|=" << qn << " mc=" << mv.mean
                               << " bound=" << bound << ";";
                    }
                }
    res.detail = detail.str();
    return res;
}

// The target-moment bound dominates exact (Gaussian) and quadrature
// (double-well) second and fourth moments.
inline CheckResult check_eal_dominance() {
    CheckResult res{"oracle-target-moment-bound", true, ""};
    std::ostringstream detail;
    for (int dim : {1, 2, 5}) {
        ForceField g = make_gaussian_target(dim, 1.0);
        double b2 = target_moment_oracle(g, 2, dim);
        double b4 = target_moment_oracle(g, 4, dim);
        double true2 = static_cast<double>(dim);
        double true4 = static_cast<double>(dim) * dim + 2.0 * dim;
        if (b2 < true2 || b4 < true4) {
            res.pass = false;
            detail << " gaussian dim=" << dim << " bound below exact moment;";
        }
    }
    {
        ForceField dw = make_double_well_target(1, 1.0, 1.0);
        auto u = [&](double r) { return dw.potential(Vec{r}); };
        auto moment = [&](int beta) {
            auto numer = [&](double r) { return 2.0 * std::pow(r, beta) * std::exp(-u(r)); };
            auto denom = [&](double r) { return 2.0 * std::exp(-u(r)); };
            return adaptive_simpson(numer, 1e-12, 12.0, 1e-12) /
                   adaptive_simpson(denom, 1e-12, 12.0, 1e-12);
        };
        if (target_moment_oracle(dw, 2, 1) < moment(2) ||
            target_moment_oracle(dw, 4, 1) < moment(4)) {
            res.pass = false;
            detail << " double-well bound below quadrature moment;";
        }
    }
    res.detail = detail.str();
    return res;
}

// The full oracle suite at the stated scales; `scale` shrinks the sample
// counts for quick smoke runs.
inline std::vector<CheckResult> run_verify_suite(double scale = 1.0) {
    auto scaled = [scale](long n) { return std::max<long>(64, static_cast<long>(n * scale)); };
    std::vector<CheckResult> out;
    out.push_back(check_teos_mc(scaled(1000000), {0.0, 0.5, 1.0, 2.0, 5.0}, {0.01, 0.1},
                                {0.0, 0.5, 0.9}));
    out.push_back(check_reflection_marginal(scaled(100000)));
    ForceField quad = make_gaussian_target(2, 1.0);
    ForceField dw = make_double_well_target(1, 1.0, 1.0);
    out.push_back(check_proposition_sweep(quad, scaled(100000)));
    out.back().name += "-quadratic";
    out.push_back(check_proposition_sweep(dw, scaled(100000)));
    out.back().name += "-double-well";
    out.push_back(check_apriori_sweep(dw, scaled(10000)));
    out.push_back(check_lemexes_dominance(scaled(1000000)));
    out.push_back(check_eal_dominance());
    return out;
}

}  // namespace sgghmc
