#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "algo.hpp"
#include "model.hpp"
#include "special.hpp"

namespace sgghmc {

// Both step-size conditions of the high-friction contraction theorem, with
// the slack of each. Failing conditions are reported, never thrown.
struct AdmissibilityReport {
    bool friction_ok = false;   // 4 L T^2 <= (1-eta)^2
    bool stepsize_ok = false;   // L (T+h)^2 (1+eta)/(1-eta) <= min(1/(L R_hat^2), 1)/16^2
    double friction_lhs = 0.0, friction_rhs = 0.0;
    double stepsize_lhs = 0.0, stepsize_rhs = 0.0;

    bool pass() const { return friction_ok && stepsize_ok; }
};

// Every explicit constant of the contraction, concentration and bias bounds.
// Quantities that can underflow as plain doubles (everything carrying a
// factor e^{-g R_hat}) are also kept in log form.
struct DerivedConstants {
    // inputs echoed
    double m = 0, L = 0, R = 0, T = 0, h = 0, eta = 0;
    int u = 0;
    int dim = 0;

    double inv_gamma = 0;   // 1/gamma = eta T/(1-eta); exactly 0 at eta = 0
    double alpha = 0;       // L T^2/(1-eta)^2
    double alpha_hat = 0;   // 1.09 alpha
    double r_star = 0;      // (1-eta)/(T^2 (1+eta))
    double R_hat = 0;
    double g = 0;
    double eps_star = 0;
    double log_eps_star = 0;
    double c0 = 0;
    double c = 0;
    double log_c = 0;
    double M1 = 0;          // sqrt(g/(2 log 2 eps*))
    double C_conc = 0;      // explicit C of the concentration bound
    double R_prime = 0;     // 4R(1+L/m)
    double d_star = 0;      // max(L R'^2, d)/m
    bool admissible = false;

    double gamma() const { return inv_gamma == 0.0 ? INFINITY : 1.0 / inv_gamma; }
    // T + 1/gamma = T/(1-eta)
    double t_plus_inv_gamma() const { return T + inv_gamma; }
    // hat T = T sqrt(1+eta)/sqrt(1-eta); equals (T+1/gamma) sqrt(1-eta^2)
    double T_hat() const { return T * std::sqrt((1.0 + eta) / (1.0 - eta)); }
};

namespace detail {

inline double r_hat_value(const ForceField& field, const AlgoParams& params) {
    double T = params.T();
    double alpha = field.L * T * T / ((1.0 - params.eta) * (1.0 - params.eta));
    double u = params.u;
    double nonconvex = (6.0 + 4.0 * u) *
                       (1.0 + (3.0 + 5.0 * u) * std::sqrt(alpha) + 1.09 * alpha) * field.R *
                       (1.0 + field.L / field.m);
    return std::max(nonconvex, 1.0 / std::sqrt(4.0 * field.L));
}

}  // namespace detail

inline AdmissibilityReport check_admissibility(const ForceField& field,
                                               const AlgoParams& params) {
    params.validate();
    double T = params.T(), h = params.h, eta = params.eta, L = field.L;
    AdmissibilityReport rep;
    rep.friction_lhs = 4.0 * L * T * T;
    rep.friction_rhs = (1.0 - eta) * (1.0 - eta);
    rep.friction_ok = rep.friction_lhs <= rep.friction_rhs;
    double r_hat = detail::r_hat_value(field, params);
    rep.stepsize_lhs = L * (T + h) * (T + h) * (1.0 + eta) / (1.0 - eta);
    rep.stepsize_rhs = std::min(1.0 / (L * r_hat * r_hat), 1.0) / 256.0;
    rep.stepsize_ok = rep.stepsize_lhs <= rep.stepsize_rhs;
    return rep;
}

inline DerivedConstants derive_constants(const ForceField& field, const AlgoParams& params,
                                         int dim) {
    params.validate();
    if (!(field.m > 0.0) || !(field.L > 0.0))
        throw std::invalid_argument("derive_constants: field needs positive m and L");
    DerivedConstants C;
    C.m = field.m;
    C.L = field.L;
    C.R = field.R;
    C.T = params.T();
    C.h = params.h;
    C.eta = params.eta;
    C.u = params.u;
    C.dim = dim;

    double eta = params.eta, T = C.T, L = C.L;
    double one_minus = 1.0 - eta;
    C.inv_gamma = eta == 0.0 ? 0.0 : eta * T / one_minus;
    C.alpha = L * T * T / (one_minus * one_minus);
    C.alpha_hat = 1.09 * C.alpha;
    C.r_star = one_minus / (T * T * (1.0 + eta));
    C.R_hat = detail::r_hat_value(field, params);
    C.g = 0.4 * std::max(16.0 * L * C.R_hat, 2.0 * std::sqrt(L));

    double gR = C.g * C.R_hat;
    // indicator-weighted denominator of the first min-arm of eps*
    double ind = eta != 0.0 ? 2.0 / (C.alpha * C.alpha) : 1.0;
    double log_arm1 = -gR - std::log(101.0 * ind * C.R_hat);
    double log_arm2 = -gR + std::log(kSqrt2Pi * C.g / 1024.0);
    C.log_eps_star = std::min(log_arm1, log_arm2);
    C.eps_star = std::exp(C.log_eps_star);

    C.c0 = gR * std::exp(-gR) / (5.0 * (1.0 - std::exp(-gR))) *
           std::min(1.0 / (4.0 * C.alpha), 1.0);
    double rate_min = std::min(4.0 / ind, 1.0);
    C.log_c = std::log(C.m * T * T / one_minus) - gR + std::log(rate_min / 6592.0);
    C.c = std::exp(C.log_c);
    C.M1 = std::exp(0.5 * (std::log(C.g) - std::log(2.0 * std::log(2.0)) - C.log_eps_star));
    C.C_conc = eta != 0.0 ? std::exp(std::log(19.0 * C.g * (1.0 + eta) / C.alpha) - C.log_eps_star)
                          : std::exp(std::log(3.0 * C.g) - C.log_eps_star);
    C.R_prime = 4.0 * field.R * (1.0 + field.L / field.m);
    C.d_star = std::max(L * C.R_prime * C.R_prime, static_cast<double>(dim)) / field.m;
    C.admissible = check_admissibility(field, params).pass();
    return C;
}

// W1 upper bound after n iterations: M1 (1-c)^n W1(nu1, nu2).
inline double contraction_bound(const DerivedConstants& C, long n, double w1_initial) {
    if (n < 0) throw std::invalid_argument("contraction_bound: n must be >= 0");
    return C.M1 * std::pow(1.0 - C.c, static_cast<double>(n)) * w1_initial;
}

// Gaussian concentration bound for the deviation of an N-step empirical
// average of an f that is lip_norm-Lipschitz w.r.t. the twisted metric.
inline double concentration_bound(const DerivedConstants& C, const AlgoParams& params, long N,
                                  double lip_norm, double r) {
    if (N < 1) throw std::invalid_argument("concentration_bound: N must be >= 1");
    if (!(lip_norm > 0.0))
        throw std::invalid_argument("concentration_bound: lip_norm must be positive");
    double T = params.T(), eta = params.eta;
    if (C.c <= 0.0) return 1.0;
    double correction = 1.0 + 1.0 / (C.c * static_cast<double>(N));
    double expo = -(1.0 - eta) * static_cast<double>(N) * C.c * C.c * r * r /
                  (C.C_conc * T * T * lip_norm * lip_norm * correction);
    return std::exp(expo);
}

// One invariant-bias bound, kept in both linear and log form since the
// prefactor (2g/(log 2 eps*))^{sqrt(L) T / c} routinely overflows a double.
struct BoundValue {
    double value = 0.0;
    double log_value = 0.0;
};

struct BiasBounds {
    BoundValue verlet_h;
    std::optional<BoundValue> verlet_h2;  // requires a Hessian-Lipschitz constant
    BoundValue midpoint;
    std::optional<BoundValue> sg_term;    // requires minibatch structure and a horizon
};

inline BiasBounds bias_bound(const ForceField& field, const AlgoParams& params,
                             const DerivedConstants& C, int dim,
                             std::optional<long> horizon = std::nullopt) {
    double T = params.T(), h = params.h, L = field.L, m = field.m;
    double moment = std::max(dim * L / m, L * L * C.R_prime * C.R_prime / m);
    double log_prefactor = std::sqrt(L) * T / C.c *
                           (std::log(2.0 * C.g) - std::log(std::log(2.0)) - C.log_eps_star);
    BiasBounds out;
    out.verlet_h.log_value =
        std::log(16.0) + log_prefactor + std::log(h) + 0.5 * std::log(moment);
    out.verlet_h.value = std::exp(out.verlet_h.log_value);
    out.midpoint.log_value = std::log(144.0 * std::sqrt(6.0)) - std::log(T) + log_prefactor -
                             0.25 * std::log(L) + 1.5 * std::log(h) + 0.5 * std::log(moment);
    out.midpoint.value = std::exp(out.midpoint.log_value);
    if (field.hessian_lipschitz) {
        BoundValue b;
        b.log_value = std::log(66.0 * (1.0 + *field.hessian_lipschitz / std::pow(L, 1.5))) +
                      log_prefactor + 0.5 * std::log(L) + 2.0 * std::log(h) + std::log(moment);
        b.value = std::exp(b.log_value);
        out.verlet_h2 = b;
    }
    if (field.stochastic && horizon) {
        const auto& sg = *field.stochastic;
        BoundValue b;
        if (sg.variance_bound == 0.0) {
            b.value = 0.0;
            b.log_value = -INFINITY;
        } else {
            double nK = static_cast<double>(*horizon) * params.K;
            b.log_value = 0.5 * (std::log(sg.variance_bound) + 0.5 * std::log(L) + std::log(h) +
                                 nK * std::log1p(3.0 * std::sqrt(L) * h) - std::log(sg.batch));
            b.value = std::exp(b.log_value);
        }
        out.sg_term = b;
    }
    return out;
}

}  // namespace sgghmc
