#pragma once

#include <cmath>
#include <stdexcept>

#include "algo.hpp"
#include "constants.hpp"
#include "rng.hpp"
#include "vec.hpp"

namespace sgghmc {

enum class Branch { Synchronous = 0, Reflection = 1 };

struct DifferenceCoords {
    Vec z;      // x - y
    Vec q;      // x - y + (1/gamma)(v - w)
    Vec q_hat;  // r* (T+1/gamma) sqrt(1-eta^2) (x - y + eta (T+1/gamma)(v - w))
};

inline DifferenceCoords difference_coords(const ChainState& a, const ChainState& b,
                                          const DerivedConstants& C) {
    DifferenceCoords d;
    d.z = a.x - b.x;
    Vec dv = a.v - b.v;
    d.q = d.z;
    axpy(C.inv_gamma, dv, d.q);
    double s = C.t_plus_inv_gamma();
    double scale = C.r_star * s * std::sqrt(1.0 - C.eta * C.eta);
    d.q_hat = d.z;
    axpy(C.eta * s, dv, d.q_hat);
    for (auto& v : d.q_hat) v *= scale;
    return d;
}

// Two chains, the difference coordinates of their current states, and the
// coupling branch taken at the last iteration.
struct CoupledPair {
    ChainState first, second;
    DifferenceCoords diff;
    Branch branch = Branch::Synchronous;

    static CoupledPair start(const ChainState& a, const ChainState& b,
                             const DerivedConstants& C) {
        return {a, b, difference_coords(a, b, C), Branch::Synchronous};
    }
};

// Reflection-coupled refreshment partner of g: the translation g + q_hat,
// accepted with the Gaussian density ratio, otherwise the mirror image
// across the q_hat direction. The acceptance test runs in log space,
// log ratio = -(e.g)|q_hat| - |q_hat|^2/2, so large |q_hat| cannot overflow.
inline Vec reflection_partner(const Vec& g, const Vec& q_hat, double uniform) {
    double r = norm(q_hat);
    Vec e(g.size(), 0.0);
    if (r > 0.0)
        e = (1.0 / r) * q_hat;
    else
        e[0] = 1.0;
    double along = dot(e, g);
    double log_ratio = -along * r - 0.5 * r * r;
    if (std::log(uniform) <= log_ratio) return g + q_hat;
    Vec out = g;
    axpy(-2.0 * along, e, out);
    return out;
}

// K_{vbar} = | vbar / (r* (T+1/gamma) sqrt(1-eta^2)) + (T+1/gamma) sqrt(1-eta^2) gbar |.
inline double k_value(const Vec& vbar, const Vec& gbar, const DerivedConstants& C) {
    double s = C.t_plus_inv_gamma() * std::sqrt(1.0 - C.eta * C.eta);
    Vec combo = (1.0 / (C.r_star * s)) * vbar;
    axpy(s, gbar, combo);
    return norm(combo);
}

// Twisted metric alpha_hat |x-y| + |x-y + (1/gamma)(v-w)|; at eta = 0 the
// velocity term drops and this is (alpha_hat + 1)|x-y|.
inline double twisted_distance(const ChainState& a, const ChainState& b,
                               const DerivedConstants& C) {
    Vec z = a.x - b.x;
    Vec q = z;
    axpy(C.inv_gamma, a.v - b.v, q);
    return C.alpha_hat * norm(z) + norm(q);
}

// f0(x) = (1 - exp(-g min(x, R_hat))) / g.
inline double concave_f0(double x, double g, double R_hat) {
    if (x < 0.0) throw std::domain_error("concave_f0: x must be nonnegative");
    return -std::expm1(-g * std::min(x, R_hat)) / g;
}

// Squared modified norm |z|^2 + 2/gamma z.dv + 2/gamma^2 |dv|^2; pass
// inv_gamma = 0 for the eta = 0 case.
inline double mbar_seminorm_sq(const Vec& z, const Vec& dv, double inv_gamma) {
    return dot(z, z) + 2.0 * inv_gamma * dot(z, dv) + 2.0 * inv_gamma * inv_gamma * dot(dv, dv);
}

inline double mbar_seminorm(const Vec& z, const Vec& dv, double inv_gamma) {
    return std::sqrt(mbar_seminorm_sq(z, dv, inv_gamma));
}

// Contraction semimetric rho* = f0(|q| + 1.09 alpha |z|) + eps* ||(z, v-w)||^2_Mbar.
inline double rho_star(const ChainState& a, const ChainState& b, const DerivedConstants& C) {
    DifferenceCoords d = difference_coords(a, b, C);
    double arg = norm(d.q) + 1.09 * C.alpha * norm(d.z);
    return concave_f0(arg, C.g, C.R_hat) +
           C.eps_star * mbar_seminorm_sq(d.z, a.v - b.v, C.inv_gamma);
}

// One coupled iteration. Branch rule: synchronous refreshment when
// |q| + 1.09 alpha |z| >= R_hat (ties synchronous), reflection otherwise.
// Both chains always share the same theta, theta' and midpoint draws.
inline CoupledPair coupled_iteration(const CoupledPair& pair, const AlgoParams& params,
                                     const ForceField& field, const DerivedConstants& C,
                                     const DrawContext& ctx) {
    if (C.T != params.T() || C.eta != params.eta || C.u != params.u)
        throw std::invalid_argument("coupled_iteration: constants stale w.r.t. params");
    DifferenceCoords d = difference_coords(pair.first, pair.second, C);
    double sep = norm(d.q) + 1.09 * C.alpha * norm(d.z);

    SlotLayout layout{field.dim, field.batch()};
    Vec g = draw_refresh_normal(ctx, field.dim, field.batch());
    CoupledPair out;
    if (sep >= C.R_hat) {
        out.branch = Branch::Synchronous;
        out.first = velocity_refresh(pair.first, params, g);
        out.second = velocity_refresh(pair.second, params, g);
    } else {
        out.branch = Branch::Reflection;
        double uniform = ctx.uniform(layout.coupling());
        Vec partner = reflection_partner(g, d.q_hat, uniform);
        out.first = velocity_refresh(pair.first, params, g);
        out.second = velocity_refresh(pair.second, params, partner);
    }
    LegRandomness rand = draw_leg_randomness(ctx, params, field);
    out.first = hamiltonian_leg(out.first, params, field, rand);
    out.second = hamiltonian_leg(out.second, params, field, rand);
    out.diff = difference_coords(out.first, out.second, C);
    return out;
}

}  // namespace sgghmc
