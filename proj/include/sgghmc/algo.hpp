#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "rng.hpp"
#include "vec.hpp"

namespace sgghmc {

// Sampler parameters. T = K h is the integration time; u selects the
// integrator (0 velocity Verlet, 1 randomized midpoint).
struct AlgoParams {
    int K = 1;
    double h = 0.0;
    double eta = 0.0;
    int u = 0;

    double T() const { return K * h; }

    void validate() const {
        if (K < 1) throw std::invalid_argument("AlgoParams: K must be >= 1");
        if (!(h > 0.0)) throw std::invalid_argument("AlgoParams: h must be positive");
        if (!(eta >= 0.0 && eta < 1.0))
            throw std::invalid_argument("AlgoParams: eta must lie in [0,1)");
        if (u != 0 && u != 1) throw std::invalid_argument("AlgoParams: u must be 0 or 1");
    }
};

struct ChainState {
    Vec x, v;
};

// Per-leg randomness: the theta/theta' sequences and the midpoint uniforms.
struct LegRandomness {
    std::vector<GradientIndex> thetas;
    std::vector<GradientIndex> theta_primes;
    Vec midpoints;
};

inline LegRandomness draw_leg_randomness(const DrawContext& ctx, const AlgoParams& params,
                                         const ForceField& field) {
    SlotLayout layout{field.dim, field.batch()};
    LegRandomness r;
    r.thetas.resize(params.K);
    r.theta_primes.resize(params.K);
    r.midpoints.resize(params.K);
    for (int k = 0; k < params.K; ++k) {
        r.thetas[k] = field.draw_index(ctx, layout.theta(k, 0));
        r.theta_primes[k] = field.draw_index(ctx, layout.theta_prime(k, 0));
        r.midpoints[k] = ctx.uniform(layout.midpoint(k));
    }
    return r;
}

inline Vec draw_refresh_normal(const DrawContext& ctx, int dim, int batch) {
    SlotLayout layout{dim, batch};
    Vec g(dim);
    for (int i = 0; i < dim; ++i) g[i] = ctx.normal(layout.refresh(i));
    return g;
}

// v <- eta v + sqrt(1 - eta^2) g, position unchanged.
inline ChainState velocity_refresh(const ChainState& state, const AlgoParams& params,
                                   const Vec& g) {
    if (g.size() != state.v.size())
        throw std::invalid_argument("velocity_refresh: dimension mismatch");
    ChainState out = state;
    double damp = params.eta, fresh = std::sqrt(1.0 - params.eta * params.eta);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = damp * out.v[i] + fresh * g[i];
    return out;
}

// Kick-drift-kick velocity Verlet sub-step.
inline ChainState verlet_step(const ChainState& state, double h, const ForceField& field,
                              const GradientIndex& theta, const GradientIndex& theta_prime) {
    if (!(h > 0.0)) throw std::invalid_argument("verlet_step: h must be positive");
    ChainState out = state;
    axpy(-0.5 * h, field(out.x, theta), out.v);
    axpy(h, out.v, out.x);
    axpy(-0.5 * h, field(out.x, theta_prime), out.v);
    return out;
}

// Randomized midpoint sub-step: one gradient at the shifted point drives
// both the position and velocity updates.
inline ChainState randomized_midpoint_step(const ChainState& state, double h,
                                           const ForceField& field, const GradientIndex& theta,
                                           double midpoint_u) {
    if (!(h > 0.0))
        throw std::invalid_argument("randomized_midpoint_step: h must be positive");
    ChainState out = state;
    Vec probe = out.x;
    axpy(midpoint_u * h, out.v, probe);
    Vec g = field(probe, theta);
    axpy(h, out.v, out.x);
    axpy(-0.5 * h * h, g, out.x);
    axpy(-h, g, out.v);
    return out;
}

// K sub-steps of the selected integrator. If trace is set, it receives the
// state at every grid time s = 0, h, ..., T (K+1 calls).
inline ChainState hamiltonian_leg(const ChainState& state, const AlgoParams& params,
                                  const ForceField& field, const LegRandomness& rand,
                                  const std::function<void(int, const ChainState&)>& trace = {}) {
    if (static_cast<int>(rand.thetas.size()) != params.K ||
        static_cast<int>(rand.theta_primes.size()) != params.K ||
        static_cast<int>(rand.midpoints.size()) != params.K)
        throw std::invalid_argument("hamiltonian_leg: randomness length != K");
    ChainState cur = state;
    if (trace) trace(0, cur);
    for (int k = 0; k < params.K; ++k) {
        if (params.u == 0)
            cur = verlet_step(cur, params.h, field, rand.thetas[k], rand.theta_primes[k]);
        else
            cur = randomized_midpoint_step(cur, params.h, field, rand.thetas[k],
                                           rand.midpoints[k]);
        if (trace) trace(k + 1, cur);
    }
    return cur;
}

// One full iteration: partial velocity refreshment, then the Hamiltonian leg.
inline ChainState ghmc_iteration(const ChainState& state, const AlgoParams& params,
                                 const ForceField& field, const DrawContext& ctx) {
    Vec g = draw_refresh_normal(ctx, field.dim, field.batch());
    ChainState refreshed = velocity_refresh(state, params, g);
    return hamiltonian_leg(refreshed, params, field, draw_leg_randomness(ctx, params, field));
}

}  // namespace sgghmc
