#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "vec.hpp"

namespace sgghmc {

// Which component gradients a drift evaluation averages over. An empty id
// list means the deterministic (full) drift.
struct GradientIndex {
    std::vector<std::int32_t> ids;

    bool deterministic() const { return ids.empty(); }

    static GradientIndex full() { return {}; }
    static GradientIndex minibatch(std::vector<std::int32_t> ids_) { return {std::move(ids_)}; }
};

struct StochasticInfo {
    int batch = 1;            // p, components averaged per evaluation
    int component_count = 1;  // size of the component family
    double variance_bound = 0.0;  // C_U
};

// A drift b(x, theta) with the constants (m, L, R) it satisfies: m-strong
// monotonicity of b outside the ball of radius R and global L-Lipschitz
// continuity, with symmetric Jacobian.
struct ForceField {
    int dim = 1;
    double m = 0.0;
    double L = 0.0;
    double R = 0.0;
    std::optional<double> hessian_lipschitz;
    std::optional<StochasticInfo> stochastic;
    std::function<Vec(const Vec&, const GradientIndex&)> eval;
    std::function<double(const Vec&)> potential;  // U with b = grad U, when available

    Vec operator()(const Vec& x, const GradientIndex& theta = {}) const {
        if (static_cast<int>(x.size()) != dim)
            throw std::invalid_argument("ForceField: dimension mismatch");
        return eval(x, theta);
    }

    int batch() const { return stochastic ? stochastic->batch : 0; }

    // Draws one minibatch id set (uniform without replacement) from the
    // given slots, one uniform per selected component.
    GradientIndex draw_index(const DrawContext& ctx, std::uint32_t first_slot) const {
        if (!stochastic) return GradientIndex::full();
        int n = stochastic->component_count;
        int p = stochastic->batch;
        std::vector<std::int32_t> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::int32_t> ids(p);
        for (int j = 0; j < p; ++j) {
            double uj = ctx.uniform(first_slot + static_cast<std::uint32_t>(j));
            int pick = j + static_cast<int>(uj * (n - j));
            if (pick >= n) pick = n - 1;
            std::swap(pool[j], pool[pick]);
            ids[j] = pool[j];
        }
        return GradientIndex::minibatch(std::move(ids));
    }
};

// b(x) = curvature * x; U(x) = curvature |x|^2 / 2.
inline ForceField make_gaussian_target(int dim, double curvature) {
    if (dim < 1) throw std::invalid_argument("make_gaussian_target: dim must be >= 1");
    if (!(curvature > 0.0))
        throw std::invalid_argument("make_gaussian_target: curvature must be positive");
    ForceField f;
    f.dim = dim;
    f.m = curvature;
    f.L = curvature;
    f.R = 0.0;
    f.hessian_lipschitz = 0.0;
    f.eval = [curvature](const Vec& x, const GradientIndex&) { return curvature * x; };
    f.potential = [curvature](const Vec& x) { return 0.5 * curvature * dot(x, x); };
    return f;
}

namespace detail {

// Radial profile of the capped double well: u(r) = scale (r^2-a^2)^2/(4a^2)
// for r <= cap, extended beyond cap by the quadratic with matched value,
// gradient and curvature, so u'' is continuous and globally bounded.
struct DoubleWellProfile {
    double a, scale, cap;

    double u(double r) const {
        if (r <= cap) {
            double t = r * r - a * a;
            return scale * t * t / (4.0 * a * a);
        }
        double d = r - cap;
        return u_inside(cap) + du_inside(cap) * d + 0.5 * ddu_inside(cap) * d * d;
    }
    double du(double r) const {
        if (r <= cap) return du_inside(r);
        return du_inside(cap) + ddu_inside(cap) * (r - cap);
    }
    double ddu(double r) const { return r <= cap ? ddu_inside(r) : ddu_inside(cap); }

    double u_inside(double r) const {
        double t = r * r - a * a;
        return scale * t * t / (4.0 * a * a);
    }
    double du_inside(double r) const { return scale * r * (r * r - a * a) / (a * a); }
    double ddu_inside(double r) const { return scale * (3.0 * r * r - a * a) / (a * a); }
};

}  // namespace detail

// Rotationally symmetric double well U(x) = scale (|x|^2 - a^2)^2 / (4 a^2),
// capped at radius 3a so the Hessian is globally bounded. The recorded
// constants are analytic:
//   L = scale (3 cap^2 - a^2) / a^2             (radial curvature at the cap)
//   dim = 1: m = 2 scale at R = a               (u'' >= m for |x| >= a)
//   dim > 1: m = scale at R = a sqrt(2)         (tangential curvature u'(r)/r binds)
inline ForceField make_double_well_target(int dim, double a, double scale) {
    if (dim < 1) throw std::invalid_argument("make_double_well_target: dim must be >= 1");
    if (!(a > 0.0)) throw std::invalid_argument("make_double_well_target: a must be positive");
    if (!(scale > 0.0))
        throw std::invalid_argument("make_double_well_target: scale must be positive");
    detail::DoubleWellProfile profile{a, scale, 3.0 * a};
    ForceField f;
    f.dim = dim;
    f.L = profile.ddu_inside(profile.cap);
    if (dim == 1) {
        f.m = 2.0 * scale;
        f.R = a;
    } else {
        f.m = scale;
        f.R = a * std::sqrt(2.0);
    }
    f.hessian_lipschitz = 6.0 * scale * profile.cap / (a * a);
    f.eval = [profile](const Vec& x, const GradientIndex&) {
        double r = norm(x);
        if (r == 0.0) return Vec(x.size(), 0.0);
        return (profile.du(r) / r) * x;
    };
    f.potential = [profile](const Vec& x) { return profile.u(norm(x)); };
    return f;
}

// Average of p components drawn from the given family. Constants combine as
// m = min m_i, L = max L_i, R = max R_i, which keeps every batch average
// inside the assumption class.
inline ForceField make_minibatch_target(std::vector<ForceField> components, int p,
                                        std::optional<double> variance_bound = std::nullopt) {
    if (components.empty())
        throw std::invalid_argument("make_minibatch_target: needs at least one component");
    int n = static_cast<int>(components.size());
    if (p < 1 || p > n)
        throw std::invalid_argument("make_minibatch_target: p must be in [1, component_count]");
    int dim = components.front().dim;
    double m = components.front().m, L = components.front().L, R = components.front().R;
    for (const auto& c : components) {
        if (c.dim != dim)
            throw std::invalid_argument("make_minibatch_target: component dims differ");
        m = std::min(m, c.m);
        L = std::max(L, c.L);
        R = std::max(R, c.R);
    }

    double c_u;
    if (variance_bound) {
        c_u = *variance_bound;
    } else {
        // Monte Carlo estimate of sup_x E|g_theta(x) - g(x)|^2 for a single
        // uniformly drawn component, maximized over sampled points.
        c_u = 0.0;
        for (int trial = 0; trial < 64; ++trial) {
            Vec x(dim);
            for (int i = 0; i < dim; ++i)
                x[i] = 4.0 * rng_normal(0x5eedu, 7u, static_cast<std::uint32_t>(trial),
                                        static_cast<std::uint32_t>(i));
            Vec mean(dim, 0.0);
            std::vector<Vec> g(n);
            for (int i = 0; i < n; ++i) {
                g[i] = components[i](x, GradientIndex::full());
                axpy(1.0, g[i], mean);
            }
            for (auto& v : mean) v /= n;
            double var = 0.0;
            for (int i = 0; i < n; ++i) {
                Vec d = g[i] - mean;
                var += dot(d, d);
            }
            c_u = std::max(c_u, var / n);
        }
    }

    ForceField f;
    f.dim = dim;
    f.m = m;
    f.L = L;
    f.R = R;
    auto comps = std::make_shared<std::vector<ForceField>>(std::move(components));
    f.stochastic = StochasticInfo{p, n, c_u};
    f.eval = [comps](const Vec& x, const GradientIndex& theta) {
        Vec out(x.size(), 0.0);
        if (theta.deterministic()) {
            for (const auto& c : *comps) axpy(1.0, c(x, GradientIndex::full()), out);
            for (auto& v : out) v /= static_cast<double>(comps->size());
            return out;
        }
        for (auto id : theta.ids) {
            if (id < 0 || id >= static_cast<std::int32_t>(comps->size()))
                throw std::invalid_argument("GradientIndex: component id out of range");
            axpy(1.0, (*comps)[id](x, GradientIndex::full()), out);
        }
        for (auto& v : out) v /= static_cast<double>(theta.ids.size());
        return out;
    };
    bool have_potentials = true;
    for (const auto& c : *comps)
        if (!c.potential) have_potentials = false;
    if (have_potentials) {
        f.potential = [comps](const Vec& x) {
            double s = 0.0;
            for (const auto& c : *comps) s += c.potential(x);
            return s / static_cast<double>(comps->size());
        };
    }
    return f;
}

// Mixture-of-shifted-quadratics family: component i has gradient
// curvature * (x - mu_i e_1) with centers evenly spaced in [-offset, offset].
// The full-batch drift is curvature * x when the centers average to zero.
inline ForceField make_minibatch_gaussian_mixture(int dim, double curvature, double offset,
                                                  int component_count, int p) {
    if (component_count < 2)
        throw std::invalid_argument("minibatch_gaussian_mixture: needs >= 2 components");
    if (!(curvature > 0.0))
        throw std::invalid_argument("minibatch_gaussian_mixture: curvature must be positive");
    std::vector<ForceField> comps;
    std::vector<double> centers(component_count);
    double mean_center = 0.0;
    for (int i = 0; i < component_count; ++i) {
        centers[i] = -offset + 2.0 * offset * i / (component_count - 1);
        mean_center += centers[i];
    }
    mean_center /= component_count;
    for (int i = 0; i < component_count; ++i) centers[i] -= mean_center;

    double second_moment = 0.0;
    for (int i = 0; i < component_count; ++i) {
        double mu = centers[i];
        ForceField c;
        c.dim = dim;
        c.m = curvature;
        c.L = curvature;
        c.R = 0.0;
        c.eval = [curvature, mu](const Vec& x, const GradientIndex&) {
            Vec r = curvature * x;
            r[0] -= curvature * mu;
            return r;
        };
        c.potential = [curvature, mu](const Vec& x) {
            double s = 0.5 * curvature * dot(x, x);
            return s - curvature * mu * x[0] + 0.5 * curvature * mu * mu;
        };
        comps.push_back(std::move(c));
        second_moment += mu * mu;
    }
    // Exact single-draw variance of the component gradient at any x.
    double c_u = curvature * curvature * second_moment / component_count;
    return make_minibatch_target(std::move(comps), p, c_u);
}

}  // namespace sgghmc
