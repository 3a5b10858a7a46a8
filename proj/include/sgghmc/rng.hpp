#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sgghmc {

// Philox4x32-10 counter-based generator. Every draw in the project is
// addressed by (seed, member, step, slot), so independent ensemble members
// and coupled-chain replays never share or coordinate mutable stream state.
namespace philox {

inline constexpr std::uint32_t kM0 = 0xD2511F53u;
inline constexpr std::uint32_t kM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

}  // namespace philox

// One 128-bit block per (seed, member, step, slot) address.
inline std::array<std::uint32_t, 4> rng_block(std::uint64_t seed, std::uint32_t member,
                                              std::uint32_t step, std::uint32_t slot) {
    return philox::block({member, step, slot, 0u},
                         {static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32)});
}

// Uniform on (0,1) from 53 random bits; never returns 0 or 1.
inline double uniform_from_block(const std::array<std::uint32_t, 4>& b, int half) {
    std::uint64_t x = half == 0
                          ? (static_cast<std::uint64_t>(b[0]) << 32) | b[1]
                          : (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

inline double rng_uniform(std::uint64_t seed, std::uint32_t member, std::uint32_t step,
                          std::uint32_t slot) {
    return uniform_from_block(rng_block(seed, member, step, slot), 0);
}

// One standard normal per slot (Box-Muller, cosine branch).
inline double rng_normal(std::uint64_t seed, std::uint32_t member, std::uint32_t step,
                         std::uint32_t slot) {
    auto b = rng_block(seed, member, step, slot);
    double u1 = uniform_from_block(b, 0);
    double u2 = uniform_from_block(b, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Fixed slot layout of one chain iteration. Slots not drawn (deterministic
// gradients, unused coupling uniform, Verlet runs) cost nothing, so u=0 and
// u=1 runs with the same seed see identical refreshment and index draws.
//
//   [0, dim)                                   refreshment normal, per coordinate
//   dim                                        coupling uniform (reflection accept/reject)
//   dim+1 + k*(2p+1) + j,   j in [0,p)         minibatch ids for theta_k
//   dim+1 + k*(2p+1) + p + j, j in [0,p)       minibatch ids for theta'_k
//   dim+1 + k*(2p+1) + 2p                      midpoint uniform u_{kh}
struct SlotLayout {
    int dim;
    int batch;  // p for minibatch targets, 0 otherwise

    std::uint32_t refresh(int i) const { return static_cast<std::uint32_t>(i); }
    std::uint32_t coupling() const { return static_cast<std::uint32_t>(dim); }
    std::uint32_t theta(int k, int j) const {
        return static_cast<std::uint32_t>(dim + 1 + k * (2 * batch + 1) + j);
    }
    std::uint32_t theta_prime(int k, int j) const {
        return static_cast<std::uint32_t>(dim + 1 + k * (2 * batch + 1) + batch + j);
    }
    std::uint32_t midpoint(int k) const {
        return static_cast<std::uint32_t>(dim + 1 + k * (2 * batch + 1) + 2 * batch);
    }
};

// Address of one chain iteration in the (seed, member, step) keyspace.
struct DrawContext {
    std::uint64_t seed = 0;
    std::uint32_t member = 0;
    std::uint32_t step = 0;

    double normal(std::uint32_t slot) const { return rng_normal(seed, member, step, slot); }
    double uniform(std::uint32_t slot) const { return rng_uniform(seed, member, step, slot); }
};

}  // namespace sgghmc
