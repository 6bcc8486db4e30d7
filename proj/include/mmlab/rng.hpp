#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmlab {

// All randomness in the project flows through these helpers so that a run is
// reproducible from a single master seed. std::mt19937_64 is the generator;
// the distributions are hand-rolled because the std ones are
// implementation-defined and would break cross-compiler reproducibility.

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Purpose-scoped stream derivation: one master seed fans out into independent
// streams, so changing e.g. the training length never perturbs evaluation
// seeds. `purpose` is a small enum-like tag, `counter` indexes within it.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t counter = 0) {
    return splitmix64(splitmix64(master ^ (purpose * 0xd1342543de82ef95ULL)) + counter);
}

namespace seed_purpose {
inline constexpr std::uint64_t market = 1;
inline constexpr std::uint64_t agent = 2;
inline constexpr std::uint64_t calibration = 3;
inline constexpr std::uint64_t train_env = 4;
inline constexpr std::uint64_t train_policy = 5;
inline constexpr std::uint64_t train_batch = 6;
inline constexpr std::uint64_t train_eval = 7;
inline constexpr std::uint64_t weight_init = 8;
inline constexpr std::uint64_t evaluation = 9;
inline constexpr std::uint64_t noise = 10;
inline constexpr std::uint64_t grid = 11;
}  // namespace seed_purpose

// Uniform on the open interval (0, 1): 2^53 equispaced midpoints. Open on
// both ends so log() and inverse CDFs stay finite.
inline double uniform01(Rng& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform on [lo, hi).
inline double uniform(Rng& g, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(g() >> 11) * 0x1.0p-53);
}

inline double exponential(Rng& g, double rate) {
    return -std::log(uniform01(g)) / rate;
}

// Box-Muller, no caching: always consumes exactly two uniforms.
inline double normal(Rng& g) {
    const double u1 = uniform01(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace mmlab
