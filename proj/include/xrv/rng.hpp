#pragma once

#include <cmath>
#include <cstdint>

namespace xrv {

// splitmix64 step. Fully specified so seeded runs are bit-identical across
// platforms, unlike std::normal_distribution.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Asymmetric seed combine (mix(a, b) != mix(b, a)). Derives per-image,
// per-transform, and per-fold sub-seeds from a master seed, so parallel and
// serial schedules produce identical streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller. Draws two uniforms per call and keeps the cosine branch;
    // no spare caching so the stream position is a pure function of call count.
    double normal(double mean, double stddev) {
        double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * 3.141592653589793 * u2);
    }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling over the top multiple of n to avoid modulo bias.
        std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by the deterministic Rng.
template <typename Container>
void shuffle(Container& c, Rng& rng) {
    if (c.size() < 2) return;
    for (std::size_t i = c.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        std::swap(c[i], c[j]);
    }
}

}  // namespace xrv
