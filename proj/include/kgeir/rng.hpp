#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kgeir {

// splitmix64; used to expand seeds and to derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** with hand-rolled distributions so that streams do not
// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return std::ldexp(static_cast<double>(next() >> 11), -53); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n >= 1
    int uniform_int(int n) {
        // rejection sampling keeps the draw exactly uniform
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return static_cast<int>(v % bound);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal, Box-Muller with a cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // independent child stream for a given index (per-student sessions etc.)
    Rng fork(std::uint64_t stream) const {
        std::uint64_t sm = s_[0] ^ (0x9e3779b97f4a7c15ULL + stream * 0xda942042e4dd58b5ULL);
        return Rng(splitmix64(sm));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace kgeir
