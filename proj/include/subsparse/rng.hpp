#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace subsparse {

/// 64-bit seed; identical seed implies identical sample streams.
struct RngSeed {
    std::uint64_t value = 0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic generator (xoshiro256** seeded via splitmix64). All
/// distributions are implemented locally so byte-identical replay does not
/// depend on standard-library internals.
class Rng {
public:
    explicit Rng(RngSeed seed) : seed_(seed.value) {
        std::uint64_t s = seed.value;
        for (auto& w : state_) w = detail::splitmix64(s);
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool coin() { return next_u64() & 1; }

    double sign() { return coin() ? 1.0 : -1.0; }

    double cauchy() {
        double u;
        do {
            u = uniform();
        } while (u == 0.5);
        return std::tan(std::numbers::pi * (u - 0.5));
    }

    /// Independent child stream for a labeled subtask.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t s = seed_ ^ (0xa0761d6478bd642fULL * (stream + 1));
        return Rng(RngSeed{detail::splitmix64(s)});
    }

    RngSeed fork_seed(std::uint64_t stream) const {
        std::uint64_t s = seed_ ^ (0xa0761d6478bd642fULL * (stream + 1));
        return RngSeed{detail::splitmix64(s)};
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

}  // namespace subsparse
