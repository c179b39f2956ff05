#pragma once

#include <array>
#include <cstdint>

#include "pfvar/gaussian.hpp"

namespace pfvar {

/// SplitMix64 finalizer. Used for seed expansion and stream derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

/// Derives an independent 64-bit seed from a master seed, a stream tag and a
/// replicate index. The derivation is the SplitMix64 finalizer applied twice
/// along a golden-ratio sequence, so that (master, stream, index) triples map
/// to well-separated generator states.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
    constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = mix64(master + kGolden * (stream + 1));
    return mix64(x + kGolden * (index + 1));
}

/// xoshiro256** generator (Blackman & Vigna, public domain reference
/// implementation), seeded by SplitMix64 expansion of a 64-bit seed.
///
/// Draw sequences are a pure function of the seed, which is what gives every
/// filter run its "same seed, same build, identical output" guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed + 0x9e3779b97f4a7c15ULL;
        for (auto& word : state_) {
            word = mix64(sm);
            sm += 0x9e3779b97f4a7c15ULL;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform draw strictly inside (0, 1): 53-bit mantissa, half-ulp offset.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard Gaussian draw by inversion of uniform01(); one draw consumes
    /// exactly one 64-bit word, which keeps stream accounting trivial.
    double normal() { return normal_quantile(uniform01()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace pfvar
