#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace senet {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_string64(const char* s) {
    // FNV-1a, used to derive per-name seeds.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001B3ULL;
    return h;
}

/// xoshiro256** seeded through splitmix64. Fixed algorithm, identical
/// sequence for a given seed on every platform. normal() always consumes
/// exactly two raw draws so the four state words fully describe the
/// generator (no hidden cache to persist).
class Prng {
public:
    explicit Prng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64_next(sm);
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

    /// Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased-enough bounded draw via 128-bit multiply.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    bool coin() { return (next_u64() >> 63) != 0; }

    /// Standard normal via Box-Muller, two raw draws per call.
    double normal() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Normal(0, sigma) resampled until within [-2 sigma, 2 sigma].
    double trunc_normal(double sigma) {
        for (;;) {
            const double z = normal() * sigma;
            if (std::abs(z) <= 2.0 * sigma) return z;
        }
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = next_below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

/// Deterministic sub-seed for a named stream (parameter init, per-sample
/// generation). Independent of creation order.
inline std::uint64_t derive_seed(std::uint64_t seed, const char* name) {
    std::uint64_t sm = seed ^ hash_string64(name);
    return splitmix64_next(sm);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t sm = seed ^ (0x9E3779B97F4A7C15ULL + index * 0xD1B54A32D192ED03ULL);
    return splitmix64_next(sm);
}

}  // namespace senet
