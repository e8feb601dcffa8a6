#pragma once

#include <cstdint>

namespace msynth {

/// SplitMix64 (Steele, Lea & Flood). Fixed algorithm, so every stream it
/// produces is identical across compilers and platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30u)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27u)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31u);
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next() >> 11u) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive). Rejection sampling, no modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
        if (span == 0) {
            return static_cast<std::int64_t>(next());
        }
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
        std::uint64_t v = next();
        while (v >= limit) {
            v = next();
        }
        return lo + static_cast<std::int64_t>(v % span);
    }

private:
    std::uint64_t state_;
};

/// Mixes several integers into one seed (used to derive per-instance streams).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    SplitMix64 m(a ^ 0x6a09e667f3bcc909ull);
    std::uint64_t h = m.next();
    SplitMix64 m2(h ^ (b * 0xbb67ae8584caa73bull));
    h = m2.next();
    SplitMix64 m3(h ^ (c * 0x3c6ef372fe94f82bull));
    return m3.next();
}

}  // namespace msynth
