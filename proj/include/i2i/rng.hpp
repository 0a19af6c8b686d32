#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace i2i {

// All randomness in the toolkit flows from one master seed through
// split_seed(master, purpose, index). The mapping is fixed so that runs are
// reproducible across builds: FNV-1a over the purpose string, a golden-ratio
// stride per index, then one splitmix64 finalization.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t split_seed(std::uint64_t master, std::string_view purpose,
                                std::uint64_t index = 0) {
    return splitmix64(master ^ fnv1a64(purpose) ^ (0x9E3779B97F4A7C15ull * (index + 1)));
}

/// Deterministic random stream. std::mt19937_64 has a portable sequence; the
/// value mappings below are written out explicitly because the standard
/// distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller (no cached second value).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace i2i
