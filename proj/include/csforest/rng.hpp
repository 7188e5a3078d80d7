#ifndef CSFOREST_RNG_HPP
#define CSFOREST_RNG_HPP

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace csforest {

/// Mixes a 64-bit value (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent seed from a master seed, a purpose tag and up to
/// two indices. Every random stream in the library comes from here, so
/// results do not depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t h = mix64(master ^ hash_tag(tag));
    h = mix64(h ^ mix64(a + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ mix64(b + 0x8cb92ba72f3d8dd7ULL));
    return h;
}

/// Platform-stable random source. The engine output is fixed by the C++
/// standard; distributions are implemented here because the standard
/// library ones are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Unbiased (rejection sampling).
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t range = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % range);
    }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    std::size_t binomial(std::size_t trials, double p) {
        std::size_t hits = 0;
        for (std::size_t t = 0; t < trials; ++t) hits += uniform() < p ? 1 : 0;
        return hits;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace csforest

#endif // CSFOREST_RNG_HPP
