#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace imbalab {

using Vec2 = std::array<double, 2>;

/// Deterministic random source. The uniform/normal transforms are spelled
/// out here (instead of the std distributions, whose algorithms are
/// implementation-defined) so the same seed yields the same stream on any
/// standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; generates pairs, caches the spare.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Vec2 normal2() {
        const double a = normal();
        const double b = normal();
        return {a, b};
    }

    /// Uniform integer in [0, n), unbiased.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Derives decoupled seed streams (dataset vs. init vs. training vs. eval)
/// from one user seed. splitmix64 of seed xor tag.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed ^ (tag * 0x9e3779b97f4a7c15ULL);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace imbalab
