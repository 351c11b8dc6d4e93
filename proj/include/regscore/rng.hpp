#pragma once

#include <cstdint>
#include <random>

namespace regscore {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(a) ^ (b + 0x632BE59BD9B4E019ULL));
}

/// mt19937_64 with library-independent uniform draws. The standard
/// distributions are implementation-defined, which would make weights and
/// splits differ between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % bound;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace regscore
