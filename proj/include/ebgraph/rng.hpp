#pragma once

#include <cstdint>
#include <random>

namespace ebgraph {

/// Reproducible random stream: std::mt19937_64 (output fixed by the C++
/// standard) with explicit conversions, so every platform sees the same draws.
/// std:: distributions are implementation-defined and are not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, bound) by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % bound;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ebgraph
