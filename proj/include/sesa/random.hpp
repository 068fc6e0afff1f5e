#pragma once

#include <cstdint>

namespace sesa {

/// Counter-based 64-bit generator.
///
/// Output i is splitmix64_mix(seed + (i + 1) * 0x9E3779B97F4A7C15), so every
/// draw is a pure function of (seed, counter). All random decisions in the
/// library go through this type; nothing uses <random> distributions, whose
/// output is implementation-defined.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_{seed} {}

    std::uint64_t next_u64();

    /// Uniform integer in [0, bound) by rejection (bound > 0).
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, second discarded).
    double normal();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

/// Seed for an independent stream, e.g. trial t or epoch e of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sesa
