#pragma once

#include <cstdint>
#include <random>

namespace coverlab {

/// Seeded generator with platform-independent output.
///
/// std::mt19937_64's raw sequence is fixed by the standard, but the standard
/// distributions are not, so all sampling goes through the helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 mix of (base, stream); used to give every episode, trial and
/// worker its own independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace coverlab
