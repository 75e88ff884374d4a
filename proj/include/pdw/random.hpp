#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace pdw {

// SplitMix64 finaliser; maps (seed, index) to an independent substream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Seeded generator whose variates depend only on the raw mt19937_64 stream,
// so results are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();
    // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex_normal(double variance);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pdw
