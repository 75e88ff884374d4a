#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pdw {

using Complex = std::complex<double>;

// Discrete-time complex-baseband samples with their sample rate.
struct ComplexSignal {
    std::vector<Complex> samples;
    double sample_rate_hz = 1e6;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    Complex operator[](std::size_t i) const { return samples[i]; }
    Complex& operator[](std::size_t i) { return samples[i]; }
};

struct DetectionResult {
    bool detected = false;
    long start_sample = -1;  // -1 whenever detected is false
    double score = 0.0;

    static DetectionResult none(double score = 0.0) { return {false, -1, score}; }
};

// Raised when a persisted file fails validation (truncation, checksum, version).
class CorruptFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised on NaN/Inf during optimisation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double mean_power(std::span<const Complex> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

}  // namespace pdw
