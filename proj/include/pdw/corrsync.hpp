#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "pdw/signal.hpp"

// Correlation-based packet detection: delayed autocorrelation timing metric,
// threshold trigger, plateau refinement (coarse), then LTS cross-correlation
// (fine).

namespace pdw::corrsync {

enum class MetricVariant {
    // lag = window = l_window (80): one half of the STF against the other.
    HalfStf,
    // lag = l_s (16), window = L_S - l_s (144): the literal short-symbol form.
    ShortSymbol,
};

struct CorrDetectorConfig {
    std::size_t l_window = 80;
    std::size_t l_s = 16;
    std::size_t L_S = 160;
    double trigger_threshold = 0.5;
    std::size_t trigger_run = 8;  // consecutive samples above threshold to open the search
    double plateau_fraction = 0.9;
    std::size_t fine_search_span = 12;
    std::size_t fine_segments = 4;  // non-coherent segments of the LTS correlation
    MetricVariant variant = MetricVariant::HalfStf;

    std::size_t lag() const { return variant == MetricVariant::HalfStf ? l_window : l_s; }
    std::size_t window() const { return variant == MetricVariant::HalfStf ? l_window : L_S - l_s; }
    // Throws std::invalid_argument on inconsistent values.
    void validate() const;
};

// Λ_τ = Σ_{i<L} conj(y[τ+i]) y[τ+i+L]; requires τ + 2L <= len.
Complex autocorr(std::span<const Complex> y, std::size_t tau, std::size_t L);
// P_τ = Σ_{i<L} |y[τ+i+L]|^2 (second half-window energy).
double window_power(std::span<const Complex> y, std::size_t tau, std::size_t L);

struct MetricValue {
    double value = 0.0;
    bool degenerate = false;  // P_τ == 0
};
// M(τ) = |Λ_τ|^2 / P_τ^2, or 0 with the degenerate flag when P_τ == 0.
MetricValue timing_metric(std::span<const Complex> y, std::size_t tau, std::size_t L);

// Generalised lag/window pair used by the trace.
Complex autocorr(std::span<const Complex> y, std::size_t tau, std::size_t lag, std::size_t window);
double window_power(std::span<const Complex> y, std::size_t tau, std::size_t lag, std::size_t window);

// M(τ) for every τ with τ + lag + window <= len, by direct summation.
std::vector<double> metric_trace(std::span<const Complex> y, std::size_t lag, std::size_t window);
std::vector<double> metric_trace(std::span<const Complex> y, const CorrDetectorConfig& cfg);

// Midpoint of the nearest samples left and right of `peak` whose metric falls
// below fraction * metric[peak]. Falls back to `peak` if either side never drops.
std::size_t plateau_refine(std::span<const double> metric, std::size_t peak, double fraction);

DetectionResult coarse_detect(std::span<const Complex> y, const CorrDetectorConfig& cfg);

// Offsets of the two LTS copies relative to the packet start.
struct LtsPlacement {
    std::size_t first = 192;
    std::size_t second = 256;
};

// Refines `coarse` by correlating lts_ref against both LTS copies for every
// candidate start within ±fine_search_span. Returns coarse when no candidate
// fits inside y or the reference has no energy.
long fine_detect(std::span<const Complex> y, long coarse, std::span<const Complex> lts_ref,
                 const CorrDetectorConfig& cfg, const LtsPlacement& placement = {});

// Coarse then fine.
class CorrDetector {
public:
    CorrDetector(CorrDetectorConfig cfg, std::vector<Complex> lts_ref, LtsPlacement placement = {});

    DetectionResult detect(std::span<const Complex> y) const;
    DetectionResult detect_coarse(std::span<const Complex> y) const;
    const CorrDetectorConfig& config() const { return cfg_; }

private:
    CorrDetectorConfig cfg_;
    std::vector<Complex> lts_ref_;
    LtsPlacement placement_;
};

// Writes "index,metric" rows.
void write_metric_csv(std::span<const double> metric, const std::filesystem::path& path);

}  // namespace pdw::corrsync

namespace pdw::corrsync {

// Streaming form of Λ_τ and P_τ: push one sample per step and read the window
// that ends at the newest sample. Equivalent to the direct sums up to rounding.
class SlidingAutocorrelator {
public:
    SlidingAutocorrelator(std::size_t lag, std::size_t window);

    void push(Complex sample);
    // True once lag + window samples have been seen.
    bool ready() const { return seen_ >= span_; }
    Complex correlation() const { return corr_; }
    double power() const { return power_; }
    double metric() const;

private:
    Complex at(std::size_t age) const;  // age 0 = newest sample

    std::size_t lag_;
    std::size_t window_;
    std::size_t span_;
    std::vector<Complex> ring_;
    std::size_t head_ = 0;
    std::size_t seen_ = 0;
    Complex corr_{0.0, 0.0};
    double power_ = 0.0;
};

}  // namespace pdw::corrsync
