#include "pdw/corrsync.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

namespace pdw::corrsync {

void CorrDetectorConfig::validate() const {
    if (l_window == 0 || l_s == 0 || L_S <= l_s)
        throw std::invalid_argument("corrsync: window lengths must be positive and L_S > l_s");
    if (!(plateau_fraction > 0.0 && plateau_fraction < 1.0))
        throw std::invalid_argument("corrsync: plateau_fraction must be in (0, 1)");
    if (!(trigger_threshold >= 0.0 && trigger_threshold <= 1.0))
        throw std::invalid_argument("corrsync: trigger_threshold must be in [0, 1]");
    if (trigger_run == 0) throw std::invalid_argument("corrsync: trigger_run must be >= 1");
    if (fine_segments == 0) throw std::invalid_argument("corrsync: fine_segments must be >= 1");
}

Complex autocorr(std::span<const Complex> y, std::size_t tau, std::size_t lag, std::size_t window) {
    if (tau + lag + window > y.size()) throw std::invalid_argument("autocorr: window exceeds signal");
    Complex acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += std::conj(y[tau + i]) * y[tau + i + lag];
    return acc;
}

double window_power(std::span<const Complex> y, std::size_t tau, std::size_t lag, std::size_t window) {
    if (tau + lag + window > y.size())
        throw std::invalid_argument("window_power: window exceeds signal");
    double acc = 0.0;
    for (std::size_t i = 0; i < window; ++i) acc += std::norm(y[tau + i + lag]);
    return acc;
}

Complex autocorr(std::span<const Complex> y, std::size_t tau, std::size_t L) {
    return autocorr(y, tau, L, L);
}

double window_power(std::span<const Complex> y, std::size_t tau, std::size_t L) {
    return window_power(y, tau, L, L);
}

MetricValue timing_metric(std::span<const Complex> y, std::size_t tau, std::size_t L) {
    const double p = window_power(y, tau, L);
    if (p <= 0.0) return {0.0, true};
    return {std::norm(autocorr(y, tau, L)) / (p * p), false};
}

std::vector<double> metric_trace(std::span<const Complex> y, std::size_t lag, std::size_t window) {
    if (y.size() < lag + window) return {};
    const std::size_t n = y.size() - lag - window + 1;
    std::vector<double> m(n);
    // Direct sums per τ: exact zeros stay zero, so silent stretches never trigger.
    for (std::size_t tau = 0; tau < n; ++tau) {
        Complex c = 0.0;
        double p = 0.0;
        const Complex* a = y.data() + tau;
        const Complex* b = a + lag;
        for (std::size_t i = 0; i < window; ++i) {
            c += std::conj(a[i]) * b[i];
            p += std::norm(b[i]);
        }
        m[tau] = p > 0.0 ? std::norm(c) / (p * p) : 0.0;
    }
    return m;
}

std::vector<double> metric_trace(std::span<const Complex> y, const CorrDetectorConfig& cfg) {
    return metric_trace(y, cfg.lag(), cfg.window());
}

std::size_t plateau_refine(std::span<const double> metric, std::size_t peak, double fraction) {
    if (peak >= metric.size()) throw std::invalid_argument("plateau_refine: peak out of range");
    const double level = fraction * metric[peak];
    std::size_t left = peak;
    bool found_left = false;
    while (left > 0) {
        --left;
        if (metric[left] < level) {
            found_left = true;
            break;
        }
    }
    std::size_t right = peak;
    bool found_right = false;
    while (right + 1 < metric.size()) {
        ++right;
        if (metric[right] < level) {
            found_right = true;
            break;
        }
    }
    if (!found_left || !found_right) return peak;
    return static_cast<std::size_t>(std::lround(0.5 * static_cast<double>(left + right)));
}

DetectionResult coarse_detect(std::span<const Complex> y, const CorrDetectorConfig& cfg) {
    cfg.validate();
    const auto trace = metric_trace(y, cfg);
    if (trace.empty()) return DetectionResult::none();

    std::size_t run = 0;
    std::size_t first = trace.size();
    for (std::size_t tau = 0; tau < trace.size(); ++tau) {
        if (trace[tau] > cfg.trigger_threshold) {
            if (++run == cfg.trigger_run) {
                first = tau + 1 - run;
                break;
            }
        } else {
            run = 0;
        }
    }
    if (first == trace.size()) return DetectionResult::none();

    const std::size_t end = std::min(trace.size(), first + 2 * cfg.L_S);
    std::size_t peak = first;
    for (std::size_t tau = first; tau < end; ++tau)
        if (trace[tau] > trace[peak]) peak = tau;
    const auto start = plateau_refine(trace, peak, cfg.plateau_fraction);
    return {true, static_cast<long>(start), trace[peak]};
}

namespace {

double segmented_correlation(std::span<const Complex> y, std::size_t pos,
                             std::span<const Complex> ref, std::size_t segments) {
    const std::size_t seg_len = (ref.size() + segments - 1) / segments;
    double total = 0.0;
    for (std::size_t s = 0; s < ref.size(); s += seg_len) {
        const std::size_t e = std::min(ref.size(), s + seg_len);
        Complex acc = 0.0;
        for (std::size_t k = s; k < e; ++k) acc += std::conj(ref[k]) * y[pos + k];
        total += std::abs(acc);
    }
    return total;
}

}  // namespace

long fine_detect(std::span<const Complex> y, long coarse, std::span<const Complex> lts_ref,
                 const CorrDetectorConfig& cfg, const LtsPlacement& placement) {
    double ref_energy = 0.0;
    for (const auto& v : lts_ref) ref_energy += std::norm(v);
    if (lts_ref.empty() || ref_energy <= 0.0) return coarse;

    const long span = static_cast<long>(cfg.fine_search_span);
    const long need = static_cast<long>(placement.second + lts_ref.size());
    long best = coarse;
    double best_score = -1.0;
    for (long s = coarse - span; s <= coarse + span; ++s) {
        if (s < 0 || s + need > static_cast<long>(y.size())) continue;
        const auto base = static_cast<std::size_t>(s);
        const double score =
            segmented_correlation(y, base + placement.first, lts_ref, cfg.fine_segments) +
            segmented_correlation(y, base + placement.second, lts_ref, cfg.fine_segments);
        if (score > best_score) {
            best_score = score;
            best = s;
        }
    }
    return best;
}

CorrDetector::CorrDetector(CorrDetectorConfig cfg, std::vector<Complex> lts_ref, LtsPlacement placement)
    : cfg_(cfg), lts_ref_(std::move(lts_ref)), placement_(placement) {
    cfg_.validate();
}

DetectionResult CorrDetector::detect_coarse(std::span<const Complex> y) const {
    return coarse_detect(y, cfg_);
}

DetectionResult CorrDetector::detect(std::span<const Complex> y) const {
    auto result = coarse_detect(y, cfg_);
    if (result.detected)
        result.start_sample = fine_detect(y, result.start_sample, lts_ref_, cfg_, placement_);
    return result;
}

void write_metric_csv(std::span<const double> metric, const std::filesystem::path& path) {
    auto out = fmt::output_file(path.string());
    out.print("index,metric\n");
    for (std::size_t i = 0; i < metric.size(); ++i) out.print("{},{:.17g}\n", i, metric[i]);
}

SlidingAutocorrelator::SlidingAutocorrelator(std::size_t lag, std::size_t window)
    : lag_(lag), window_(window), span_(lag + window), ring_(lag + window + 1, 0.0) {
    if (lag == 0 || window == 0) throw std::invalid_argument("SlidingAutocorrelator: empty window");
}

Complex SlidingAutocorrelator::at(std::size_t age) const {
    const std::size_t n = ring_.size();
    return ring_[(head_ + n - 1 - age) % n];
}

void SlidingAutocorrelator::push(Complex sample) {
    ring_[head_] = sample;
    head_ = (head_ + 1) % ring_.size();
    ++seen_;
    // New pair: conj(x[t - lag]) x[t]; the pair leaving is conj(x[t-span]) x[t-window].
    if (seen_ > lag_) corr_ += std::conj(at(lag_)) * at(0);
    power_ += std::norm(at(0));
    if (seen_ > span_) corr_ -= std::conj(at(span_)) * at(window_);
    if (seen_ > window_) power_ -= std::norm(at(window_));
}

double SlidingAutocorrelator::metric() const {
    if (power_ <= 0.0) return 0.0;
    return std::norm(corr_) / (power_ * power_);
}

}  // namespace pdw::corrsync
