#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "pdw/signal.hpp"

// Received-signal model y_os = (x_os * h) e^{j2πf_off n/fs} + w at the
// oversampled rate, followed by the matched-filter/decimate front end.

namespace pdw::channel {

// Exponential power-delay profile standing in for indoor model B.
struct ModelBProfile {
    double rms_delay_spread_s = 80e-9;
    double truncation_factor = 5.0;  // taps with delay <= factor * rms are kept
};

// Mean tap powers (summing to 1) on the 1/rate_hz grid. The decay is solved so
// the truncated discrete profile has exactly the configured RMS delay spread.
std::vector<double> model_b_power_profile(double rate_hz, const ModelBProfile& profile = {});

// RMS delay spread of a power profile sampled every 1/rate_hz seconds.
double rms_delay_spread(std::span<const double> powers, double rate_hz);

// One Rayleigh realisation of the profile, normalised to sum |h_k|^2 = 1.
std::vector<Complex> draw_model_b_taps(std::uint64_t seed, double os_rate_hz,
                                       const ModelBProfile& profile = {});

class ChannelConfig {
public:
    ChannelConfig() = default;
    // taps are normalised to unit energy here; all-zero taps are rejected.
    explicit ChannelConfig(std::vector<Complex> taps);

    const std::vector<Complex>& taps() const { return taps_; }
    void set_taps(std::vector<Complex> taps);

    double snr_db = std::numeric_limits<double>::infinity();  // +inf disables noise
    double cfo_hz = 0.0;
    double timing_offset_samples = 0.0;
    std::uint64_t seed = 0;
    // Signal power the noise is calibrated against. Unset: mean power of the
    // convolved input over its full extent.
    std::optional<double> reference_power;

private:
    std::vector<Complex> taps_{Complex(1.0, 0.0)};
};

nlohmann::json to_json(const ChannelConfig& cfg);
ChannelConfig channel_from_json(const nlohmann::json& j);

// Full linear convolution; output length = a + b - 1.
std::vector<Complex> convolve(std::span<const Complex> a, std::span<const Complex> b);
// Multiplies x[n] by e^{j2π cfo n / rate} in place.
void apply_cfo(std::span<Complex> x, double cfo_hz, double rate_hz);
// Delays by `delay` samples: integer part by prepending zeros, fractional part
// by linear interpolation on the (oversampled) grid.
std::vector<Complex> delay_signal(std::span<const Complex> x, double delay);
// Noise variance that yields snr_db against signal_power.
double noise_variance(double signal_power, double snr_db);

// Convolve with taps, rotate by the CFO, delay by the timing offset, then add
// AWGN at the configured SNR. Throws std::invalid_argument on empty input.
ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelConfig& cfg);

struct RxFrontendConfig {
    std::vector<double> matched_taps;  // the transmit pulse taps
    std::size_t os_factor = 4;
    std::size_t decimation_phase = 0;
};

// Matched filter (scaled by 1/os_factor) and decimation. Sample n of the output
// is the filter output at index (taps - 1) + decimation_phase + n * os_factor,
// which compensates the Tx + Rx group delay so a clean loopback aligns with the
// base-rate transmit stream.
ComplexSignal rx_frontend(const ComplexSignal& sig, const RxFrontendConfig& cfg);

}  // namespace pdw::channel
