#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "pdw/signal.hpp"

// 1 MHz NDP preamble synthesis (STF, LTF1, SIG, filler) and transmit pulse
// shaping.
//
// Sample layout at 1 MHz with the default numerology (N = 32, 8-sample CP):
//
//   [  0, 160)  STF   periodic extension of the STF IDFT; period 16
//   [160, 192)  GI2   last 32 samples of the LTS
//   [192, 256)  LTS   two periods of the 32-point LTF IDFT
//   [256, 320)  LTS   repeat
//   [320, 360)  SIG   one CP-OFDM symbol
//   [360, 560)  filler, five CP-OFDM symbols

namespace pdw::preamble {

inline constexpr std::size_t kPreambleSymbols = 14;

struct OfdmParams {
    std::size_t n_subcarriers = 32;
    double subcarrier_spacing_hz = 31250.0;
    double cp_duration_us = 8.0;
    double symbol_duration_us = 40.0;
    double base_sample_rate_hz = 1e6;

    std::size_t cp_samples() const;
    std::size_t symbol_samples() const;
    // Throws std::invalid_argument if the numerology is inconsistent.
    void validate() const;
};

struct PreambleSpec {
    std::vector<Complex> stf_freq;
    std::vector<Complex> ltf_freq;
    std::vector<Complex> sig_freq;
    std::vector<Complex> ltf2_freq;
    std::size_t n_stf_symbols = 4;
    std::size_t n_ltf1_symbols = 4;

    void validate(std::size_t n_subcarriers) const;
};

// Sample offsets of each field for a given numerology.
struct PreambleLayout {
    std::size_t stf_begin = 0;
    std::size_t stf_len = 0;
    std::size_t ltf1_begin = 0;
    std::size_t ltf1_len = 0;
    std::size_t lts_len = 0;
    std::size_t lts1_begin = 0;  // absolute offset of the first full LTS
    std::size_t lts2_begin = 0;
    std::size_t sig_begin = 0;
    std::size_t filler_begin = 0;
    std::size_t total = 0;

    static PreambleLayout from(const PreambleSpec& spec, const OfdmParams& params);
};

// Default synthetic field contents. STF on bins {±2, ±6, ±10} (period 16),
// LTF on ±1..±13 chosen by a seeded PAPR search, SIG/LTF2 seeded BPSK.
PreambleSpec default_spec(const OfdmParams& params = {});

nlohmann::json to_json(const PreambleSpec& spec);
PreambleSpec spec_from_json(const nlohmann::json& j);
PreambleSpec load_spec(const std::filesystem::path& path);
void save_spec(const PreambleSpec& spec, const std::filesystem::path& path);

// Unitary inverse DFT (1/sqrt(N)). Subcarrier k is stored at index k mod N.
std::vector<Complex> idft(std::span<const Complex> freq);
std::vector<Complex> dft(std::span<const Complex> time);

// Peak-to-average power ratio (linear) of x.
double papr(std::span<const Complex> x);

ComplexSignal ofdm_symbol(std::span<const Complex> freq, const OfdmParams& params = {});
ComplexSignal build_preamble(const PreambleSpec& spec, const OfdmParams& params = {});
// One long training symbol (2N samples) as the receiver's local replica.
ComplexSignal lts_reference(const PreambleSpec& spec, const OfdmParams& params = {});

// Root-raised-cosine taps normalised to sum to os_factor (unit DC gain after
// zero-stuffing). A Tx/Rx pair of these is Nyquist at the symbol rate.
std::vector<double> root_raised_cosine(std::size_t n_taps, std::size_t os_factor, double rolloff);
// Hamming-windowed sinc lowpass with cutoff 0.5/os_factor cycles/sample,
// normalised to sum to os_factor.
std::vector<double> windowed_sinc(std::size_t n_taps, std::size_t os_factor);

struct PulseShape {
    std::size_t os_factor = 4;
    std::vector<double> taps;

    // 48-tap RRC, rolloff 0.5, at 4x.
    static PulseShape standard(std::size_t os_factor = 4);
    // Delay of one filter pass in oversampled samples.
    double group_delay() const { return (static_cast<double>(taps.size()) - 1.0) / 2.0; }
};

// Zero-stuff by os_factor then full linear convolution with taps.
// Output length = size * os_factor + taps - 1; rate scales by os_factor.
ComplexSignal upsample_filter(const ComplexSignal& sig, std::size_t os_factor,
                              std::span<const double> taps);

}  // namespace pdw::preamble
