#include "pdw/preamble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pdw/random.hpp"

namespace pdw::preamble {

namespace {

constexpr std::uint64_t kStfSeed = 0x535446;      // "STF"
constexpr std::uint64_t kLtfSeed = 0x4C5446;      // "LTF"
constexpr std::uint64_t kSigSeed = 0x534947;      // "SIG"
constexpr std::uint64_t kLtf2Seed = 0x4C544632;   // "LTF2"
constexpr std::uint64_t kFillerMaskSeed = 0x46494C;
constexpr std::size_t kLtfSearchCandidates = 4096;
constexpr int kOccupiedEdge = 13;  // bins ±1..±13 carry energy

std::size_t bin_index(int k, std::size_t n) {
    const auto nn = static_cast<int>(n);
    return static_cast<std::size_t>(((k % nn) + nn) % nn);
}

std::vector<Complex> bpsk_occupied(Rng& rng, std::size_t n) {
    std::vector<Complex> freq(n, 0.0);
    for (int k = -kOccupiedEdge; k <= kOccupiedEdge; ++k) {
        if (k == 0) continue;
        freq[bin_index(k, n)] = (rng.bits() & 1U) ? 1.0 : -1.0;
    }
    return freq;
}

// Sign mask applied to the filler symbols so consecutive symbols differ.
std::vector<double> filler_mask(std::size_t symbol, std::size_t n) {
    Rng rng(derive_seed(kFillerMaskSeed, symbol));
    std::vector<double> mask(n);
    for (auto& m : mask) m = (rng.bits() & 1U) ? 1.0 : -1.0;
    return mask;
}

std::vector<Complex> periodic_extension(std::span<const Complex> base, std::size_t len,
                                        std::size_t phase) {
    std::vector<Complex> out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = base[(i + phase) % base.size()];
    return out;
}

double oversampled_papr(std::span<const Complex> freq) {
    // Zero-pad the spectrum 4x to approximate the continuous-time peak.
    const std::size_t n = freq.size();
    std::vector<Complex> padded(4 * n, 0.0);
    for (std::size_t k = 0; k < n / 2; ++k) padded[k] = freq[k];
    for (std::size_t k = n / 2; k < n; ++k) padded[3 * n + k] = freq[k];
    return papr(idft(padded));
}

std::vector<Complex> parse_vector(const nlohmann::json& arr, const char* name) {
    if (!arr.is_array()) throw std::invalid_argument(std::string(name) + " must be an array");
    std::vector<Complex> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_array() || v.size() != 2)
            throw std::invalid_argument(std::string(name) + " entries must be [re, im]");
        out.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    return out;
}

nlohmann::json dump_vector(std::span<const Complex> v) {
    auto arr = nlohmann::json::array();
    for (const auto& c : v) arr.push_back({c.real(), c.imag()});
    return arr;
}

}  // namespace

std::size_t OfdmParams::cp_samples() const {
    return static_cast<std::size_t>(std::lround(cp_duration_us * base_sample_rate_hz / 1e6));
}

std::size_t OfdmParams::symbol_samples() const {
    return static_cast<std::size_t>(std::lround(symbol_duration_us * base_sample_rate_hz / 1e6));
}

void OfdmParams::validate() const {
    if (n_subcarriers == 0) throw std::invalid_argument("n_subcarriers must be positive");
    if (std::abs(static_cast<double>(n_subcarriers) * subcarrier_spacing_hz - base_sample_rate_hz) >
        1e-6 * base_sample_rate_hz)
        throw std::invalid_argument("base_sample_rate_hz must equal n_subcarriers * spacing");
    if (cp_samples() + n_subcarriers != symbol_samples())
        throw std::invalid_argument("symbol duration must equal CP + N samples");
}

void PreambleSpec::validate(std::size_t n) const {
    auto check = [n](const std::vector<Complex>& v, const char* name) {
        if (v.size() != n)
            throw std::invalid_argument(std::string(name) + " must have " + std::to_string(n) +
                                        " entries, got " + std::to_string(v.size()));
    };
    check(stf_freq, "stf_freq");
    check(ltf_freq, "ltf_freq");
    check(sig_freq, "sig_freq");
    check(ltf2_freq, "ltf2_freq");
    if (n_stf_symbols == 0 || n_ltf1_symbols == 0)
        throw std::invalid_argument("field symbol counts must be positive");
    if (n_stf_symbols + n_ltf1_symbols + 1 > kPreambleSymbols)
        throw std::invalid_argument("STF + LTF1 + SIG exceed the preamble length");
}

PreambleLayout PreambleLayout::from(const PreambleSpec& spec, const OfdmParams& params) {
    PreambleLayout l;
    const std::size_t sym = params.symbol_samples();
    l.stf_begin = 0;
    l.stf_len = spec.n_stf_symbols * sym;
    l.ltf1_begin = l.stf_len;
    l.ltf1_len = spec.n_ltf1_symbols * sym;
    l.lts_len = 2 * params.n_subcarriers;
    if (l.ltf1_len < 2 * l.lts_len)
        throw std::invalid_argument("LTF1 too short for two long training symbols");
    l.lts1_begin = l.ltf1_begin + (l.ltf1_len - 2 * l.lts_len);
    l.lts2_begin = l.lts1_begin + l.lts_len;
    l.sig_begin = l.ltf1_begin + l.ltf1_len;
    l.filler_begin = l.sig_begin + sym;
    l.total = kPreambleSymbols * sym;
    return l;
}

std::vector<Complex> idft(std::span<const Complex> freq) {
    const std::size_t n = freq.size();
    std::vector<Complex> out(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t) {
        Complex acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                                 static_cast<double>(n);
            acc += freq[k] * Complex(std::cos(phase), std::sin(phase));
        }
        out[t] = acc * scale;
    }
    return out;
}

std::vector<Complex> dft(std::span<const Complex> time) {
    const std::size_t n = time.size();
    std::vector<Complex> out(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                                 static_cast<double>(n);
            acc += time[t] * Complex(std::cos(phase), std::sin(phase));
        }
        out[k] = acc * scale;
    }
    return out;
}

double papr(std::span<const Complex> x) {
    double peak = 0.0;
    for (const auto& v : x) peak = std::max(peak, std::norm(v));
    const double avg = mean_power(x);
    return avg > 0.0 ? peak / avg : 0.0;
}

PreambleSpec default_spec(const OfdmParams& params) {
    params.validate();
    const std::size_t n = params.n_subcarriers;
    PreambleSpec spec;

    // STF: k = ±2, ±6, ±10 so that e^{j2πk·16/N} = 1 and no shorter period exists.
    spec.stf_freq.assign(n, 0.0);
    {
        Rng rng(kStfSeed);
        const double mag = std::sqrt(26.0 / 6.0);  // per-sample power matches the LTF
        for (int k : {-10, -6, -2, 2, 6, 10}) {
            const auto b = rng.bits();
            const double re = (b & 1U) ? 1.0 : -1.0;
            const double im = (b & 2U) ? 1.0 : -1.0;
            spec.stf_freq[bin_index(k, n)] = Complex(re, im) * (mag / std::sqrt(2.0));
        }
    }

    {
        Rng rng(kLtfSeed);
        double best = 0.0;
        for (std::size_t c = 0; c < kLtfSearchCandidates; ++c) {
            auto cand = bpsk_occupied(rng, n);
            const double p = oversampled_papr(cand);
            if (c == 0 || p < best) {
                best = p;
                spec.ltf_freq = std::move(cand);
            }
        }
    }
    {
        Rng rng(kSigSeed);
        spec.sig_freq = bpsk_occupied(rng, n);
    }
    {
        Rng rng(kLtf2Seed);
        spec.ltf2_freq = bpsk_occupied(rng, n);
    }
    return spec;
}

nlohmann::json to_json(const PreambleSpec& spec) {
    return {
        {"n", spec.stf_freq.size()},
        {"n_stf_symbols", spec.n_stf_symbols},
        {"n_ltf1_symbols", spec.n_ltf1_symbols},
        {"stf_freq", dump_vector(spec.stf_freq)},
        {"ltf_freq", dump_vector(spec.ltf_freq)},
        {"sig_freq", dump_vector(spec.sig_freq)},
        {"ltf2_freq", dump_vector(spec.ltf2_freq)},
    };
}

PreambleSpec spec_from_json(const nlohmann::json& j) {
    PreambleSpec spec;
    const auto n = j.at("n").get<std::size_t>();
    spec.stf_freq = parse_vector(j.at("stf_freq"), "stf_freq");
    spec.ltf_freq = parse_vector(j.at("ltf_freq"), "ltf_freq");
    spec.sig_freq = parse_vector(j.at("sig_freq"), "sig_freq");
    spec.ltf2_freq = parse_vector(j.at("ltf2_freq"), "ltf2_freq");
    spec.n_stf_symbols = j.value("n_stf_symbols", std::size_t{4});
    spec.n_ltf1_symbols = j.value("n_ltf1_symbols", std::size_t{4});
    spec.validate(n);
    return spec;
}

PreambleSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open preamble spec: " + path.string());
    return spec_from_json(nlohmann::json::parse(in));
}

void save_spec(const PreambleSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write preamble spec: " + path.string());
    out << to_json(spec).dump(2) << '\n';
}

ComplexSignal ofdm_symbol(std::span<const Complex> freq, const OfdmParams& params) {
    params.validate();
    if (freq.size() != params.n_subcarriers)
        throw std::invalid_argument("ofdm_symbol: expected " +
                                    std::to_string(params.n_subcarriers) + " subcarriers");
    const auto body = idft(freq);
    const std::size_t cp = params.cp_samples();
    ComplexSignal out;
    out.sample_rate_hz = params.base_sample_rate_hz;
    out.samples.reserve(cp + body.size());
    out.samples.insert(out.samples.end(), body.end() - static_cast<std::ptrdiff_t>(cp), body.end());
    out.samples.insert(out.samples.end(), body.begin(), body.end());
    return out;
}

ComplexSignal build_preamble(const PreambleSpec& spec, const OfdmParams& params) {
    params.validate();
    spec.validate(params.n_subcarriers);
    const auto layout = PreambleLayout::from(spec, params);
    const std::size_t n = params.n_subcarriers;

    ComplexSignal out;
    out.sample_rate_hz = params.base_sample_rate_hz;
    out.samples.reserve(layout.total);

    const auto stf = periodic_extension(idft(spec.stf_freq), layout.stf_len, 0);
    out.samples.insert(out.samples.end(), stf.begin(), stf.end());

    // GI2 is the tail of the LTS, so the field is a periodic extension aligned
    // such that each LTS starts on an IDFT period boundary.
    const std::size_t gi = layout.ltf1_len - 2 * layout.lts_len;
    const auto ltf1 = periodic_extension(idft(spec.ltf_freq), layout.ltf1_len, n - gi % n);
    out.samples.insert(out.samples.end(), ltf1.begin(), ltf1.end());

    const auto sig = ofdm_symbol(spec.sig_freq, params);
    out.samples.insert(out.samples.end(), sig.samples.begin(), sig.samples.end());

    std::vector<Complex> masked(n);
    for (std::size_t s = 0; out.samples.size() < layout.total; ++s) {
        const auto mask = filler_mask(s, n);
        for (std::size_t k = 0; k < n; ++k) masked[k] = spec.ltf2_freq[k] * mask[k];
        const auto sym = ofdm_symbol(masked, params);
        out.samples.insert(out.samples.end(), sym.samples.begin(), sym.samples.end());
    }
    return out;
}

ComplexSignal lts_reference(const PreambleSpec& spec, const OfdmParams& params) {
    params.validate();
    spec.validate(params.n_subcarriers);
    ComplexSignal out;
    out.sample_rate_hz = params.base_sample_rate_hz;
    out.samples = periodic_extension(idft(spec.ltf_freq), 2 * params.n_subcarriers, 0);
    return out;
}

std::vector<double> root_raised_cosine(std::size_t n_taps, std::size_t os_factor, double rolloff) {
    if (n_taps == 0 || os_factor == 0) throw std::invalid_argument("rrc: empty design");
    if (rolloff <= 0.0 || rolloff > 1.0) throw std::invalid_argument("rrc: rolloff in (0, 1]");
    const double pi = std::numbers::pi;
    const double center = (static_cast<double>(n_taps) - 1.0) / 2.0;
    std::vector<double> h(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) {
        const double t = (static_cast<double>(i) - center) / static_cast<double>(os_factor);
        if (std::abs(t) < 1e-12) {
            h[i] = 1.0 - rolloff + 4.0 * rolloff / pi;
        } else if (std::abs(std::abs(4.0 * rolloff * t) - 1.0) < 1e-9) {
            h[i] = rolloff / std::sqrt(2.0) *
                   ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * rolloff)) +
                    (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * rolloff)));
        } else {
            h[i] = (std::sin(pi * t * (1.0 - rolloff)) +
                    4.0 * rolloff * t * std::cos(pi * t * (1.0 + rolloff))) /
                   (pi * t * (1.0 - std::pow(4.0 * rolloff * t, 2)));
        }
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v *= static_cast<double>(os_factor) / sum;
    return h;
}

std::vector<double> windowed_sinc(std::size_t n_taps, std::size_t os_factor) {
    if (n_taps == 0 || os_factor == 0) throw std::invalid_argument("windowed_sinc: empty design");
    const double pi = std::numbers::pi;
    const double fc = 0.5 / static_cast<double>(os_factor);
    const double center = (static_cast<double>(n_taps) - 1.0) / 2.0;
    std::vector<double> h(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) {
        const double m = static_cast<double>(i) - center;
        const double sinc = std::abs(m) < 1e-12 ? 2.0 * fc : std::sin(2.0 * pi * fc * m) / (pi * m);
        const double w = n_taps == 1 ? 1.0
                                     : 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(i) /
                                                              static_cast<double>(n_taps - 1));
        h[i] = sinc * w;
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v *= static_cast<double>(os_factor) / sum;
    return h;
}

PulseShape PulseShape::standard(std::size_t os_factor) {
    return {os_factor, root_raised_cosine(48, os_factor, 0.5)};
}

ComplexSignal upsample_filter(const ComplexSignal& sig, std::size_t os_factor,
                              std::span<const double> taps) {
    if (os_factor == 0) throw std::invalid_argument("upsample_filter: os_factor must be >= 1");
    if (taps.empty()) throw std::invalid_argument("upsample_filter: empty filter");
    ComplexSignal out;
    out.sample_rate_hz = sig.sample_rate_hz * static_cast<double>(os_factor);
    if (sig.empty()) return out;
    out.samples.assign(sig.size() * os_factor + taps.size() - 1, 0.0);
    // Only every os_factor-th stuffed sample is non-zero.
    for (std::size_t j = 0; j < sig.size(); ++j) {
        const Complex x = sig.samples[j];
        Complex* dst = out.samples.data() + j * os_factor;
        for (std::size_t k = 0; k < taps.size(); ++k) dst[k] += x * taps[k];
    }
    return out;
}

}  // namespace pdw::preamble
