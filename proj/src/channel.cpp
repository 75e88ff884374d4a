#include "pdw/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pdw/random.hpp"

namespace pdw::channel {

namespace {

std::vector<double> exponential_profile(std::size_t n_taps, double ratio) {
    std::vector<double> p(n_taps);
    double acc = 0.0;
    for (std::size_t k = 0; k < n_taps; ++k) {
        p[k] = std::pow(ratio, static_cast<double>(k));
        acc += p[k];
    }
    for (double& v : p) v /= acc;
    return p;
}

}  // namespace

double rms_delay_spread(std::span<const double> powers, double rate_hz) {
    double total = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < powers.size(); ++k) {
        const double d = static_cast<double>(k) / rate_hz;
        total += powers[k];
        m1 += powers[k] * d;
        m2 += powers[k] * d * d;
    }
    if (total <= 0.0) return 0.0;
    m1 /= total;
    m2 /= total;
    return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

std::vector<double> model_b_power_profile(double rate_hz, const ModelBProfile& profile) {
    if (rate_hz <= 0.0) throw std::invalid_argument("model B: rate must be positive");
    const double ts = 1.0 / rate_hz;
    const double max_delay = profile.truncation_factor * profile.rms_delay_spread_s;
    const auto n_taps = static_cast<std::size_t>(std::floor(max_delay / ts + 1e-9)) + 1;
    if (n_taps == 1 || profile.rms_delay_spread_s <= 0.0) return {1.0};

    // RMS spread grows monotonically with the decay ratio; bisect for the target.
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto p = exponential_profile(n_taps, mid);
        if (rms_delay_spread(p, rate_hz) < profile.rms_delay_spread_s)
            lo = mid;
        else
            hi = mid;
    }
    return exponential_profile(n_taps, 0.5 * (lo + hi));
}

std::vector<Complex> draw_model_b_taps(std::uint64_t seed, double os_rate_hz,
                                       const ModelBProfile& profile) {
    const auto powers = model_b_power_profile(os_rate_hz, profile);
    Rng rng(seed);
    std::vector<Complex> taps(powers.size());
    double energy = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) {
        taps[k] = rng.complex_normal(powers[k]);
        energy += std::norm(taps[k]);
    }
    if (energy <= 0.0) {
        taps.assign(taps.size(), 0.0);
        taps[0] = 1.0;
        return taps;
    }
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& t : taps) t *= scale;
    return taps;
}

ChannelConfig::ChannelConfig(std::vector<Complex> taps) { set_taps(std::move(taps)); }

void ChannelConfig::set_taps(std::vector<Complex> taps) {
    double energy = 0.0;
    for (const auto& t : taps) energy += std::norm(t);
    if (taps.empty() || !(energy > 0.0) || !std::isfinite(energy))
        throw std::invalid_argument("channel taps must have finite non-zero energy");
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& t : taps) t *= scale;
    taps_ = std::move(taps);
}

nlohmann::json to_json(const ChannelConfig& cfg) {
    auto taps = nlohmann::json::array();
    for (const auto& t : cfg.taps()) taps.push_back({t.real(), t.imag()});
    nlohmann::json j = {
        {"taps", taps},
        {"snr_db", std::isfinite(cfg.snr_db) ? nlohmann::json(cfg.snr_db) : nlohmann::json("inf")},
        {"cfo_hz", cfg.cfo_hz},
        {"timing_offset_samples", cfg.timing_offset_samples},
        {"seed", cfg.seed},
    };
    if (cfg.reference_power) j["reference_power"] = *cfg.reference_power;
    return j;
}

ChannelConfig channel_from_json(const nlohmann::json& j) {
    std::vector<Complex> taps;
    for (const auto& t : j.at("taps")) taps.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
    ChannelConfig cfg(std::move(taps));
    const auto& snr = j.at("snr_db");
    if (snr.is_string()) {
        if (snr.get<std::string>() != "inf") throw std::invalid_argument("snr_db: expected number or \"inf\"");
        cfg.snr_db = std::numeric_limits<double>::infinity();
    } else {
        cfg.snr_db = snr.get<double>();
        if (!std::isfinite(cfg.snr_db)) throw std::invalid_argument("snr_db must be finite");
    }
    cfg.cfo_hz = j.value("cfo_hz", 0.0);
    cfg.timing_offset_samples = j.value("timing_offset_samples", 0.0);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("reference_power")) cfg.reference_power = j["reference_power"].get<double>();
    return cfg;
}

std::vector<Complex> convolve(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<Complex> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Complex x = a[i];
        if (x == Complex(0.0, 0.0)) continue;
        for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += x * b[k];
    }
    return out;
}

void apply_cfo(std::span<Complex> x, double cfo_hz, double rate_hz) {
    if (cfo_hz == 0.0) return;
    const double w = 2.0 * std::numbers::pi * cfo_hz / rate_hz;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double phase = w * static_cast<double>(n);
        x[n] *= Complex(std::cos(phase), std::sin(phase));
    }
}

std::vector<Complex> delay_signal(std::span<const Complex> x, double delay) {
    if (delay < 0.0) throw std::invalid_argument("timing offset must be non-negative");
    const auto whole = static_cast<std::size_t>(std::floor(delay));
    const double frac = delay - static_cast<double>(whole);
    std::vector<Complex> out(whole + x.size() + (frac > 0.0 ? 1 : 0), 0.0);
    if (frac == 0.0) {
        std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(whole));
        return out;
    }
    // out[whole + n] = (1 - frac) x[n] + frac x[n - 1]
    for (std::size_t n = 0; n <= x.size(); ++n) {
        const Complex cur = n < x.size() ? x[n] : Complex(0.0, 0.0);
        const Complex prev = n > 0 ? x[n - 1] : Complex(0.0, 0.0);
        out[whole + n] = (1.0 - frac) * cur + frac * prev;
    }
    return out;
}

double noise_variance(double signal_power, double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

ComplexSignal apply_channel(const ComplexSignal& sig, const ChannelConfig& cfg) {
    if (sig.empty()) throw std::invalid_argument("apply_channel: empty signal");
    if (std::isnan(cfg.snr_db) || (std::isinf(cfg.snr_db) && cfg.snr_db < 0.0))
        throw std::invalid_argument("apply_channel: invalid snr_db");

    auto y = convolve(sig.samples, cfg.taps());
    const double signal_power = cfg.reference_power ? *cfg.reference_power : mean_power(y);
    apply_cfo(y, cfg.cfo_hz, sig.sample_rate_hz);
    if (cfg.timing_offset_samples != 0.0) y = delay_signal(y, cfg.timing_offset_samples);

    const double var = noise_variance(signal_power, cfg.snr_db);
    if (var > 0.0) {
        Rng rng(cfg.seed);
        for (auto& v : y) v += rng.complex_normal(var);
    }
    return {std::move(y), sig.sample_rate_hz};
}

ComplexSignal rx_frontend(const ComplexSignal& sig, const RxFrontendConfig& cfg) {
    if (cfg.os_factor == 0) throw std::invalid_argument("rx_frontend: os_factor must be >= 1");
    if (cfg.matched_taps.empty()) throw std::invalid_argument("rx_frontend: empty matched filter");
    if (cfg.decimation_phase >= cfg.os_factor)
        throw std::invalid_argument("rx_frontend: decimation_phase must be < os_factor");

    const auto& h = cfg.matched_taps;
    const double gain = 1.0 / static_cast<double>(cfg.os_factor);
    const std::size_t full_len = sig.size() + h.size() - 1;
    const std::size_t first = h.size() - 1 + cfg.decimation_phase;

    ComplexSignal out;
    out.sample_rate_hz = sig.sample_rate_hz / static_cast<double>(cfg.os_factor);
    if (sig.empty() || first >= full_len) return out;
    const std::size_t count = (full_len - 1 - first) / cfg.os_factor + 1;
    out.samples.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t idx = first + n * cfg.os_factor;
        // Filter output at idx: sum_k h[k] s[idx - k] over valid input indices.
        const std::size_t k_lo = idx >= sig.size() ? idx - sig.size() + 1 : 0;
        const std::size_t k_hi = std::min(h.size() - 1, idx);
        Complex acc = 0.0;
        for (std::size_t k = k_lo; k <= k_hi; ++k) acc += h[k] * sig.samples[idx - k];
        out.samples[n] = acc * gain;
    }
    return out;
}

}  // namespace pdw::channel
