#include "pdw/link.hpp"

#include <algorithm>

namespace pdw {

LinkSimulator::LinkSimulator(preamble::PreambleSpec spec, preamble::OfdmParams params,
                             preamble::PulseShape pulse)
    : params_(params), pulse_(std::move(pulse)) {
    layout_ = preamble::PreambleLayout::from(spec, params_);
    preamble_ = preamble::build_preamble(spec, params_);
    lts_ref_ = preamble::lts_reference(spec, params_);
    const auto shaped = preamble::upsample_filter(preamble_, pulse_.os_factor, pulse_.taps);
    const std::size_t extent = preamble_.size() * pulse_.os_factor;
    nominal_power_ = mean_power(std::span(shaped.samples).first(extent));
}

double LinkSimulator::oversampled_rate_hz() const {
    return params_.base_sample_rate_hz * static_cast<double>(pulse_.os_factor);
}

ComplexSignal LinkSimulator::receive(std::size_t lead, std::size_t trail, bool with_packet,
                                     const LinkConditions& cond) const {
    const std::size_t total = lead + preamble_.size() + trail;
    ComplexSignal x;
    x.sample_rate_hz = params_.base_sample_rate_hz;
    x.samples.assign(total, 0.0);
    if (with_packet)
        std::copy(preamble_.samples.begin(), preamble_.samples.end(),
                  x.samples.begin() + static_cast<std::ptrdiff_t>(lead));

    const std::size_t os = pulse_.os_factor;
    const auto x_os = preamble::upsample_filter(x, os, pulse_.taps);

    channel::ChannelConfig cfg(cond.taps);
    cfg.snr_db = cond.snr_db;
    cfg.cfo_hz = cond.cfo_hz;
    cfg.timing_offset_samples = cond.timing_offset_samples;
    cfg.seed = cond.noise_seed;
    if (with_packet) {
        // Calibrate against the convolved preamble over its own extent.
        const auto conv = channel::convolve(x_os.samples, cfg.taps());
        const auto begin = std::min(conv.size(), lead * os);
        const auto len = std::min(conv.size() - begin, preamble_.size() * os);
        cfg.reference_power = mean_power(std::span(conv).subspan(begin, len));
    } else {
        cfg.reference_power = nominal_power_;
    }
    const auto y_os = channel::apply_channel(x_os, cfg);

    channel::RxFrontendConfig rx{pulse_.taps, os, 0};
    auto y = channel::rx_frontend(y_os, rx);
    y.samples.resize(total);
    return y;
}

}  // namespace pdw
