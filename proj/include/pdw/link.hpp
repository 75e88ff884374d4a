#pragma once

#include <cstdint>
#include <vector>

#include "pdw/channel.hpp"
#include "pdw/preamble.hpp"

namespace pdw {

// Per-transmission impairments.
struct LinkConditions {
    double snr_db = 20.0;
    double cfo_hz = 0.0;
    double timing_offset_samples = 0.0;  // oversampled samples
    std::vector<Complex> taps{Complex(1.0, 0.0)};
    std::uint64_t noise_seed = 0;
};

// Transmit chain -> channel -> receive front end, producing base-rate y.
class LinkSimulator {
public:
    explicit LinkSimulator(preamble::PreambleSpec spec = preamble::default_spec(),
                           preamble::OfdmParams params = {},
                           preamble::PulseShape pulse = preamble::PulseShape::standard());

    // Base-rate stream of lead + preamble + trail samples. With with_packet the
    // preamble starts at index `lead`; otherwise the same span is silent and
    // the stream is noise only, at the variance the SNR implies against the
    // nominal preamble power.
    ComplexSignal receive(std::size_t lead, std::size_t trail, bool with_packet,
                          const LinkConditions& cond) const;

    const ComplexSignal& preamble() const { return preamble_; }
    const ComplexSignal& lts_reference() const { return lts_ref_; }
    const preamble::PreambleLayout& layout() const { return layout_; }
    const preamble::PulseShape& pulse() const { return pulse_; }
    double oversampled_rate_hz() const;
    // Mean power of the pulse-shaped preamble over its extent.
    double nominal_power() const { return nominal_power_; }

private:
    preamble::OfdmParams params_;
    preamble::PulseShape pulse_;
    preamble::PreambleLayout layout_;
    ComplexSignal preamble_;
    ComplexSignal lts_ref_;
    double nominal_power_ = 0.0;
};

}  // namespace pdw
