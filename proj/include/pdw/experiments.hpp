#pragma once

#include <cstdint>
#include <vector>

#include "pdw/cnn.hpp"
#include "pdw/corrsync.hpp"
#include "pdw/dataset.hpp"
#include "pdw/link.hpp"

// Streaming trials for the correlation detector: each trial is a noise lead-in,
// an NDP (or silence) and a noise tail, run through the full link.

namespace pdw::experiments {

struct ConventionalTrials {
    std::size_t trials = 2000;
    double snr_lo_db = 0.0;
    double snr_hi_db = 25.0;
    bool multipath = true;
    channel::ModelBProfile profile{};
    double cfo_max_hz = 18000.0;
    std::uint64_t seed = 1;
    std::size_t lead_min = 200;
    std::size_t lead_jitter = 100;  // lead = lead_min + U{0..jitter-1}
    std::size_t trail = 200;
    bool packets_only = false;  // otherwise even trials carry a packet, odd trials are noise
};

ConventionalTrials trials_from_dataset(const dataset::DatasetSpec& spec, std::size_t trials, std::uint64_t seed);

// One verdict per trial; label is the true start index (or -1).
std::vector<cnn::Verdict> run_conventional(const LinkSimulator& link, const corrsync::CorrDetector& detector,
                                           const ConventionalTrials& cfg, bool coarse_only = false);

corrsync::CorrDetector make_conventional_detector(const LinkSimulator& link,
                                                  corrsync::CorrDetectorConfig cfg = {});

}  // namespace pdw::experiments
