#include "pdw/experiments.hpp"

#include "pdw/parallel.hpp"
#include "pdw/random.hpp"

namespace pdw::experiments {

ConventionalTrials trials_from_dataset(const dataset::DatasetSpec& spec, std::size_t trials, std::uint64_t seed) {
    ConventionalTrials t;
    t.trials = trials;
    t.snr_lo_db = spec.snr_lo_db;
    t.snr_hi_db = spec.snr_hi_db;
    t.multipath = spec.channel.multipath;
    t.profile = spec.channel.profile;
    t.cfo_max_hz = spec.channel.cfo_max_hz;
    t.seed = seed;
    return t;
}

corrsync::CorrDetector make_conventional_detector(const LinkSimulator& link, corrsync::CorrDetectorConfig cfg) {
    const auto& l = link.layout();
    cfg.L_S = l.stf_len;
    return corrsync::CorrDetector(cfg, link.lts_reference().samples,
                                  {l.lts1_begin - l.stf_begin, l.lts2_begin - l.stf_begin});
}

std::vector<cnn::Verdict> run_conventional(const LinkSimulator& link, const corrsync::CorrDetector& detector,
                                           const ConventionalTrials& cfg, bool coarse_only) {
    std::vector<cnn::Verdict> out(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        const bool packet = cfg.packets_only || i % 2 == 0;
        LinkConditions cond;
        cond.snr_db = rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db);
        cond.cfo_hz = rng.uniform(-cfg.cfo_max_hz, cfg.cfo_max_hz);
        const auto tap_seed = rng.bits();
        if (cfg.multipath) cond.taps = channel::draw_model_b_taps(tap_seed, link.oversampled_rate_hz(), cfg.profile);
        cond.noise_seed = rng.bits();
        const std::size_t lead =
            cfg.lead_min +
            (cfg.lead_jitter > 0 ? static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.lead_jitter) - 1))
                                 : 0);
        const auto y = link.receive(lead, cfg.trail, packet, cond);
        const auto r = coarse_only ? detector.detect_coarse(y.samples) : detector.detect(y.samples);
        out[i] = {packet ? static_cast<double>(lead) : -1.0, cond.snr_db, r};
    });
    return out;
}

}  // namespace pdw::experiments
