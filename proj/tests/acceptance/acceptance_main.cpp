// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "helpers.hpp"
#include "nn_check.hpp"
#include "pdw/cli.hpp"
#include "pdw/cnn.hpp"
#include "pdw/corrsync.hpp"
#include "pdw/dataset.hpp"
#include "pdw/experiments.hpp"
#include "pdw/flops.hpp"
#include "pdw/nn.hpp"
#include "pdw/preamble.hpp"
#include "pdw/random.hpp"

namespace fs = std::filesystem;
using namespace pdw;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Criterion 1: 560 samples, STF repeats every 16 samples.
Outcome waveform_structure() {
    const auto spec = preamble::default_spec();
    const auto x = preamble::build_preamble(spec);
    const auto layout = preamble::PreambleLayout::from(spec, {});
    double worst = 0.0;
    for (std::size_t n = layout.stf_begin; n + 16 < layout.stf_begin + layout.stf_len; ++n)
        worst = std::max(worst, std::abs(x.samples[n + 16] - x.samples[n]));
    const bool ok = x.size() == 560 && x.sample_rate_hz == 1e6 && worst < 1e-9;
    return {ok, fmt::format("length {} at {:g} Hz, STF period-16 error {:.3e}", x.size(), x.sample_rate_hz, worst)};
}

// Criterion 2: M(τ) scale invariance and |Λ| CFO invariance.
Outcome metric_invariants() {
    const std::size_t L = 80, n = 2 * L + 40;
    Rng cfo_rng(77);
    double worst_scale = 0.0, worst_cfo = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto y = testutil::random_complex(n, 1000 + s, 1.0);
        const double f = cfo_rng.uniform(-0.5, 0.5);
        std::vector<Complex> rot(n);
        for (std::size_t i = 0; i < n; ++i) rot[i] = y[i] * std::polar(1.0, 2.0 * M_PI * f * double(i));
        for (std::size_t tau = 0; tau + 2 * L <= n; tau += 8) {
            const double m = corrsync::timing_metric(y, tau, L).value;
            for (double c : {1e-3, 1.0, 1e3}) {
                std::vector<Complex> yc(y);
                for (auto& v : yc) v *= c;
                worst_scale = std::max(worst_scale, std::abs(corrsync::timing_metric(yc, tau, L).value - m));
            }
            const double a = std::abs(corrsync::autocorr(y, tau, L));
            const double b = std::abs(corrsync::autocorr(rot, tau, L));
            worst_cfo = std::max(worst_cfo, std::abs(a - b) / std::max(a, 1.0));
        }
    }
    return {worst_scale <= 1e-12 && worst_cfo <= 1e-10,
            fmt::format("worst scale deviation {:.3e}, worst |Λ| CFO deviation {:.3e}", worst_scale, worst_cfo)};
}

// Criterion 3: conventional detector at 20 dB, AWGN only.
Outcome conventional_detector() {
    const LinkSimulator link;
    const auto det = experiments::make_conventional_detector(link);
    experiments::ConventionalTrials t;
    t.snr_lo_db = t.snr_hi_db = 20.0;
    t.multipath = false;
    t.cfo_max_hz = 0.0;
    t.seed = 3;

    t.trials = 1000;
    t.packets_only = true;
    const auto packets = experiments::run_conventional(link, det, t);
    std::size_t within = 0;
    for (const auto& v : packets)
        if (v.result.detected && std::abs(double(v.result.start_sample) - v.label) <= 2.0) ++within;
    const double frac = double(within) / double(packets.size());

    t.trials = 2000;
    t.packets_only = false;
    t.seed = 4;
    const auto m = cnn::score(experiments::run_conventional(link, det, t));
    const bool ok = frac >= 0.99 && m.miss_rate < 0.01 && m.false_alarm_rate < 0.01;
    return {ok, fmt::format("within ±2: {:.2f}% of 1000; miss {:.3f}%, false alarm {:.3f}% over 2000", 100 * frac,
                            100 * m.miss_rate, 100 * m.false_alarm_rate)};
}

// Criterion 4: finite-difference gradients and Adam first step.
Outcome nn_engine() {
    Rng rng(4040);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto ci = static_cast<std::size_t>(rng.uniform_int(1, 5));
        const auto c1 = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const auto f1 = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const auto c2 = static_cast<std::size_t>(rng.uniform_int(1, 5));
        const auto f2 = static_cast<std::size_t>(rng.uniform_int(1, 4));
        const auto T = f1 + f2 + static_cast<std::size_t>(rng.uniform_int(0, 10));
        const auto hidden = static_cast<std::size_t>(rng.uniform_int(1, 5));
        const auto outs = static_cast<std::size_t>(rng.uniform_int(1, 3));
        const std::size_t K2 = T - f1 - f2 + 2;

        nn::Sequential net;
        net.add(nn::Conv1d(ci, c1, f1));
        net.add(nn::Relu{});
        net.add(nn::Conv1d(c1, c2, f2));
        net.add(nn::Relu{});
        net.add(nn::Flatten{});
        net.add(nn::Dense(c2 * K2, hidden));
        net.add(nn::Relu{});
        net.add(nn::Dense(hidden, outs));
        std::uint64_t k = 500 + 100 * trial;
        for (auto block : net.parameters()) {
            const auto v = testutil::random_real(block.size(), ++k, -0.8, 0.8);
            std::copy(v.begin(), v.end(), block.begin());
        }
        nn::Matrix x(ci, T);
        x.data = testutil::random_real(ci * T, 9000 + trial);
        const auto c = testutil::random_real(outs, 7000 + trial, -1.0, 1.0);
        const auto r = testutil::check_gradients(net, x, c);
        worst = std::max({worst, r.worst_param, r.worst_input});
    }

    std::vector<double> theta = testutil::random_real(64, 5, -3.0, 3.0);
    const auto before = theta;
    const auto g = testutil::random_real(64, 6, -10.0, 10.0);
    std::vector<std::span<double>> params{theta};
    auto st = nn::AdamState::for_parameters(params);
    nn::adam_step(params, {g}, st, {});
    double step_err = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i)
        step_err = std::max(step_err, std::abs(std::abs(theta[i] - before[i]) - 0.001));

    return {worst < 1e-4 && step_err < 1e-6,
            fmt::format("worst gradient relative error {:.3e} over 50 shapes; Adam first-step error {:.3e}", worst,
                        step_err)};
}

struct Trained {
    cnn::Metrics trained;
    double untrained_mae = 0.0;
    bool untrained_gated = true;
    double seconds = 0.0;
};

// Desk-scale recipe shared by criteria 5 and 6.
Trained train_desk_scale(std::size_t B) {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = dataset::load_spec(fs::path(PDW_DATA_DIR) / "dataset_B160.json");
    spec.block_len = B;
    spec.n_blocks = 11428;  // round(0.7 n) = 8000 training blocks
    const auto blocks = dataset::generate(spec);
    const auto parts = dataset::split(blocks, spec.split, spec.seed);
    const auto train = dataset::select(blocks, parts.train);
    const auto val = dataset::select(blocks, parts.val);
    const auto test = dataset::select(blocks, parts.test);

    cnn::CnnDetectorConfig cfg;
    cfg.block_len = B;
    auto model = cnn::build_model(cfg, 1);

    Trained out;
    const auto before = cnn::evaluate(model, test);
    if (before.mae) {
        out.untrained_mae = *before.mae;
    } else {
        // Nothing passes the gate: score the clamped, rounded output on every start block.
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& b : test) {
            if (b.label < 0.0f) continue;
            const double p = std::clamp(model.predict(std::span<const float>(b.amplitudes)), 0.0, double(B - 1));
            sum += std::abs(std::round(p) - b.label);
            ++n;
        }
        out.untrained_mae = sum / double(n);
        out.untrained_gated = false;
    }

    nn::TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 80;
    tc.seed = 1;
    cnn::train_detector(model, train, val, tc);
    out.trained = cnn::evaluate(model, test);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("  B={}: {} train / {} test blocks, {:.0f} s\n", B, train.size(), test.size(), out.seconds);
    return out;
}

Outcome training_trend(const Trained& r) {
    const auto& bins = r.trained.mae_per_snr_bin;
    const auto lo = bins.front().mae, hi = bins.back().mae;
    if (!r.trained.mae || !lo || !hi) return {false, "trained model produced no detections in a required bin"};
    const double gain = r.untrained_mae / *r.trained.mae;
    const double spread = std::max(*lo, *hi) / std::min(*lo, *hi);
    const bool a = gain >= 5.0, b = spread < 3.0;
    return {a && b, fmt::format("(a) {} untrained {:.2f} / trained {:.2f} = {:.1f}x; (b) {} MAE [0,5] {:.2f}, "
                                "[20,25] {:.2f}, ratio {:.2f}",
                                a ? "ok" : "FAIL", r.untrained_mae, *r.trained.mae, gain, b ? "ok" : "FAIL", *lo,
                                *hi, spread)};
}

Outcome miss_false_trend(const Trained& b40, const Trained& b160) {
    const auto& m40 = b40.trained;
    const auto& m160 = b160.trained;
    const bool rates = m40.miss_rate < 0.2 && m40.false_alarm_rate < 0.2 && m160.miss_rate < 0.2 &&
                       m160.false_alarm_rate < 0.2;
    const bool trend = m160.false_alarm_rate <= m40.false_alarm_rate;
    return {rates && trend,
            fmt::format("B=40 miss {:.2f}% FA {:.2f}%; B=160 miss {:.2f}% FA {:.2f}%; rates<20% {}; FA trend {}",
                        100 * m40.miss_rate, 100 * m40.false_alarm_rate, 100 * m160.miss_rate,
                        100 * m160.false_alarm_rate, rates ? "ok" : "FAIL", trend ? "ok" : "FAIL")};
}

// Criterion 7: formulas against an instrumented forward pass.
Outcome flops_model() {
    bool counters = true;
    std::vector<std::pair<std::size_t, flops::FlopsReport>> rows;
    for (std::size_t B : cnn::kSupportedBlockLengths) {
        cnn::CnnDetectorConfig cfg;
        cfg.block_len = B;
        const auto model = cnn::build_model(cfg, 1);
        nn::OpCounter ctr;
        model.net.forward(cnn::prepare_input(testutil::random_real(B, B, 0.0, 1.0), cfg), &ctr);
        const auto r = flops::model_flops(cfg, 1e6);
        counters = counters && ctr.muls == r.totals().muls;
        rows.emplace_back(B, r);
    }
    corrsync::CorrDetectorConfig corr;
    const auto conv = flops::conventional_flops(corr, 1e6);
    const std::uint64_t W = corr.window();
    const bool hand = conv.total_per_block == (6 * W + 4) + (7 * W - 3) && conv.mflops == 1041.0;
    rows.emplace_back(W, conv);

    const auto dir = testutil::scratch_dir("acceptance_flops");
    flops::write_comparison_csv(rows, dir / "flops_comparison.csv");
    std::ifstream in(dir / "flops_comparison.csv");
    std::string line;
    std::getline(in, line);
    double cnn40 = -1.0, conventional = -1.0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.at(0) == "cnn_B40") cnn40 = std::stod(f.at(4));
        if (f.at(0) == "conventional") conventional = std::stod(f.at(4));
    }
    const bool below = cnn40 >= 0.0 && cnn40 < conventional;
    return {counters && hand && below,
            fmt::format("multiply counters match for 6 block lengths: {}; conventional {:.0f} MFLOPS (hand count {}); "
                        "CNN B=40 {:.3f} MFLOPS",
                        counters ? "yes" : "no", conventional, (6 * W + 4) + (7 * W - 3), cnn40)};
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "pdw");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

// Criterion 8: the CLI pipeline twice into separate directories.
Outcome reproducibility() {
    const auto root = testutil::scratch_dir("acceptance_repro");
    const auto spec = root / "spec.json";
    std::ofstream(spec) << nlohmann::json{{"block_len", 80}, {"n_blocks", 600}, {"seed", 11}}.dump();
    std::vector<std::string> files{"data/blocks_B80.blocks.bin", "data/blocks_B80.manifest.json", "model.bin",
                                   "model.bin.loss.csv", "eval.csv", "eval.summary.csv"};
    for (const char* run : {"a", "b"}) {
        const auto d = root / run;
        if (cli({"gen", "--spec", spec.string(), "--out", (d / "data").string()}) != 0 ||
            cli({"train", "--data", (d / "data").string(), "--block-len", "80", "--epochs", "4", "--seed", "2",
                 "--out", (d / "model.bin").string()}) != 0 ||
            cli({"eval", "--model", (d / "model.bin").string(), "--data", (d / "data").string(), "--out",
                 (d / "eval.csv").string()}) != 0)
            return {false, fmt::format("pipeline run {} failed", run)};
    }
    for (const auto& f : files) {
        if (testutil::slurp(root / "a" / f) != testutil::slurp(root / "b" / f))
            return {false, fmt::format("{} differs between runs", f)};
    }
    return {true, fmt::format("{} artefacts byte-identical across two runs", files.size())};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("criterion {}: {} ({}; {:.1f} s)\n", id, o.pass ? "PASS" : "FAIL", o.detail, s);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    };

    report(1, waveform_structure);
    report(2, metric_invariants);
    report(3, conventional_detector);
    report(4, nn_engine);

    Trained b160, b40;
    bool trained = true;
    std::string train_error;
    try {
        b160 = train_desk_scale(160);
        b40 = train_desk_scale(40);
    } catch (const std::exception& e) {
        trained = false;
        train_error = e.what();
    }
    report(5, [&] { return trained ? training_trend(b160) : Outcome{false, train_error}; });
    report(6, [&] { return trained ? miss_false_trend(b40, b160) : Outcome{false, train_error}; });
    if (trained && !b160.untrained_gated)
        fmt::print("  note: untrained baseline scored ungated (no untrained output crossed the threshold)\n");

    report(7, flops_model);
    report(8, reproducibility);
    return failures == 0 ? 0 : 1;
}
