#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pdw/cnn.hpp"
#include "pdw/detail/binio.hpp"

using namespace pdw;
using namespace pdw::cnn;

namespace {

CnnDetectorConfig cfg_for(std::size_t B) {
    CnnDetectorConfig c;
    c.block_len = B;
    return c;
}

std::vector<double> positive_block(std::size_t B, std::uint64_t seed) {
    return testutil::random_real(B, seed, 0.0, 2.0);
}

LabeledBlock make_block(float label, float snr, std::size_t B = 40) {
    LabeledBlock b;
    b.amplitudes.assign(B, 1.0f);
    b.label = label;
    b.snr_db = snr;
    b.kind = label >= 0.0f ? BlockKind::Start : BlockKind::NoiseOnly;
    return b;
}

}  // namespace

TEST_CASE("config widths and validation") {
    auto c = cfg_for(160);
    CHECK(c.input_width() == 40);
    CHECK(c.conv1_width() == 33);
    CHECK(c.conv2_width() == 31);
    CHECK(c.flatten_size() == 155);

    c = cfg_for(40);
    CHECK(c.input_width() == 10);
    CHECK(c.conv1_width() == 3);
    CHECK(c.conv2_width() == 1);
    CHECK(c.flatten_size() == 5);

    for (std::size_t B : kSupportedBlockLengths) CHECK_NOTHROW(cfg_for(B).validate());
    CHECK_THROWS_AS(cfg_for(39).validate(), std::invalid_argument);
    CHECK_THROWS_AS(cfg_for(36).validate(), std::invalid_argument);  // width 9 < 10
    CHECK_THROWS_AS(build_model(cfg_for(39)), std::invalid_argument);
    CHECK(cfg_for(160) == cfg_for(160));
    CHECK_FALSE(cfg_for(160) == cfg_for(80));
}

TEST_CASE("block_to_channels examples") {
    const std::vector<double> block{0, 1, 2, 3, 4, 5, 6, 7};
    const auto m = block_to_channels(block, 4);
    REQUIRE(m.rows == 4);
    REQUIRE(m.cols == 2);
    CHECK(m(0, 0) == 0);
    CHECK(m(0, 1) == 4);
    CHECK(m(1, 0) == 1);
    CHECK(m(1, 1) == 5);
    CHECK(m(2, 0) == 2);
    CHECK(m(2, 1) == 6);
    CHECK(m(3, 0) == 3);
    CHECK(m(3, 1) == 7);

    const auto id = block_to_channels(block, 1);
    CHECK(id.rows == 1);
    CHECK(id.data == block);

    for (std::size_t B : kSupportedBlockLengths) {
        const auto b = positive_block(B, B);
        CHECK(channels_to_block(block_to_channels(b, 4)) == b);
    }
    CHECK_THROWS_AS(block_to_channels(std::vector<double>(10, 1.0), 4), std::invalid_argument);
}

TEST_CASE("input normalisation") {
    auto c = cfg_for(40);
    const auto b = positive_block(40, 1);
    const auto x = prepare_input(b, c);
    double ss = 0.0;
    for (double v : x.data) ss += v * v;
    CHECK(std::sqrt(ss / 40.0) == doctest::Approx(1.0).epsilon(1e-12));

    c.normalization = InputNormalization::Raw;
    CHECK(channels_to_block(prepare_input(b, c)) == b);

    const auto zeros = prepare_input(std::vector<double>(40, 0.0), cfg_for(40));
    for (double v : zeros.data) CHECK(v == 0.0);
    CHECK_THROWS_AS(prepare_input(std::vector<double>(41, 1.0), cfg_for(40)), std::invalid_argument);
}

TEST_CASE("build_model follows the table architecture") {
    const auto m = build_model(cfg_for(160), 1);
    const auto& L = m.net.layers();
    REQUIRE(L.size() == 8);
    const auto& c1 = std::get<nn::Conv1d>(L[0]);
    CHECK(c1.in_channels == 4);
    CHECK(c1.out_channels == 9);
    CHECK(c1.filter_len == 8);
    CHECK(std::holds_alternative<nn::Relu>(L[1]));
    const auto& c2 = std::get<nn::Conv1d>(L[2]);
    CHECK(c2.in_channels == 9);
    CHECK(c2.out_channels == 5);
    CHECK(c2.filter_len == 3);
    CHECK(std::holds_alternative<nn::Relu>(L[3]));
    CHECK(std::holds_alternative<nn::Flatten>(L[4]));
    const auto& fc = std::get<nn::Dense>(L[5]);
    CHECK(fc.in_features == 155);
    CHECK(fc.out_features == 3);
    CHECK(std::holds_alternative<nn::Relu>(L[6]));
    const auto& out = std::get<nn::Dense>(L[7]);
    CHECK(out.in_features == 3);
    CHECK(out.out_features == 1);
}

TEST_CASE("detect examples") {
    SUBCASE("zero weights with output bias -1 never detects") {
        auto m = build_model(cfg_for(80), 1);
        for (auto p : m.net.parameters()) std::fill(p.begin(), p.end(), 0.0);
        std::get<nn::Dense>(m.net.layers()[7]).bias[0] = -1.0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto r = detect(m, positive_block(80, s));
            CHECK_FALSE(r.detected);
            CHECK(r.start_sample == -1);
            CHECK(r.score == -1.0);
        }
    }
    SUBCASE("decision rule") {
        const auto c = cfg_for(40);
        CHECK_FALSE(decide(-0.51, c).detected);
        auto r = decide(-0.5, c);
        CHECK(r.detected);
        CHECK(r.start_sample == 0);
        CHECK(decide(12.4, c).start_sample == 12);
        CHECK(decide(12.6, c).start_sample == 13);
        CHECK(decide(100.0, c).start_sample == 39);
        CHECK(decide(100.0, c).score == 100.0);
        CHECK_FALSE(decide(std::nan(""), c).detected);
    }
    SUBCASE("length mismatch") {
        const auto m = build_model(cfg_for(40), 1);
        CHECK_THROWS_AS(detect(m, std::vector<double>(80, 1.0)), std::invalid_argument);
    }
    SUBCASE("pure and finite") {
        const auto m = build_model(cfg_for(160), 3);
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto b = positive_block(160, s);
            const auto a = detect(m, b);
            const auto again = detect(m, b);
            CHECK(a.score == again.score);
            CHECK(a.start_sample == again.start_sample);
            CHECK(std::isfinite(a.score));
        }
    }
    SUBCASE("scaling a block changes the raw score") {
        auto c = cfg_for(160);
        c.normalization = InputNormalization::Raw;
        const auto m = build_model(c, 5);
        const auto b = positive_block(160, 9);
        auto b10 = b;
        for (auto& v : b10) v *= 10.0;
        CHECK(m.predict(b) != m.predict(b10));

        const auto mr = build_model(cfg_for(160), 5);
        CHECK(mr.predict(b) == doctest::Approx(mr.predict(b10)).epsilon(1e-12));
    }
}

TEST_CASE("overfit a single training block") {
    auto m = build_model(cfg_for(40), 2);
    LabeledBlock b;
    b.amplitudes.assign(40, 0.1f);
    for (std::size_t i = 12; i < 40; ++i) b.amplitudes[i] = 1.0f + 0.2f * float(i % 4);
    b.label = 12.0f;
    b.kind = BlockKind::Start;
    std::vector<LabeledBlock> train{b};
    nn::TrainConfig tc;
    tc.epochs = 400;
    tc.batch_size = 1;
    train_detector(m, train, {}, tc);
    const auto r = detect(m, std::span<const float>(b.amplitudes));
    CHECK(r.detected);
    CHECK(std::abs(r.start_sample - 12) <= 1);
}

TEST_CASE("evaluate examples") {
    std::vector<LabeledBlock> blocks{make_block(3, 2.0f), make_block(10, 22.0f), make_block(-1, 7.0f),
                                     make_block(-1, 12.0f)};
    SUBCASE("perfect predictor") {
        const auto m = evaluate(
            [](const LabeledBlock& b) {
                return b.label >= 0 ? DetectionResult{true, long(b.label), 0.0} : DetectionResult::none();
            },
            blocks);
        REQUIRE(m.mae.has_value());
        CHECK(*m.mae == 0.0);
        CHECK(m.miss_rate == 0.0);
        CHECK(m.false_alarm_rate == 0.0);
    }
    SUBCASE("never detects") {
        const auto m = evaluate([](const LabeledBlock&) { return DetectionResult::none(); }, blocks);
        CHECK(m.miss_rate == 1.0);
        CHECK(m.false_alarm_rate == 0.0);
        CHECK_FALSE(m.mae.has_value());
    }
    SUBCASE("hand-built verdicts") {
        // Start at 3 missed, start at 10 found at 13, one noise block flagged.
        const auto m = evaluate(
            [](const LabeledBlock& b) {
                if (b.label == 10) return DetectionResult{true, 13, 0.0};
                if (b.label < 0 && b.snr_db > 10) return DetectionResult{true, 0, 0.0};
                return DetectionResult::none();
            },
            blocks);
        CHECK(m.miss_rate == 0.5);
        CHECK(m.false_alarm_rate == 0.5);
        REQUIRE(m.mae.has_value());
        CHECK(*m.mae == 3.0);
        CHECK(m.n_start == 2);
        CHECK(m.n_no_start == 2);
        REQUIRE(m.mae_per_snr_bin.size() == 5);
        CHECK(m.mae_per_snr_bin[4].lo == 20.0);
        CHECK(m.mae_per_snr_bin[4].hi == 25.0);
        CHECK(*m.mae_per_snr_bin[4].mae == 3.0);
        CHECK(m.mae_per_snr_bin[4].n == 1);
        CHECK_FALSE(m.mae_per_snr_bin[0].mae.has_value());
    }
    SUBCASE("edge SNRs land in the outer bins") {
        std::vector<Verdict> v{{5.0, 25.0, {true, 6, 0.0}}, {5.0, 0.0, {true, 7, 0.0}}};
        const auto m = score(v);
        CHECK(m.mae_per_snr_bin[4].n == 1);
        CHECK(m.mae_per_snr_bin[0].n == 1);
    }
}

TEST_CASE("metrics CSV schema") {
    std::vector<Verdict> v{{5.0, 3.0, {true, 6, 0.0}}, {-1.0, 3.0, DetectionResult::none()}};
    const auto m = score(v);
    const auto dir = testutil::scratch_dir("cnn_metrics");
    write_metrics_csv(m, dir / "m.csv", dir / "s.csv");
    CHECK(testutil::slurp(dir / "m.csv") ==
          "snr_bin_lo,snr_bin_hi,mae,n\n0,5,1.000000,1\n5,10,,0\n10,15,,0\n15,20,,0\n20,25,,0\n");
    CHECK(testutil::slurp(dir / "s.csv") == "miss_rate,false_alarm_rate\n0.000000,0.000000\n");
}

TEST_CASE("checkpoint round trip and corruption") {
    auto c = cfg_for(80);
    c.normalization = InputNormalization::Raw;
    const auto m = build_model(c, 17);
    const auto dir = testutil::scratch_dir("cnn_ckpt");
    const auto path = dir / "m.bin";
    save_checkpoint(m, path);
    CHECK(std::filesystem::exists(dir / "m.bin.json"));

    const auto back = load_checkpoint(path);
    CHECK(back.config == m.config);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto b = positive_block(80, s);
        CHECK(back.predict(b) == m.predict(b));
    }

    auto bytes = detail::read_file(path.string());
    SUBCASE("truncated") {
        bytes.resize(bytes.size() / 2);
        detail::write_file(path.string(), bytes);
        CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);
    }
    SUBCASE("flipped byte") {
        bytes[bytes.size() / 2] ^= 0x40;
        detail::write_file(path.string(), bytes);
        CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        detail::write_file(path.string(), bytes);
        CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS(load_checkpoint(dir / "nope.bin"));
    }
}
