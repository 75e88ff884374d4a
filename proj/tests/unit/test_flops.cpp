#include <doctest.h>

#include "helpers.hpp"
#include "pdw/flops.hpp"

using namespace pdw;
using namespace pdw::flops;

namespace {

cnn::CnnDetectorConfig cfg_for(std::size_t B) {
    cnn::CnnDetectorConfig c;
    c.block_len = B;
    return c;
}

corrsync::CorrDetectorConfig window_cfg(std::size_t W) {
    corrsync::CorrDetectorConfig c;
    c.l_window = W;
    return c;
}

}  // namespace

TEST_CASE("conv1d_cost examples") {
    const auto c = conv1d_cost(8, 4, 9, 33);
    CHECK(c.muls == 9504);
    CHECK(c.adds == 11880);
    const auto one = conv1d_cost(1, 1, 1, 1);
    CHECK(one.muls == 1);
    CHECK(one.adds == 2);
    const auto dk = conv1d_cost(8, 4, 9, 66);
    CHECK(dk.muls == 2 * c.muls);
    CHECK(dk.adds == 2 * c.adds);
    CHECK_THROWS_AS(conv1d_cost(0, 4, 9, 33), std::invalid_argument);
    CHECK_THROWS_AS(conv1d_cost(8, 0, 9, 33), std::invalid_argument);
    CHECK_THROWS_AS(conv1d_cost(8, 4, 0, 33), std::invalid_argument);
    CHECK_THROWS_AS(conv1d_cost(8, 4, 9, 0), std::invalid_argument);
}

TEST_CASE("fc_cost examples") {
    CHECK(fc_cost(155, 3).muls == 465);
    CHECK(fc_cost(155, 3).adds == 468);
    CHECK(fc_cost(3, 1).muls == 3);
    CHECK(fc_cost(3, 1).adds == 4);
    CHECK(fc_cost(1, 1).muls == 1);
    CHECK(fc_cost(1, 1).adds == 2);
    CHECK_THROWS_AS(fc_cost(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(fc_cost(3, 0), std::invalid_argument);
}

TEST_CASE("model_flops for B=160") {
    const auto r = model_flops(cfg_for(160), 1e6);
    REQUIRE(r.per_layer.size() == 4);
    CHECK(r.per_layer[0].second.muls == 9504);
    CHECK(r.per_layer[0].second.adds == 11880);
    CHECK(r.per_layer[1].second.muls == 4185);
    CHECK(r.per_layer[1].second.adds == 4650);
    CHECK(r.per_layer[2].second.muls == 465);
    CHECK(r.per_layer[2].second.adds == 468);
    CHECK(r.per_layer[3].second.muls == 3);
    CHECK(r.per_layer[3].second.adds == 4);
    CHECK(r.total_per_block == 31159);
    CHECK(r.blocks_per_second == doctest::Approx(6250.0));
    CHECK(r.mflops == doctest::Approx(31159.0 * 6250.0 / 1e6));
    CHECK_THROWS_AS(model_flops(cfg_for(39), 1e6), std::invalid_argument);
}

TEST_CASE("instrumented forward pass agrees with the formulas") {
    for (std::size_t B : cnn::kSupportedBlockLengths) {
        const auto cfg = cfg_for(B);
        const auto model = cnn::build_model(cfg, 1);
        const auto block = testutil::random_real(B, B, 0.0, 1.0);
        nn::OpCounter ctr;
        model.net.forward(cnn::prepare_input(block, cfg), &ctr);
        const auto r = model_flops(cfg, 1e6);
        const auto t = r.totals();
        // The add formula charges one add per product plus one per output;
        // the pass executes F*ch_i per conv output and N_i per dense output.
        const std::uint64_t over = cfg.conv1_filter_len * cfg.conv1_filters * cfg.conv1_width() +
                                   cfg.conv2_filter_len * cfg.conv2_filters * cfg.conv2_width() +
                                   cfg.fc_neurons + 1;
        CAPTURE(B);
        CHECK(ctr.muls == t.muls);
        CHECK(ctr.adds + over == t.adds);
    }
}

TEST_CASE("doubling B roughly doubles the per-block cost at fixed rate") {
    for (std::size_t B : {160, 320, 800}) {
        const auto a = model_flops(cfg_for(B), 1e6);
        const auto b = model_flops(cfg_for(2 * B), 1e6);
        const double ratio = double(b.total_per_block) / double(a.total_per_block);
        CAPTURE(B);
        CHECK(ratio > 2.0);
        CHECK(ratio < 2.5);
        // Rate per second stays within a few percent of constant.
        CHECK(b.mflops / a.mflops == doctest::Approx(ratio / 2.0));
    }
}

TEST_CASE("conventional_flops") {
    const auto r = conventional_flops({}, 1e6);
    const auto t = r.totals();
    CHECK(t.muls == 6 * 80 + 4);
    CHECK(t.adds == 7 * 80 - 3);
    CHECK(r.total_per_block == 1041);
    CHECK(r.blocks_per_second == 1e6);
    CHECK(r.mflops == doctest::Approx(1041.0));

    CHECK(conventional_flops(window_cfg(1), 1e6).total_per_block == 14);
    CHECK(conventional_flops({}, 0.0).mflops == 0.0);
    CHECK(model_flops(cfg_for(160), 0.0).mflops == 0.0);
    std::uint64_t prev = 0;
    for (std::size_t W = 1; W <= 200; ++W) {
        const auto v = conventional_flops(window_cfg(W), 1e6).total_per_block;
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(conventional_flops(window_cfg(0), 1e6), std::invalid_argument);

    const auto rec = conventional_flops_recursive({}, 1e6);
    CHECK(rec.total_per_block < r.total_per_block);
}

TEST_CASE("CNN cost below the conventional detector") {
    const auto conv = conventional_flops({}, 1e6);
    CHECK(model_flops(cfg_for(40), 1e6).mflops < conv.mflops);
    CHECK(model_flops(cfg_for(160), 1e6).mflops < conv.mflops);
}

TEST_CASE("report files") {
    const auto dir = testutil::scratch_dir("flops_files");
    const auto r = model_flops(cfg_for(160), 1e6);
    write_layer_csv(r, dir / "l.csv");
    CHECK(testutil::slurp(dir / "l.csv") ==
          "layer,muls,adds\nconv1,9504,11880\nconv2,4185,4650\nfc,465,468\noutput,3,4\n");
    const auto j = summary_json(r);
    CHECK(j.at("total_per_block") == 31159);
    CHECK(j.at("detector") == "cnn_B160");
    CHECK(j.contains("convention"));

    write_comparison_csv({{160, r}, {0, conventional_flops({}, 1e6)}}, dir / "c.csv");
    const auto text = testutil::slurp(dir / "c.csv");
    CHECK(text.rfind("detector,block_len,flops_per_block,blocks_per_second,mflops\n", 0) == 0);
    CHECK(text.find("cnn_B160,160,31159,6250.000000,194.743750\n") != std::string::npos);
    CHECK(text.find("conventional,0,1041,") != std::string::npos);
}
