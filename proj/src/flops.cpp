#include "pdw/flops.hpp"

#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

namespace pdw::flops {

namespace {

FlopsReport finish(FlopsReport r, double blocks_per_second) {
    r.total_per_block = r.totals().total();
    r.blocks_per_second = blocks_per_second;
    r.mflops = static_cast<double>(r.total_per_block) * blocks_per_second / 1e6;
    return r;
}

// FLOP building blocks under kComplexConvention.
constexpr LayerCost kComplexMul{4, 2};
constexpr LayerCost kComplexAdd{0, 2};
constexpr LayerCost kMagSq{2, 1};

LayerCost times(LayerCost c, std::uint64_t n) { return {c.muls * n, c.adds * n}; }

}  // namespace

LayerCost FlopsReport::totals() const {
    LayerCost t;
    for (const auto& [name, cost] : per_layer) t += cost;
    return t;
}

LayerCost conv1d_cost(std::uint64_t F, std::uint64_t ch_i, std::uint64_t ch_o, std::uint64_t K) {
    if (F == 0 || ch_i == 0 || ch_o == 0 || K == 0)
        throw std::invalid_argument("conv1d_cost: all dimensions must be positive");
    return {F * ch_i * ch_o * K, F * (ch_i + 1) * ch_o * K};
}

LayerCost fc_cost(std::uint64_t N_i, std::uint64_t N_o) {
    if (N_i == 0 || N_o == 0) throw std::invalid_argument("fc_cost: sizes must be positive");
    return {N_i * N_o, (N_i + 1) * N_o};
}

FlopsReport model_flops(const cnn::CnnDetectorConfig& cfg, double sample_rate_hz) {
    cfg.validate();
    FlopsReport r;
    r.detector = fmt::format("cnn_B{}", cfg.block_len);
    r.per_layer.emplace_back("conv1", conv1d_cost(cfg.conv1_filter_len, cfg.in_channels, cfg.conv1_filters,
                                                  cfg.conv1_width()));
    r.per_layer.emplace_back("conv2", conv1d_cost(cfg.conv2_filter_len, cfg.conv1_filters, cfg.conv2_filters,
                                                  cfg.conv2_width()));
    r.per_layer.emplace_back("fc", fc_cost(cfg.flatten_size(), cfg.fc_neurons));
    r.per_layer.emplace_back("output", fc_cost(cfg.fc_neurons, 1));
    return finish(std::move(r), sample_rate_hz / static_cast<double>(cfg.block_len));
}

FlopsReport conventional_flops(const corrsync::CorrDetectorConfig& cfg, double sample_rate_hz) {
    const std::uint64_t W = cfg.window();
    if (W == 0) throw std::invalid_argument("conventional_flops: empty window");
    FlopsReport r;
    r.detector = "conventional";
    // Λ: W complex products, W-1 complex additions.
    LayerCost corr = times(kComplexMul, W);
    corr += times(kComplexAdd, W - 1);
    // P: W magnitudes squared, accumulated as W-1 complex-width additions.
    LayerCost power = times(kMagSq, W);
    power += times(kComplexAdd, W - 1);
    // M = |Λ|^2 / P^2: one |.|^2, one square, one divide.
    LayerCost metric = kMagSq;
    metric += LayerCost{2, 0};
    r.per_layer.emplace_back("autocorrelation", corr);
    r.per_layer.emplace_back("window_power", power);
    r.per_layer.emplace_back("metric", metric);
    return finish(std::move(r), sample_rate_hz);
}

FlopsReport conventional_flops_recursive(const corrsync::CorrDetectorConfig& cfg, double sample_rate_hz) {
    if (cfg.window() == 0) throw std::invalid_argument("conventional_flops: empty window");
    FlopsReport r;
    r.detector = "conventional_recursive";
    LayerCost corr = times(kComplexMul, 2);
    corr += times(kComplexAdd, 2);
    LayerCost power = times(kMagSq, 2);
    power += LayerCost{0, 2};
    LayerCost metric = kMagSq;
    metric += LayerCost{2, 0};
    r.per_layer.emplace_back("autocorrelation", corr);
    r.per_layer.emplace_back("window_power", power);
    r.per_layer.emplace_back("metric", metric);
    return finish(std::move(r), sample_rate_hz);
}

void write_layer_csv(const FlopsReport& r, const std::filesystem::path& path) {
    auto out = fmt::output_file(path.string());
    out.print("layer,muls,adds\n");
    for (const auto& [name, c] : r.per_layer) out.print("{},{},{}\n", name, c.muls, c.adds);
}

nlohmann::json summary_json(const FlopsReport& r) {
    const auto t = r.totals();
    return {
        {"detector", r.detector},
        {"convention", r.detector.rfind("conventional", 0) == 0
                           ? kComplexConvention
                           : "Conv1D MUL F*ch_i*ch_o*K, ADD F*(ch_i+1)*ch_o*K; FC MUL N_i*N_o, ADD (N_i+1)*N_o"},
        {"total_muls", t.muls},
        {"total_adds", t.adds},
        {"total_per_block", r.total_per_block},
        {"blocks_per_second", r.blocks_per_second},
        {"mflops", r.mflops},
    };
}

void write_comparison_csv(const std::vector<std::pair<std::size_t, FlopsReport>>& rows,
                          const std::filesystem::path& path) {
    auto out = fmt::output_file(path.string());
    out.print("detector,block_len,flops_per_block,blocks_per_second,mflops\n");
    for (const auto& [B, r] : rows)
        out.print("{},{},{},{:.6f},{:.6f}\n", r.detector, B, r.total_per_block, r.blocks_per_second, r.mflops);
}

}  // namespace pdw::flops
