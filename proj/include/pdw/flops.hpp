#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdw/cnn.hpp"
#include "pdw/corrsync.hpp"

// Analytic multiply/add counts for the CNN layers and the sliding
// autocorrelation detector.

namespace pdw::flops {

struct LayerCost {
    std::uint64_t muls = 0;
    std::uint64_t adds = 0;

    std::uint64_t total() const { return muls + adds; }
    LayerCost& operator+=(const LayerCost& o) {
        muls += o.muls;
        adds += o.adds;
        return *this;
    }
};

// Real-FLOP convention for complex arithmetic used by conventional_flops.
inline constexpr const char* kComplexConvention =
    "complex multiply = 6 (4 mul + 2 add); complex add = 2; |z|^2 = 3 (2 mul + 1 add); "
    "real divide counted as 1 mul";

struct FlopsReport {
    std::string detector;
    std::vector<std::pair<std::string, LayerCost>> per_layer;
    std::uint64_t total_per_block = 0;
    double blocks_per_second = 0.0;
    double mflops = 0.0;

    LayerCost totals() const;
};

// muls = F ch_i ch_o K, adds = F (ch_i + 1) ch_o K.
LayerCost conv1d_cost(std::uint64_t F, std::uint64_t ch_i, std::uint64_t ch_o, std::uint64_t K);
// muls = N_i N_o, adds = (N_i + 1) N_o.
LayerCost fc_cost(std::uint64_t N_i, std::uint64_t N_o);

// Non-overlapping blocks: blocks_per_second = rate / B.
FlopsReport model_flops(const cnn::CnnDetectorConfig& cfg, double sample_rate_hz);

// Direct evaluation of Λ_τ and P_τ over the window plus the metric, once per
// incoming sample. The LTS fine stage is not counted.
FlopsReport conventional_flops(const corrsync::CorrDetectorConfig& cfg, double sample_rate_hz);
// Running-sum variant (two terms in, two out per slide), reported for context.
FlopsReport conventional_flops_recursive(const corrsync::CorrDetectorConfig& cfg, double sample_rate_hz);

void write_layer_csv(const FlopsReport& r, const std::filesystem::path& path);
nlohmann::json summary_json(const FlopsReport& r);
// One row per report: detector,block_len,flops_per_block,blocks_per_second,mflops.
void write_comparison_csv(const std::vector<std::pair<std::size_t, FlopsReport>>& rows,
                          const std::filesystem::path& path);

}  // namespace pdw::flops
