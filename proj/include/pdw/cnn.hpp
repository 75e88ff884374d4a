#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdw/nn.hpp"
#include "pdw/signal.hpp"

// The packet-start regressor: amplitude block -> scalar start estimate, with
// -1 meaning "no packet start in this block".

namespace pdw::cnn {

inline constexpr std::size_t kSupportedBlockLengths[] = {40, 80, 160, 320, 800, 1600};

enum class InputNormalization : std::uint8_t { Raw = 0, Rms = 1 };

struct CnnDetectorConfig {
    std::size_t block_len = 160;
    std::size_t in_channels = 4;
    std::size_t conv1_filters = 9;
    std::size_t conv1_filter_len = 8;
    std::size_t conv2_filters = 5;
    std::size_t conv2_filter_len = 3;
    std::size_t fc_neurons = 3;
    double no_packet_label = -1.0;
    // Midpoint between the no-packet label and the first start index.
    double detect_threshold = -0.5;
    InputNormalization normalization = InputNormalization::Rms;

    std::size_t input_width() const { return block_len / in_channels; }
    std::size_t conv1_width() const { return input_width() - conv1_filter_len + 1; }
    std::size_t conv2_width() const { return conv1_width() - conv2_filter_len + 1; }
    std::size_t flatten_size() const { return conv2_filters * conv2_width(); }

    // Throws std::invalid_argument when B is not divisible by the channel count
    // or the input is too narrow for both convolutions.
    void validate() const;
};

bool operator==(const CnnDetectorConfig& a, const CnnDetectorConfig& b);

enum class BlockKind : std::uint8_t { Start = 0, NoiseOnly = 1, MidTail = 2 };

const char* to_string(BlockKind kind);

struct LabeledBlock {
    std::vector<float> amplitudes;  // |y|, length B
    float label = -1.0f;            // -1 or start index in [0, B-1]
    float snr_db = 0.0f;
    BlockKind kind = BlockKind::NoiseOnly;
};

// channel c at time t = block[in_channels * t + c].
nn::Matrix block_to_channels(std::span<const double> block, std::size_t in_channels);
std::vector<double> channels_to_block(const nn::Matrix& channels);

// Normalisation + reshape exactly as seen by the network.
nn::Matrix prepare_input(std::span<const double> block, const CnnDetectorConfig& cfg);
nn::Matrix prepare_input(std::span<const float> block, const CnnDetectorConfig& cfg);

struct CnnModel {
    CnnDetectorConfig config;
    nn::Sequential net;

    double predict(std::span<const double> block) const;
    double predict(std::span<const float> block) const;
};

// Conv1d(C->9, F=8)+ReLU, Conv1d(9->5, F=3)+ReLU, flatten, Dense(->3)+ReLU,
// Dense(3->1) linear; seeded He/Xavier init.
CnnModel build_model(const CnnDetectorConfig& cfg, std::uint64_t seed = 1);

// Output p >= detect_threshold => detected at round(clamp(p, 0, B-1)).
DetectionResult decide(double score, const CnnDetectorConfig& cfg);
DetectionResult detect(const CnnModel& model, std::span<const double> block);
DetectionResult detect(const CnnModel& model, std::span<const float> block);

struct Verdict {
    double label = -1.0;
    double snr_db = 0.0;
    DetectionResult result;
};

struct SnrBin {
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> mae;  // absent when no detected starts fall in the bin
    std::size_t n = 0;          // detected starts contributing to mae
};

struct Metrics {
    std::optional<double> mae;
    double miss_rate = 0.0;
    double false_alarm_rate = 0.0;
    std::size_t n_start = 0;
    std::size_t n_no_start = 0;
    std::vector<SnrBin> mae_per_snr_bin;
};

// 5 dB bins over [0, 25] (last bin closed). SNRs outside the range are clamped.
Metrics score(std::span<const Verdict> verdicts);

using BlockPredictor = std::function<DetectionResult(const LabeledBlock&)>;
Metrics evaluate(const BlockPredictor& predictor, std::span<const LabeledBlock> blocks);
Metrics evaluate(const CnnModel& model, std::span<const LabeledBlock> blocks);

// Writes "snr_bin_lo,snr_bin_hi,mae,n" rows to `path` and the
// "miss_rate,false_alarm_rate" summary to `summary_path`.
void write_metrics_csv(const Metrics& m, const std::filesystem::path& path,
                       const std::filesystem::path& summary_path);

// Adapter exposing labelled blocks as training examples.
class BlockSource : public nn::ExampleSource {
public:
    BlockSource(std::span<const LabeledBlock> blocks, CnnDetectorConfig cfg)
        : blocks_(blocks), cfg_(cfg) {}
    std::size_t size() const override { return blocks_.size(); }
    void example(std::size_t index, nn::Matrix& input, std::vector<double>& target) const override;

private:
    std::span<const LabeledBlock> blocks_;
    CnnDetectorConfig cfg_;
};

std::vector<nn::EpochStats> train_detector(CnnModel& model, std::span<const LabeledBlock> train,
                                           std::span<const LabeledBlock> val,
                                           const nn::TrainConfig& cfg,
                                           const nn::EpochCallback& on_epoch = {});

// Checkpoint: "PDWCKPT\0", u32 version, architecture, then each parameter
// block as u64 count + little-endian f64 values, trailed by a CRC-32. A JSON
// manifest of shapes is written to <path>.json.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace pdw::cnn
