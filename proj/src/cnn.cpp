#include "pdw/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>

#include "pdw/detail/binio.hpp"

namespace pdw::cnn {

namespace {

constexpr std::string_view kCheckpointMagic{"PDWCKPT\0", 8};
constexpr double kSnrLo = 0.0;
constexpr double kSnrHi = 25.0;
constexpr double kSnrBinWidth = 5.0;

template <class T>
nn::Matrix prepare(std::span<const T> block, const CnnDetectorConfig& cfg) {
    if (block.size() != cfg.block_len)
        throw std::invalid_argument(fmt::format("block length {} does not match model block length {}",
                                                block.size(), cfg.block_len));
    std::vector<double> x(block.begin(), block.end());
    if (cfg.normalization == InputNormalization::Rms) {
        double acc = 0.0;
        for (double v : x) acc += v * v;
        const double rms = std::sqrt(acc / static_cast<double>(x.size()));
        if (rms > 0.0)
            for (double& v : x) v /= rms;
    }
    return block_to_channels(x, cfg.in_channels);
}

}  // namespace

void CnnDetectorConfig::validate() const {
    if (in_channels == 0 || block_len == 0 || block_len % in_channels != 0)
        throw std::invalid_argument(
            fmt::format("block_len {} must be a positive multiple of in_channels {}", block_len, in_channels));
    if (conv1_filters == 0 || conv2_filters == 0 || fc_neurons == 0 || conv1_filter_len == 0 ||
        conv2_filter_len == 0)
        throw std::invalid_argument("layer sizes must be positive");
    if (input_width() < conv1_filter_len + conv2_filter_len - 1)
        throw std::invalid_argument(fmt::format(
            "block_len {} too short: {} samples per channel cannot feed both convolutions", block_len,
            input_width()));
}

bool operator==(const CnnDetectorConfig& a, const CnnDetectorConfig& b) {
    return a.block_len == b.block_len && a.in_channels == b.in_channels &&
           a.conv1_filters == b.conv1_filters && a.conv1_filter_len == b.conv1_filter_len &&
           a.conv2_filters == b.conv2_filters && a.conv2_filter_len == b.conv2_filter_len &&
           a.fc_neurons == b.fc_neurons && a.no_packet_label == b.no_packet_label &&
           a.detect_threshold == b.detect_threshold && a.normalization == b.normalization;
}

const char* to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::Start: return "start";
        case BlockKind::NoiseOnly: return "noise_only";
        case BlockKind::MidTail: return "mid_tail";
    }
    return "unknown";
}

nn::Matrix block_to_channels(std::span<const double> block, std::size_t in_channels) {
    if (in_channels == 0 || block.size() % in_channels != 0)
        throw std::invalid_argument("block_to_channels: length not divisible by channel count");
    const std::size_t width = block.size() / in_channels;
    nn::Matrix m(in_channels, width);
    for (std::size_t t = 0; t < width; ++t)
        for (std::size_t c = 0; c < in_channels; ++c) m(c, t) = block[in_channels * t + c];
    return m;
}

std::vector<double> channels_to_block(const nn::Matrix& channels) {
    std::vector<double> block(channels.size());
    for (std::size_t t = 0; t < channels.cols; ++t)
        for (std::size_t c = 0; c < channels.rows; ++c) block[channels.rows * t + c] = channels(c, t);
    return block;
}

nn::Matrix prepare_input(std::span<const double> block, const CnnDetectorConfig& cfg) {
    return prepare(block, cfg);
}

nn::Matrix prepare_input(std::span<const float> block, const CnnDetectorConfig& cfg) {
    return prepare(block, cfg);
}

double CnnModel::predict(std::span<const double> block) const {
    return net.forward(prepare_input(block, config)).data.at(0);
}

double CnnModel::predict(std::span<const float> block) const {
    return net.forward(prepare_input(block, config)).data.at(0);
}

CnnModel build_model(const CnnDetectorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    CnnModel model;
    model.config = cfg;
    auto& net = model.net;
    net.add(nn::Conv1d(cfg.in_channels, cfg.conv1_filters, cfg.conv1_filter_len));
    net.add(nn::Relu{});
    net.add(nn::Conv1d(cfg.conv1_filters, cfg.conv2_filters, cfg.conv2_filter_len));
    net.add(nn::Relu{});
    net.add(nn::Flatten{});
    net.add(nn::Dense(cfg.flatten_size(), cfg.fc_neurons));
    net.add(nn::Relu{});
    net.add(nn::Dense(cfg.fc_neurons, 1));
    nn::initialize(net, seed);
    return model;
}

DetectionResult decide(double score, const CnnDetectorConfig& cfg) {
    if (!(score >= cfg.detect_threshold)) return DetectionResult::none(score);
    const double hi = static_cast<double>(cfg.block_len - 1);
    return {true, std::lround(std::clamp(score, 0.0, hi)), score};
}

DetectionResult detect(const CnnModel& model, std::span<const double> block) {
    return decide(model.predict(block), model.config);
}

DetectionResult detect(const CnnModel& model, std::span<const float> block) {
    return decide(model.predict(block), model.config);
}

Metrics score(std::span<const Verdict> verdicts) {
    Metrics m;
    const auto n_bins = static_cast<std::size_t>((kSnrHi - kSnrLo) / kSnrBinWidth);
    std::vector<double> bin_err(n_bins, 0.0);
    m.mae_per_snr_bin.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        m.mae_per_snr_bin[b].lo = kSnrLo + kSnrBinWidth * static_cast<double>(b);
        m.mae_per_snr_bin[b].hi = m.mae_per_snr_bin[b].lo + kSnrBinWidth;
    }

    std::size_t misses = 0;
    std::size_t false_alarms = 0;
    std::size_t hits = 0;
    double err_total = 0.0;
    for (const auto& v : verdicts) {
        if (v.label >= 0.0) {
            ++m.n_start;
            if (!v.result.detected) {
                ++misses;
                continue;
            }
            const double err = std::abs(static_cast<double>(v.result.start_sample) - v.label);
            err_total += err;
            ++hits;
            const double s = std::clamp(v.snr_db, kSnrLo, kSnrHi);
            const auto b = std::min(n_bins - 1, static_cast<std::size_t>((s - kSnrLo) / kSnrBinWidth));
            bin_err[b] += err;
            ++m.mae_per_snr_bin[b].n;
        } else {
            ++m.n_no_start;
            if (v.result.detected) ++false_alarms;
        }
    }
    if (hits > 0) m.mae = err_total / static_cast<double>(hits);
    for (std::size_t b = 0; b < n_bins; ++b)
        if (m.mae_per_snr_bin[b].n > 0)
            m.mae_per_snr_bin[b].mae = bin_err[b] / static_cast<double>(m.mae_per_snr_bin[b].n);
    if (m.n_start > 0) m.miss_rate = static_cast<double>(misses) / static_cast<double>(m.n_start);
    if (m.n_no_start > 0)
        m.false_alarm_rate = static_cast<double>(false_alarms) / static_cast<double>(m.n_no_start);
    return m;
}

Metrics evaluate(const BlockPredictor& predictor, std::span<const LabeledBlock> blocks) {
    std::vector<Verdict> verdicts;
    verdicts.reserve(blocks.size());
    for (const auto& b : blocks) verdicts.push_back({b.label, b.snr_db, predictor(b)});
    return score(verdicts);
}

Metrics evaluate(const CnnModel& model, std::span<const LabeledBlock> blocks) {
    return evaluate([&](const LabeledBlock& b) { return detect(model, std::span<const float>(b.amplitudes)); },
                    blocks);
}

void write_metrics_csv(const Metrics& m, const std::filesystem::path& path,
                       const std::filesystem::path& summary_path) {
    {
        auto out = fmt::output_file(path.string());
        out.print("snr_bin_lo,snr_bin_hi,mae,n\n");
        for (const auto& b : m.mae_per_snr_bin) {
            if (b.mae)
                out.print("{:g},{:g},{:.6f},{}\n", b.lo, b.hi, *b.mae, b.n);
            else
                out.print("{:g},{:g},,{}\n", b.lo, b.hi, b.n);
        }
    }
    auto out = fmt::output_file(summary_path.string());
    out.print("miss_rate,false_alarm_rate\n{:.6f},{:.6f}\n", m.miss_rate, m.false_alarm_rate);
}

void BlockSource::example(std::size_t index, nn::Matrix& input, std::vector<double>& target) const {
    const auto& b = blocks_[index];
    input = prepare_input(std::span<const float>(b.amplitudes), cfg_);
    target.assign(1, b.label >= 0.0f ? static_cast<double>(b.label) : cfg_.no_packet_label);
}

std::vector<nn::EpochStats> train_detector(CnnModel& model, std::span<const LabeledBlock> train,
                                           std::span<const LabeledBlock> val,
                                           const nn::TrainConfig& cfg,
                                           const nn::EpochCallback& on_epoch) {
    for (const auto& b : train)
        if (b.amplitudes.size() != model.config.block_len)
            throw std::invalid_argument("training block length does not match the model");
    BlockSource train_src(train, model.config);
    BlockSource val_src(val, model.config);
    return nn::train(model.net, train_src, val.empty() ? nullptr : &val_src, cfg, on_epoch);
}

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
    const auto& c = model.config;
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    for (std::size_t v : {c.block_len, c.in_channels, c.conv1_filters, c.conv1_filter_len,
                          c.conv2_filters, c.conv2_filter_len, c.fc_neurons})
        w.u32(static_cast<std::uint32_t>(v));
    w.f64(c.no_packet_label);
    w.f64(c.detect_threshold);
    w.u8(static_cast<std::uint8_t>(c.normalization));
    const auto params = model.net.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.u64(p.size());
        for (double v : p) w.f64(v);
    }
    w.u32(detail::crc32(w.data()));
    detail::write_file(path.string(), w.data());

    nlohmann::json manifest;
    manifest["format"] = "pdw-checkpoint";
    manifest["version"] = kCheckpointVersion;
    manifest["architecture"] = {
        {"block_len", c.block_len},         {"in_channels", c.in_channels},
        {"conv1_filters", c.conv1_filters}, {"conv1_filter_len", c.conv1_filter_len},
        {"conv2_filters", c.conv2_filters}, {"conv2_filter_len", c.conv2_filter_len},
        {"fc_neurons", c.fc_neurons},       {"no_packet_label", c.no_packet_label},
        {"detect_threshold", c.detect_threshold},
        {"normalization", c.normalization == InputNormalization::Rms ? "rms" : "raw"},
    };
    const std::vector<std::string> names = {"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
                                            "fc.weight",    "fc.bias",    "out.weight",   "out.bias"};
    const std::vector<std::vector<std::size_t>> shapes = {
        {c.conv1_filters, c.in_channels, c.conv1_filter_len},
        {c.conv1_filters},
        {c.conv2_filters, c.conv1_filters, c.conv2_filter_len},
        {c.conv2_filters},
        {c.fc_neurons, c.flatten_size()},
        {c.fc_neurons},
        {1, c.fc_neurons},
        {1}};
    auto blocks = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) blocks.push_back({{"name", names[i]}, {"shape", shapes[i]}});
    manifest["parameters"] = blocks;
    manifest["dtype"] = "float64-le";
    auto out = fmt::output_file(path.string() + ".json");
    out.print("{}\n", manifest.dump(2));
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path.string());
    if (bytes.size() < kCheckpointMagic.size() + 8) throw CorruptFileError("checkpoint truncated");
    const std::span<const std::uint8_t> all(bytes);
    const auto body = all.first(bytes.size() - 4);
    detail::ByteReader crc_reader(all.last(4));
    if (crc_reader.u32() != detail::crc32(body)) throw CorruptFileError("checkpoint checksum mismatch");

    detail::ByteReader r(body);
    if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw CorruptFileError("not a checkpoint file");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw CorruptFileError(fmt::format("unsupported checkpoint version {}", version));
    CnnDetectorConfig c;
    c.block_len = r.u32();
    c.in_channels = r.u32();
    c.conv1_filters = r.u32();
    c.conv1_filter_len = r.u32();
    c.conv2_filters = r.u32();
    c.conv2_filter_len = r.u32();
    c.fc_neurons = r.u32();
    c.no_packet_label = r.f64();
    c.detect_threshold = r.f64();
    const auto norm = r.u8();
    if (norm > 1) throw CorruptFileError("unknown normalisation mode");
    c.normalization = static_cast<InputNormalization>(norm);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw CorruptFileError(std::string("checkpoint architecture invalid: ") + e.what());
    }
    CnnModel model = build_model(c, 0);
    auto params = model.net.parameters();
    if (r.u32() != params.size()) throw CorruptFileError("checkpoint parameter block count mismatch");
    for (auto& p : params) {
        if (r.u64() != p.size()) throw CorruptFileError("checkpoint parameter shape mismatch");
        for (double& v : p) v = r.f64();
    }
    if (r.remaining() != 0) throw CorruptFileError("trailing bytes in checkpoint");
    return model;
}

}  // namespace pdw::cnn
