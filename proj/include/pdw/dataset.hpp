#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdw/channel.hpp"
#include "pdw/cnn.hpp"
#include "pdw/link.hpp"

// Labelled amplitude-block datasets: generation, stratified splitting and the
// on-disk <name>.manifest.json + <name>.blocks.bin pair.

namespace pdw::dataset {

// Randomised impairments drawn per block.
struct ChannelTemplate {
    bool multipath = true;
    channel::ModelBProfile profile{};
    double cfo_max_hz = 18000.0;   // f_off ~ U[-max, max]
    bool fractional_timing = false;  // ε ~ U[0, os) oversampled samples when set
    std::size_t os_factor = 4;
};

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct DatasetSpec {
    std::size_t block_len = 160;
    std::size_t n_blocks = 50000;
    double frac_no_start = 0.5;
    double frac_noise_within_no_start = 0.5;
    double snr_lo_db = 0.0;
    double snr_hi_db = 25.0;
    SplitFractions split{};
    std::uint64_t seed = 1;
    ChannelTemplate channel{};
    std::optional<std::filesystem::path> preamble_path;  // default synthetic spec when unset

    // Throws std::invalid_argument on out-of-range fractions or sizes.
    void validate() const;
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json(const nlohmann::json& j);
DatasetSpec load_spec(const std::filesystem::path& path);

// Noise-only samples preceding every block so filter transients settle.
inline constexpr std::size_t kGuardSamples = 16;

// Generation bookkeeping kept alongside each block.
struct BlockOrigin {
    long packet_offset = 0;  // packet start relative to block start (<= 0 for mid/tail)
    bool has_packet = false;
};

struct Generated {
    std::vector<cnn::LabeledBlock> blocks;
    std::vector<BlockOrigin> origins;
};

// Deterministic in spec.seed; blocks are produced from per-index substreams so
// parallel generation yields identical output.
Generated generate_with_origins(const DatasetSpec& spec);
std::vector<cnn::LabeledBlock> generate(const DatasetSpec& spec);
// Single block i of the dataset (exposed for tests).
cnn::LabeledBlock generate_block(const DatasetSpec& spec, const LinkSimulator& link, std::size_t index,
                                 BlockOrigin* origin = nullptr);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Partition sizes are round(train*n), round(val*n) and the remainder. START and
// no-start blocks are allocated to each partition in proportion, so class
// balance agrees across partitions up to rounding.
SplitIndices split(const std::vector<cnn::LabeledBlock>& blocks, const SplitFractions& fractions,
                   std::uint64_t seed);

std::vector<cnn::LabeledBlock> select(const std::vector<cnn::LabeledBlock>& blocks,
                                      const std::vector<std::size_t>& indices);

struct Counts {
    std::size_t total = 0;
    std::size_t start = 0;
    std::size_t noise_only = 0;
    std::size_t mid_tail = 0;
};
Counts count_kinds(const std::vector<cnn::LabeledBlock>& blocks);

inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetFile {
    nlohmann::json manifest;
    std::vector<cnn::LabeledBlock> blocks;
};

std::filesystem::path manifest_path(const std::filesystem::path& dir, const std::string& name);
std::filesystem::path blocks_path(const std::filesystem::path& dir, const std::string& name);
// Conventional dataset name for a block length, e.g. "blocks_B160".
std::string default_name(std::size_t block_len);

// Writes both files; returns the manifest (including the CRC-32 of the
// blocks file).
nlohmann::json save(const std::filesystem::path& dir, const std::string& name, const DatasetSpec& spec,
                    const std::vector<cnn::LabeledBlock>& blocks);
// Throws CorruptFileError on truncation, checksum, version or shape mismatch.
DatasetFile load(const std::filesystem::path& dir, const std::string& name);

}  // namespace pdw::dataset
