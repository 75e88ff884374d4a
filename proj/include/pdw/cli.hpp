#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

// Command-line front end. Each subcommand is also callable in-process.

namespace pdw::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kUsageError = 2,
    kDataError = 3,
    kNumericalError = 4,
};

struct GenOptions {
    std::filesystem::path spec;
    std::filesystem::path out_dir;
    std::optional<std::size_t> block_len;
    std::optional<std::size_t> n_blocks;
    std::optional<std::uint64_t> seed;
};

struct TrainOptions {
    std::filesystem::path data_dir;
    std::size_t block_len = 160;
    std::size_t epochs = 400;
    std::size_t batch_size = 80;
    double learning_rate = 0.001;
    std::uint64_t seed = 1;
    std::filesystem::path out_model;
};

struct EvalOptions {
    std::optional<std::filesystem::path> model;
    bool conventional = false;
    bool oracle = false;  // test hook: a predictor that always returns the label
    std::optional<std::filesystem::path> data_dir;
    std::optional<std::size_t> block_len;
    std::filesystem::path out_csv;
    std::size_t trials = 2000;
    std::optional<double> snr_db;
    bool awgn_only = false;
    std::uint64_t seed = 1;
};

struct FlopsOptions {
    std::optional<std::size_t> block_len;
    bool conventional = false;
    bool all = false;
    double sample_rate_hz = 1e6;
    std::optional<std::filesystem::path> out_dir;
};

struct SweepOptions {
    std::optional<std::filesystem::path> model;
    bool conventional = false;
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25};
    std::size_t trials = 1000;
    bool awgn_only = false;
    std::uint64_t seed = 1;
    std::filesystem::path out_csv;
};

struct PreambleOptions {
    std::filesystem::path out;
    std::optional<std::filesystem::path> waveform_csv;
};

int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_flops(const FlopsOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);
int cmd_preamble(const PreambleOptions& opt, std::ostream& out, std::ostream& err);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdw::cli
