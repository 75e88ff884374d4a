#include "pdw/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "pdw/cnn.hpp"
#include "pdw/corrsync.hpp"
#include "pdw/dataset.hpp"
#include "pdw/experiments.hpp"
#include "pdw/flops.hpp"
#include "pdw/link.hpp"
#include "pdw/preamble.hpp"
#include "pdw/random.hpp"

namespace pdw::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Input data that exists but does not fit the request.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const CorruptFileError& e) {
        fmt::print(err, "error: corrupt data: {}\n", e.what());
        return kDataError;
    } catch (const DataError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kDataError;
    } catch (const NumericalError& e) {
        fmt::print(err, "error: numerical failure: {}\n", e.what());
        return kNumericalError;
    } catch (const json::exception& e) {
        fmt::print(err, "error: invalid JSON: {}\n", e.what());
        return kUsageError;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kUsageError;
    }
}

json versions() {
    return {{"tool", kToolVersion},
            {"dataset_format", dataset::kDatasetVersion},
            {"checkpoint_format", cnn::kCheckpointVersion}};
}

void write_run_manifest(const fs::path& dir, const std::string& command, json args, std::uint64_t seed,
                        json extra = json::object()) {
    json m = {{"command", command}, {"args", std::move(args)}, {"seed", seed}, {"versions", versions()}};
    for (auto& [k, v] : extra.items()) m[k] = v;
    if (!dir.empty()) fs::create_directories(dir);
    auto out = fmt::output_file((dir / fmt::format("manifest_{}.json", command)).string());
    out.print("{}\n", m.dump(2));
}

fs::path parent_or_cwd(const fs::path& p) {
    return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

fs::path summary_path_for(const fs::path& csv) {
    auto p = csv;
    p.replace_extension();
    return p.string() + ".summary.csv";
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string{}; }

dataset::DatasetFile load_dataset(const fs::path& dir, std::size_t block_len) {
    const auto name = dataset::default_name(block_len);
    if (!fs::exists(dataset::manifest_path(dir, name)))
        throw DataError(fmt::format("no dataset for block length {} in {}", block_len, dir.string()));
    return dataset::load(dir, name);
}

LinkSimulator link_for(const std::optional<dataset::DatasetSpec>& spec) {
    if (spec && spec->preamble_path)
        return LinkSimulator(preamble::load_spec(*spec->preamble_path), {},
                             preamble::PulseShape::standard(spec->channel.os_factor));
    return LinkSimulator();
}

void print_metrics(std::ostream& out, const std::string& label, const cnn::Metrics& m) {
    fmt::print(out, "{}: mae={} miss_rate={:.6f} false_alarm_rate={:.6f} (starts={}, no-start={})\n", label,
               m.mae ? fmt::format("{:.4f}", *m.mae) : std::string("n/a"), m.miss_rate, m.false_alarm_rate,
               m.n_start, m.n_no_start);
}

void print_report(std::ostream& out, const flops::FlopsReport& r) {
    fmt::print(out, "{}\n{:<16}{:>14}{:>14}\n", r.detector, "layer", "muls", "adds");
    for (const auto& [name, c] : r.per_layer) fmt::print(out, "{:<16}{:>14}{:>14}\n", name, c.muls, c.adds);
    fmt::print(out, "total/block {}  blocks/s {:.3f}  MFLOPS {:.6f}\n", r.total_per_block, r.blocks_per_second,
               r.mflops);
}

}  // namespace

int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto spec = dataset::load_spec(opt.spec);
        if (opt.block_len) spec.block_len = *opt.block_len;
        if (opt.n_blocks) spec.n_blocks = *opt.n_blocks;
        if (opt.seed) spec.seed = *opt.seed;
        spec.validate();
        const auto blocks = dataset::generate(spec);
        const auto name = dataset::default_name(spec.block_len);
        const auto manifest = dataset::save(opt.out_dir, name, spec, blocks);
        write_run_manifest(opt.out_dir, "gen",
                           {{"spec", opt.spec.string()}, {"out", opt.out_dir.string()}, {"dataset", to_json(spec)}},
                           spec.seed, {{"crc32", manifest["crc32"]}});
        fmt::print(out, "wrote {} blocks to {} (crc32 {})\n", blocks.size(),
                   dataset::blocks_path(opt.out_dir, name).string(), manifest["crc32"].get<std::string>());
        return kOk;
    });
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto data = load_dataset(opt.data_dir, opt.block_len);
        const auto spec = dataset::spec_from_json(data.manifest.at("spec"));
        const auto parts = dataset::split(data.blocks, spec.split, spec.seed);
        const auto train = dataset::select(data.blocks, parts.train);
        const auto val = dataset::select(data.blocks, parts.val);

        cnn::CnnDetectorConfig cfg;
        cfg.block_len = opt.block_len;
        auto model = cnn::build_model(cfg, opt.seed);

        nn::TrainConfig tc;
        tc.batch_size = opt.batch_size;
        tc.epochs = opt.epochs;
        tc.seed = opt.seed;
        tc.adam.alpha = opt.learning_rate;

        fmt::print(out, "training B={} on {} blocks ({} validation), {} epochs, batch {}\n", opt.block_len,
                   train.size(), val.size(), opt.epochs, opt.batch_size);
        const auto history = cnn::train_detector(model, train, val, tc, [&](const nn::EpochStats& s) {
            if (s.epoch == 1 || s.epoch % 10 == 0 || s.epoch == opt.epochs)
                fmt::print(out, "epoch {:4d} train_loss {:.6f} val_loss {:.6f}\n", s.epoch, s.train_loss, s.val_loss);
        });

        const auto dir = parent_or_cwd(opt.out_model);
        fs::create_directories(dir);
        cnn::save_checkpoint(model, opt.out_model);
        {
            auto loss = fmt::output_file(opt.out_model.string() + ".loss.csv");
            loss.print("epoch,train_loss,val_loss\n");
            for (const auto& s : history) loss.print("{},{:.9g},{:.9g}\n", s.epoch, s.train_loss, s.val_loss);
        }
        write_run_manifest(dir, "train",
                           {{"data", opt.data_dir.string()},
                            {"block_len", opt.block_len},
                            {"epochs", opt.epochs},
                            {"batch_size", opt.batch_size},
                            {"learning_rate", opt.learning_rate},
                            {"beta1", tc.adam.beta1},
                            {"beta2", tc.adam.beta2},
                            {"eps", tc.adam.eps},
                            {"out", opt.out_model.string()}},
                           opt.seed, {{"train_blocks", train.size()}, {"val_blocks", val.size()}});
        fmt::print(out, "wrote {}\n", opt.out_model.string());
        return kOk;
    });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        int modes = (opt.model ? 1 : 0) + (opt.conventional ? 1 : 0) + (opt.oracle ? 1 : 0);
        if (modes != 1) throw std::invalid_argument("choose exactly one of --model, --conventional, --oracle");
        cnn::Metrics metrics;
        json args = {{"out", opt.out_csv.string()}, {"seed", opt.seed}};

        if (opt.conventional) {
            std::optional<dataset::DatasetSpec> spec;
            if (opt.data_dir) {
                const std::size_t B = opt.block_len.value_or(160);
                std::ifstream in(dataset::manifest_path(*opt.data_dir, dataset::default_name(B)));
                if (!in) throw DataError("no dataset manifest for block length " + std::to_string(B));
                spec = dataset::spec_from_json(json::parse(in).at("spec"));
            }
            auto trials = spec ? experiments::trials_from_dataset(*spec, opt.trials, opt.seed)
                               : experiments::ConventionalTrials{};
            trials.trials = opt.trials;
            trials.seed = opt.seed;
            if (opt.snr_db) trials.snr_lo_db = trials.snr_hi_db = *opt.snr_db;
            if (opt.awgn_only) {
                trials.multipath = false;
                trials.cfo_max_hz = 0.0;
            }
            const auto link = link_for(spec);
            const auto detector = experiments::make_conventional_detector(link);
            const auto verdicts = experiments::run_conventional(link, detector, trials);
            metrics = cnn::score(verdicts);
            args.update({{"mode", "conventional"},
                         {"trials", opt.trials},
                         {"awgn_only", opt.awgn_only},
                         {"snr_db", opt.snr_db ? json(*opt.snr_db) : json(nullptr)}});
        } else {
            if (!opt.data_dir) throw std::invalid_argument("--data is required for model evaluation");
            std::optional<cnn::CnnModel> model;
            std::size_t B = opt.block_len.value_or(160);
            if (opt.model) {
                model = cnn::load_checkpoint(*opt.model);
                if (opt.block_len && *opt.block_len != model->config.block_len)
                    throw DataError(fmt::format("model block length {} does not match --block-len {}",
                                                model->config.block_len, *opt.block_len));
                B = model->config.block_len;
            }
            const auto data = load_dataset(*opt.data_dir, B);
            const auto spec = dataset::spec_from_json(data.manifest.at("spec"));
            const auto parts = dataset::split(data.blocks, spec.split, spec.seed);
            const auto test = dataset::select(data.blocks, parts.test);
            if (model) {
                metrics = cnn::evaluate(*model, test);
                args.update({{"mode", "cnn"}, {"model", opt.model->string()}});
            } else {
                metrics = cnn::evaluate(
                    [](const cnn::LabeledBlock& b) {
                        return b.label >= 0.0f ? DetectionResult{true, std::lround(b.label), b.label}
                                               : DetectionResult::none(-1.0);
                    },
                    test);
                args["mode"] = "oracle";
            }
            args.update({{"data", opt.data_dir->string()}, {"block_len", B}, {"test_blocks", test.size()}});
        }

        const auto dir = parent_or_cwd(opt.out_csv);
        fs::create_directories(dir);
        cnn::write_metrics_csv(metrics, opt.out_csv, summary_path_for(opt.out_csv));
        write_run_manifest(dir, "eval", args, opt.seed);
        print_metrics(out, args["mode"].get<std::string>(), metrics);
        return kOk;
    });
}

int cmd_flops(const FlopsOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const int modes = (opt.block_len ? 1 : 0) + (opt.conventional ? 1 : 0) + (opt.all ? 1 : 0);
        if (modes != 1) throw std::invalid_argument("choose exactly one of --block-len, --conventional, --all");
        json args = {{"sample_rate_hz", opt.sample_rate_hz}};
        if (opt.all) {
            std::vector<std::pair<std::size_t, flops::FlopsReport>> rows;
            for (std::size_t B : cnn::kSupportedBlockLengths) {
                cnn::CnnDetectorConfig cfg;
                cfg.block_len = B;
                rows.emplace_back(B, flops::model_flops(cfg, opt.sample_rate_hz));
            }
            corrsync::CorrDetectorConfig corr;
            rows.emplace_back(corr.window(), flops::conventional_flops(corr, opt.sample_rate_hz));
            fmt::print(out, "detector,block_len,flops_per_block,blocks_per_second,mflops\n");
            for (const auto& [B, r] : rows)
                fmt::print(out, "{},{},{},{:.6f},{:.6f}\n", r.detector, B, r.total_per_block, r.blocks_per_second,
                           r.mflops);
            if (opt.out_dir) {
                fs::create_directories(*opt.out_dir);
                flops::write_comparison_csv(rows, *opt.out_dir / "flops_comparison.csv");
                args["mode"] = "all";
                write_run_manifest(*opt.out_dir, "flops", args, 0);
            }
            return kOk;
        }
        flops::FlopsReport r;
        if (opt.conventional) {
            r = flops::conventional_flops({}, opt.sample_rate_hz);
            args["mode"] = "conventional";
        } else {
            cnn::CnnDetectorConfig cfg;
            cfg.block_len = *opt.block_len;
            r = flops::model_flops(cfg, opt.sample_rate_hz);
            args.update({{"mode", "cnn"}, {"block_len", *opt.block_len}});
        }
        print_report(out, r);
        if (opt.out_dir) {
            fs::create_directories(*opt.out_dir);
            flops::write_layer_csv(r, *opt.out_dir / fmt::format("flops_{}.csv", r.detector));
            auto js = fmt::output_file((*opt.out_dir / fmt::format("flops_{}.json", r.detector)).string());
            js.print("{}\n", flops::summary_json(r).dump(2));
            write_run_manifest(*opt.out_dir, "flops", args, 0);
        }
        return kOk;
    });
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!opt.model && !opt.conventional) throw std::invalid_argument("sweep needs --model and/or --conventional");
        std::optional<cnn::CnnModel> model;
        if (opt.model) model = cnn::load_checkpoint(*opt.model);
        const LinkSimulator link;
        const auto detector = experiments::make_conventional_detector(link);

        const auto dir = parent_or_cwd(opt.out_csv);
        fs::create_directories(dir);
        auto csv = fmt::output_file(opt.out_csv.string());
        csv.print("detector,snr_db,mae,miss_rate,false_alarm_rate,n\n");
        for (std::size_t s = 0; s < opt.snr_db.size(); ++s) {
            const double snr = opt.snr_db[s];
            const auto seed = derive_seed(opt.seed, s);
            if (opt.conventional) {
                experiments::ConventionalTrials t;
                t.trials = opt.trials;
                t.snr_lo_db = t.snr_hi_db = snr;
                t.seed = seed;
                if (opt.awgn_only) {
                    t.multipath = false;
                    t.cfo_max_hz = 0.0;
                }
                const auto m = cnn::score(experiments::run_conventional(link, detector, t));
                csv.print("conventional,{:g},{},{:.6f},{:.6f},{}\n", snr, fmt_opt(m.mae), m.miss_rate,
                          m.false_alarm_rate, m.n_start + m.n_no_start);
                print_metrics(out, fmt::format("conventional @ {:g} dB", snr), m);
            }
            if (model) {
                dataset::DatasetSpec spec;
                spec.block_len = model->config.block_len;
                spec.n_blocks = opt.trials;
                spec.snr_lo_db = spec.snr_hi_db = snr;
                spec.seed = seed;
                if (opt.awgn_only) {
                    spec.channel.multipath = false;
                    spec.channel.cfo_max_hz = 0.0;
                }
                const auto blocks = dataset::generate(spec);
                const auto m = cnn::evaluate(*model, blocks);
                csv.print("cnn_B{},{:g},{},{:.6f},{:.6f},{}\n", spec.block_len, snr, fmt_opt(m.mae), m.miss_rate,
                          m.false_alarm_rate, m.n_start + m.n_no_start);
                print_metrics(out, fmt::format("cnn_B{} @ {:g} dB", spec.block_len, snr), m);
            }
        }
        write_run_manifest(dir, "sweep",
                           {{"model", opt.model ? json(opt.model->string()) : json(nullptr)},
                            {"conventional", opt.conventional},
                            {"snr_db", opt.snr_db},
                            {"trials", opt.trials},
                            {"awgn_only", opt.awgn_only},
                            {"out", opt.out_csv.string()}},
                           opt.seed);
        return kOk;
    });
}

int cmd_preamble(const PreambleOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto spec = preamble::default_spec();
        preamble::save_spec(spec, opt.out);
        if (opt.waveform_csv) {
            const auto wf = preamble::build_preamble(spec);
            auto csv = fmt::output_file(opt.waveform_csv->string());
            csv.print("index,re,im,magnitude\n");
            for (std::size_t i = 0; i < wf.size(); ++i)
                csv.print("{},{:.17g},{:.17g},{:.17g}\n", i, wf[i].real(), wf[i].imag(), std::abs(wf[i]));
        }
        fmt::print(out, "wrote {}\n", opt.out.string());
        return kOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Packet-detection workbench: preamble synthesis, channel simulation, correlation and CNN detectors"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a labelled block dataset");
    gen_cmd->add_option("--spec", gen.spec, "Dataset spec JSON")->required();
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    gen_cmd->add_option("--block-len", gen.block_len, "Override block length");
    gen_cmd->add_option("--n-blocks", gen.n_blocks, "Override block count");
    gen_cmd->add_option("--seed", gen.seed, "Override seed");

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train the CNN detector");
    train_cmd->add_option("--data", train.data_dir, "Dataset directory")->required();
    train_cmd->add_option("--block-len", train.block_len, "Block length")->capture_default_str();
    train_cmd->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--batch", train.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Initialisation/shuffle seed")->capture_default_str();
    train_cmd->add_option("--out", train.out_model, "Checkpoint path")->required();

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a detector");
    eval_cmd->add_option("--model", eval.model, "CNN checkpoint");
    eval_cmd->add_flag("--conventional", eval.conventional, "Evaluate the correlation detector");
    eval_cmd->add_flag("--oracle", eval.oracle, "Evaluate a perfect predictor (test hook)");
    eval_cmd->add_option("--data", eval.data_dir, "Dataset directory");
    eval_cmd->add_option("--block-len", eval.block_len, "Block length");
    eval_cmd->add_option("--out", eval.out_csv, "Per-SNR metrics CSV")->required();
    eval_cmd->add_option("--trials", eval.trials, "Conventional trials")->capture_default_str();
    eval_cmd->add_option("--snr", eval.snr_db, "Fixed SNR in dB (conventional)");
    eval_cmd->add_flag("--awgn-only", eval.awgn_only, "No multipath and no CFO (conventional)");
    eval_cmd->add_option("--seed", eval.seed, "Trial seed")->capture_default_str();

    FlopsOptions fl;
    auto* flops_cmd = app.add_subcommand("flops", "Complexity report");
    flops_cmd->add_option("--block-len", fl.block_len, "CNN block length");
    flops_cmd->add_flag("--conventional", fl.conventional, "Correlation detector");
    flops_cmd->add_flag("--all", fl.all, "Six block lengths plus the correlation detector");
    flops_cmd->add_option("--sample-rate", fl.sample_rate_hz, "Sample rate in Hz")->capture_default_str();
    flops_cmd->add_option("--out", fl.out_dir, "Directory for CSV/JSON output");

    SweepOptions sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "MAE / miss / false alarm against SNR");
    sweep_cmd->add_option("--model", sw.model, "CNN checkpoint");
    sweep_cmd->add_flag("--conventional", sw.conventional, "Include the correlation detector");
    sweep_cmd->add_option("--snr", sw.snr_db, "SNR points in dB")->delimiter(',');
    sweep_cmd->add_option("--trials", sw.trials, "Trials per SNR point")->capture_default_str();
    sweep_cmd->add_flag("--awgn-only", sw.awgn_only, "No multipath and no CFO");
    sweep_cmd->add_option("--seed", sw.seed, "Seed")->capture_default_str();
    sweep_cmd->add_option("--out", sw.out_csv, "Output CSV")->required();

    PreambleOptions pre;
    auto* pre_cmd = app.add_subcommand("preamble", "Write the default preamble spec");
    pre_cmd->add_option("--out", pre.out, "Preamble spec JSON")->required();
    pre_cmd->add_option("--waveform", pre.waveform_csv, "Also write the 1 MHz waveform as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*flops_cmd) return cmd_flops(fl, out, err);
    if (*sweep_cmd) return cmd_sweep(sw, out, err);
    if (*pre_cmd) return cmd_preamble(pre, out, err);
    return kUsageError;
}

}  // namespace pdw::cli
