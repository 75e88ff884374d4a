#include "pdw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/os.h>

#include "pdw/detail/binio.hpp"
#include "pdw/parallel.hpp"
#include "pdw/random.hpp"

namespace pdw::dataset {

namespace {

constexpr std::string_view kBlocksMagic{"PDWBLK\0\0", 8};
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8;

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::size_t record_stride(std::size_t block_len) { return 4 * block_len + 4 + 4 + 1; }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<float> amplitudes(const ComplexSignal& y, std::size_t begin, std::size_t len) {
    std::vector<float> out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = static_cast<float>(std::abs(y.samples[begin + i]));
    return out;
}

LinkSimulator make_link(const DatasetSpec& spec) {
    auto pre = spec.preamble_path ? preamble::load_spec(*spec.preamble_path) : preamble::default_spec();
    return LinkSimulator(std::move(pre), {}, preamble::PulseShape::standard(spec.channel.os_factor));
}

}  // namespace

void DatasetSpec::validate() const {
    if (block_len == 0) throw std::invalid_argument("block_len must be positive");
    if (n_blocks == 0) throw std::invalid_argument("n_blocks must be positive");
    if (!in_unit(frac_no_start) || !in_unit(frac_noise_within_no_start))
        throw std::invalid_argument("fractions must lie in [0, 1]");
    if (!(snr_lo_db <= snr_hi_db) || !std::isfinite(snr_lo_db) || !std::isfinite(snr_hi_db))
        throw std::invalid_argument("snr range must be finite and ordered");
    if (!in_unit(split.train) || !in_unit(split.val) || !in_unit(split.test) ||
        std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must lie in [0, 1] and sum to 1");
    if (channel.os_factor == 0) throw std::invalid_argument("os_factor must be >= 1");
    if (channel.cfo_max_hz < 0.0) throw std::invalid_argument("cfo_max_hz must be >= 0");
}

nlohmann::json to_json(const DatasetSpec& s) {
    nlohmann::json j = {
        {"block_len", s.block_len},
        {"n_blocks", s.n_blocks},
        {"frac_no_start", s.frac_no_start},
        {"frac_noise_within_no_start", s.frac_noise_within_no_start},
        {"snr_range_db", {s.snr_lo_db, s.snr_hi_db}},
        {"split", {{"train", s.split.train}, {"val", s.split.val}, {"test", s.split.test}}},
        {"seed", s.seed},
        {"channel",
         {{"multipath", s.channel.multipath},
          {"rms_delay_spread_ns", s.channel.profile.rms_delay_spread_s * 1e9},
          {"truncation_factor", s.channel.profile.truncation_factor},
          {"cfo_max_hz", s.channel.cfo_max_hz},
          {"fractional_timing", s.channel.fractional_timing},
          {"os_factor", s.channel.os_factor}}},
    };
    if (s.preamble_path) j["preamble"] = s.preamble_path->string();
    return j;
}

DatasetSpec spec_from_json(const nlohmann::json& j) {
    DatasetSpec s;
    s.block_len = j.value("block_len", s.block_len);
    s.n_blocks = j.value("n_blocks", s.n_blocks);
    s.frac_no_start = j.value("frac_no_start", s.frac_no_start);
    s.frac_noise_within_no_start = j.value("frac_noise_within_no_start", s.frac_noise_within_no_start);
    if (j.contains("snr_range_db")) {
        const auto& r = j.at("snr_range_db");
        if (!r.is_array() || r.size() != 2) throw std::invalid_argument("snr_range_db must be [lo, hi]");
        s.snr_lo_db = r[0].get<double>();
        s.snr_hi_db = r[1].get<double>();
    }
    if (j.contains("split")) {
        const auto& sp = j.at("split");
        s.split.train = sp.value("train", s.split.train);
        s.split.val = sp.value("val", s.split.val);
        s.split.test = sp.value("test", s.split.test);
    }
    s.seed = j.value("seed", s.seed);
    if (j.contains("channel")) {
        const auto& c = j.at("channel");
        s.channel.multipath = c.value("multipath", s.channel.multipath);
        s.channel.profile.rms_delay_spread_s =
            c.value("rms_delay_spread_ns", s.channel.profile.rms_delay_spread_s * 1e9) * 1e-9;
        s.channel.profile.truncation_factor = c.value("truncation_factor", s.channel.profile.truncation_factor);
        s.channel.cfo_max_hz = c.value("cfo_max_hz", s.channel.cfo_max_hz);
        s.channel.fractional_timing = c.value("fractional_timing", s.channel.fractional_timing);
        s.channel.os_factor = c.value("os_factor", s.channel.os_factor);
    }
    if (j.contains("preamble")) s.preamble_path = j.at("preamble").get<std::string>();
    s.validate();
    return s;
}

DatasetSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset spec: " + path.string());
    return spec_from_json(nlohmann::json::parse(in));
}

cnn::LabeledBlock generate_block(const DatasetSpec& spec, const LinkSimulator& link, std::size_t index,
                                 BlockOrigin* origin) {
    Rng rng(derive_seed(spec.seed, index));
    const std::size_t B = spec.block_len;
    const std::size_t G = kGuardSamples;
    const std::size_t packet_len = link.preamble().size();

    cnn::LabeledBlock block;
    if (rng.uniform() < spec.frac_no_start)
        block.kind = rng.uniform() < spec.frac_noise_within_no_start ? cnn::BlockKind::NoiseOnly
                                                                    : cnn::BlockKind::MidTail;
    else
        block.kind = cnn::BlockKind::Start;

    LinkConditions cond;
    cond.snr_db = rng.uniform(spec.snr_lo_db, spec.snr_hi_db);
    cond.cfo_hz = rng.uniform(-spec.channel.cfo_max_hz, spec.channel.cfo_max_hz);
    const auto tap_seed = rng.bits();
    if (spec.channel.multipath)
        cond.taps = channel::draw_model_b_taps(tap_seed, link.oversampled_rate_hz(), spec.channel.profile);
    if (spec.channel.fractional_timing)
        cond.timing_offset_samples = rng.uniform(0.0, static_cast<double>(spec.channel.os_factor));
    cond.noise_seed = rng.bits();
    block.snr_db = static_cast<float>(cond.snr_db);

    BlockOrigin o;
    switch (block.kind) {
        case cnn::BlockKind::Start: {
            const auto label = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(B) - 1));
            const std::size_t trail = (B > label + packet_len ? B - label - packet_len : 0) + G;
            const auto y = link.receive(G + label, trail, true, cond);
            block.amplitudes = amplitudes(y, G, B);
            block.label = static_cast<float>(label);
            o = {static_cast<long>(label), true};
            break;
        }
        case cnn::BlockKind::NoiseOnly: {
            const std::size_t trail = (B + G > packet_len ? B + G - packet_len : 0);
            const auto y = link.receive(G, trail, false, cond);
            block.amplitudes = amplitudes(y, G, B);
            block.label = -1.0f;
            o = {0, false};
            break;
        }
        case cnn::BlockKind::MidTail: {
            // Window opens 1..len-1 samples after the packet start: either inside
            // the packet or straddling its tail, never containing the start.
            const auto offset =
                static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(packet_len) - 1));
            const auto y = link.receive(G, B + G, true, cond);
            block.amplitudes = amplitudes(y, G + offset, B);
            block.label = -1.0f;
            o = {-static_cast<long>(offset), true};
            break;
        }
    }
    if (origin) *origin = o;
    return block;
}

Generated generate_with_origins(const DatasetSpec& spec) {
    spec.validate();
    const auto link = make_link(spec);
    Generated g;
    g.blocks.resize(spec.n_blocks);
    g.origins.resize(spec.n_blocks);
    parallel_for(spec.n_blocks,
                 [&](std::size_t i) { g.blocks[i] = generate_block(spec, link, i, &g.origins[i]); });
    return g;
}

std::vector<cnn::LabeledBlock> generate(const DatasetSpec& spec) {
    return generate_with_origins(spec).blocks;
}

SplitIndices split(const std::vector<cnn::LabeledBlock>& blocks, const SplitFractions& f, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x53504C4954));  // "SPLIT"
    std::vector<std::size_t> starts;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < blocks.size(); ++i) (blocks[i].label >= 0.0f ? starts : others).push_back(i);
    shuffle(starts, rng);
    shuffle(others, rng);

    const double n = static_cast<double>(blocks.size());
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
    const auto n_val = std::min(blocks.size() - n_train, static_cast<std::size_t>(std::llround(f.val * n)));
    const double start_frac = blocks.empty() ? 0.0 : static_cast<double>(starts.size()) / n;
    const auto train_s = std::min(starts.size(), static_cast<std::size_t>(std::llround(start_frac * n_train)));
    const auto val_s =
        std::min(starts.size() - train_s, static_cast<std::size_t>(std::llround(start_frac * n_val)));
    // Keep partition sizes exact when one class runs short.
    const auto train_o = std::min(others.size(), n_train - std::min(n_train, train_s));
    const auto val_o = std::min(others.size() - train_o, n_val - std::min(n_val, val_s));

    SplitIndices out;
    auto take = [](std::vector<std::size_t>& dst, const std::vector<std::size_t>& src, std::size_t from,
                   std::size_t count) {
        dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
                   src.begin() + static_cast<std::ptrdiff_t>(from + count));
    };
    take(out.train, starts, 0, train_s);
    take(out.train, others, 0, train_o);
    take(out.val, starts, train_s, val_s);
    take(out.val, others, train_o, val_o);
    take(out.test, starts, train_s + val_s, starts.size() - train_s - val_s);
    take(out.test, others, train_o + val_o, others.size() - train_o - val_o);
    shuffle(out.train, rng);
    shuffle(out.val, rng);
    shuffle(out.test, rng);
    return out;
}

std::vector<cnn::LabeledBlock> select(const std::vector<cnn::LabeledBlock>& blocks,
                                      const std::vector<std::size_t>& indices) {
    std::vector<cnn::LabeledBlock> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(blocks.at(i));
    return out;
}

Counts count_kinds(const std::vector<cnn::LabeledBlock>& blocks) {
    Counts c;
    c.total = blocks.size();
    for (const auto& b : blocks) {
        switch (b.kind) {
            case cnn::BlockKind::Start: ++c.start; break;
            case cnn::BlockKind::NoiseOnly: ++c.noise_only; break;
            case cnn::BlockKind::MidTail: ++c.mid_tail; break;
        }
    }
    return c;
}

std::filesystem::path manifest_path(const std::filesystem::path& dir, const std::string& name) {
    return dir / (name + ".manifest.json");
}

std::filesystem::path blocks_path(const std::filesystem::path& dir, const std::string& name) {
    return dir / (name + ".blocks.bin");
}

std::string default_name(std::size_t block_len) { return fmt::format("blocks_B{}", block_len); }

nlohmann::json save(const std::filesystem::path& dir, const std::string& name, const DatasetSpec& spec,
                    const std::vector<cnn::LabeledBlock>& blocks) {
    const std::size_t B = spec.block_len;
    detail::ByteWriter w;
    w.data().reserve(kHeaderBytes + blocks.size() * record_stride(B));
    w.bytes(kBlocksMagic);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(B));
    w.u64(blocks.size());
    for (const auto& b : blocks) {
        if (b.amplitudes.size() != B) throw std::invalid_argument("block length disagrees with spec");
        for (float a : b.amplitudes) w.f32(a);
        w.f32(b.label);
        w.f32(b.snr_db);
        w.u8(static_cast<std::uint8_t>(b.kind));
    }
    std::filesystem::create_directories(dir);
    detail::write_file(blocks_path(dir, name).string(), w.data());

    const auto counts = count_kinds(blocks);
    nlohmann::json manifest = {
        {"format", "pdw-dataset"},
        {"version", kDatasetVersion},
        {"name", name},
        {"blocks_file", blocks_path(dir, name).filename().string()},
        {"block_len", B},
        {"record_stride", record_stride(B)},
        {"record_layout", "f32le amplitudes[block_len], f32le label, f32le snr_db, u8 kind"},
        {"counts",
         {{"total", counts.total},
          {"start", counts.start},
          {"noise_only", counts.noise_only},
          {"mid_tail", counts.mid_tail}}},
        {"crc32", fmt::format("{:08x}", detail::crc32(w.data()))},
        {"spec", to_json(spec)},
    };
    auto out = fmt::output_file(manifest_path(dir, name).string());
    out.print("{}\n", manifest.dump(2));
    return manifest;
}

DatasetFile load(const std::filesystem::path& dir, const std::string& name) {
    DatasetFile f;
    {
        std::ifstream in(manifest_path(dir, name));
        if (!in) throw std::runtime_error("cannot open dataset manifest: " + manifest_path(dir, name).string());
        try {
            f.manifest = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw CorruptFileError(std::string("manifest is not valid JSON: ") + e.what());
        }
    }
    const auto& m = f.manifest;
    try {
        if (m.at("format") != "pdw-dataset") throw CorruptFileError("not a dataset manifest");
        if (m.at("version").get<std::uint32_t>() != kDatasetVersion)
            throw CorruptFileError("unsupported dataset version");
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("manifest incomplete: ") + e.what());
    }

    const auto bytes = detail::read_file(blocks_path(dir, name).string());
    if (fmt::format("{:08x}", detail::crc32(bytes)) != m.value("crc32", std::string{}))
        throw CorruptFileError("dataset checksum mismatch");

    detail::ByteReader r(bytes);
    if (r.bytes(kBlocksMagic.size()) != kBlocksMagic) throw CorruptFileError("not a dataset blocks file");
    if (r.u32() != kDatasetVersion) throw CorruptFileError("blocks file version mismatch");
    const std::size_t B = r.u32();
    const std::uint64_t count = r.u64();
    if (B != m.value("block_len", std::size_t{0}))
        throw CorruptFileError("manifest block_len disagrees with records");
    if (count != m["counts"].value("total", std::size_t{0}))
        throw CorruptFileError("manifest record count disagrees with records");
    if (r.remaining() != count * record_stride(B)) throw CorruptFileError("blocks file truncated");

    f.blocks.resize(count);
    for (auto& b : f.blocks) {
        b.amplitudes.resize(B);
        for (float& a : b.amplitudes) a = r.f32();
        b.label = r.f32();
        b.snr_db = r.f32();
        const auto kind = r.u8();
        if (kind > 2) throw CorruptFileError("unknown block kind");
        b.kind = static_cast<cnn::BlockKind>(kind);
    }
    return f;
}

}  // namespace pdw::dataset
