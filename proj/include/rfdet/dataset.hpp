// SPDX-License-Identifier: Apache-2.0
#pragma once

// Labeled noisy-spectrogram dataset: generation, stratified k-fold splits and
// the on-disk format (manifest.json + data.bin).
//
// data.bin is a sequence of fixed-size little-endian records:
//   u16 class_id | i16 round(snr_db * 100) | f32[2*S*C] planes | u32 crc32
// The CRC covers the preceding bytes of the same record.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ranges>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "rfdet/errors.hpp"
#include "rfdet/rng.hpp"
#include "rfdet/sigcore.hpp"
#include "rfdet/spectro.hpp"
#include "rfdet/synth.hpp"

namespace rfdet {

inline constexpr std::size_t num_classes = 7;
inline constexpr std::array<std::string_view, num_classes> class_names = {
    "DJI", "FutabaT14", "FutabaT7", "Graupner", "Noise", "Taranis", "Turnigy"};
inline constexpr int noise_class = 4;

using ClassCounts = std::array<std::size_t, num_classes>;

inline int class_of(Transmitter t) {
    switch (t) {
        case Transmitter::DJI: return 0;
        case Transmitter::FutabaT14: return 1;
        case Transmitter::FutabaT7: return 2;
        case Transmitter::Graupner: return 3;
        case Transmitter::Taranis: return 5;
        case Transmitter::Turnigy: return 6;
    }
    return noise_class;
}

inline Transmitter transmitter_of(int class_id) {
    for (auto t : all_transmitters)
        if (class_of(t) == class_id) return t;
    throw invalid_input("class " + std::to_string(class_id) + " is not a transmitter class");
}

inline int class_from_name(std::string_view name) {
    for (std::size_t c = 0; c < num_classes; ++c)
        if (class_names[c] == name) return static_cast<int>(c);
    throw invalid_input("unknown class '" + std::string(name) + "'");
}

inline bool is_drone_class(int class_id) { return class_id != noise_class; }

inline constexpr double snr_min_db = -20.0;
inline constexpr double snr_max_db = 30.0;
inline constexpr double snr_step_db = 2.0;

/// -20, -18, ..., 30 dB.
inline std::vector<double> snr_grid() {
    std::vector<double> g;
    for (double s = snr_min_db; s <= snr_max_db + 1e-9; s += snr_step_db) g.push_back(s);
    return g;
}

/// Which noise recordings went into a sample.
enum class MixKind { Lab, Gauss, LabLab, LabGauss, GaussLab, GaussGauss };

inline std::string_view to_string(MixKind k) {
    switch (k) {
        case MixKind::Lab: return "Lab";
        case MixKind::Gauss: return "Gauss";
        case MixKind::LabLab: return "Lab+Lab";
        case MixKind::LabGauss: return "Lab+Gauss";
        case MixKind::GaussLab: return "Gauss+Lab";
        case MixKind::GaussGauss: return "Gauss+Gauss";
    }
    return "?";
}

inline MixKind mix_kind_from_string(std::string_view s) {
    for (auto k : {MixKind::Lab, MixKind::Gauss, MixKind::LabLab, MixKind::LabGauss, MixKind::GaussLab,
                   MixKind::GaussGauss})
        if (to_string(k) == s) return k;
    throw format_error(format_error::kind::schema, "unknown mix kind '" + std::string(s) + "'");
}

struct LabeledSample {
    Spectrogram<float> spectrogram;
    int class_id = 0;
    double snr_db = 0.0;
    MixKind mix = MixKind::Gauss;
};

// ---------------------------------------------------------------------------
// Generation

struct DatasetConfig {
    ClassCounts class_counts{};
    ScaleProfile profile = ScaleProfile::desk();
    std::uint64_t seed = 0;
    TransmitterTable transmitters = default_transmitter_table();
    NoiseModel lab_noise = NoiseModel::lab_like();
    int capture_decimation = 4;         // recordings are synthesized at 4x and decimated
    double capture_floor_power = 1e-4;  // receiver floor of the clean recordings
    std::size_t smooth_window = default_smooth_window;
    double burst_threshold = default_burst_threshold;
    double min_burst_fraction = 0.25;   // part of the burst that must lie inside the frame

    static ClassCounts desk_counts() { return {1560, 1560, 1560, 1560, 9360, 1560, 1560}; }
    static ClassCounts paper_counts() { return {1280, 3472, 801, 801, 8872, 1663, 855}; }

    static DatasetConfig desk(std::uint64_t seed) {
        DatasetConfig c;
        c.class_counts = desk_counts();
        c.seed = seed;
        return c;
    }
};

/// Clean drone frame prior to mixing, with the quantities the selection and
/// normalization steps looked at.
struct DroneFrame {
    IqFrame<float> frame;
    BurstMask mask;
    double recording_mean_energy = 0.0;
    double peak_energy = 0.0;
};

namespace detail {

inline double expected_duty_cycle(const TransmitterModel& m) {
    const double mean_d = std::accumulate(m.burst_durations_s.begin(), m.burst_durations_s.end(), 0.0) /
                          static_cast<double>(m.burst_durations_s.size());
    const double mean_rep = m.repetition_range_s ? 0.5 * (m.repetition_range_s->first + m.repetition_range_s->second)
                                                 : m.repetition_s;
    return mean_d / mean_rep;
}

inline double draw_gap(const TransmitterModel& m, const ScaleProfile& p, rng_engine& rng) {
    if (m.repetition_range_s)
        return uniform(rng, m.repetition_range_s->first, m.repetition_range_s->second) * p.time_scale;
    return m.repetition_s * p.time_scale;
}

}  // namespace detail

/// Synthesize a recording excerpt at the capture rate around a frame that holds
/// at least `min_burst_fraction` of one burst, decimate to the profile rate and
/// keep the frame if its energy clears the segment-selection threshold.
inline DroneFrame synth_drone_frame(const DatasetConfig& cfg, Transmitter tx, std::uint64_t sample_seed) {
    const auto& model = find_model(cfg.transmitters, tx);
    const auto& p = cfg.profile;
    const int q = cfg.capture_decimation;
    const double fs_cap = p.sample_rate_hz * q;
    const std::size_t pad = std::min<std::size_t>(256, p.frame_length);
    const std::size_t seg_len = (p.frame_length + 2 * pad) * static_cast<std::size_t>(q);
    const double frame_t0 = static_cast<double>(pad * static_cast<std::size_t>(q)) / fs_cap;
    const double frame_t1 = frame_t0 + p.frame_duration_s();
    const double seg_t1 = static_cast<double>(seg_len) / fs_cap;
    const auto grid = channel_frequencies(model, p);
    const double recording_mean = detail::expected_duty_cycle(model) + cfg.capture_floor_power;

    for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
        auto rng = make_rng(sample_seed, {attempt});
        std::vector<cplx<float>> seg(seg_len);
        for (auto& z : seg) z = complex_normal<float>(rng, cfg.capture_floor_power);

        auto place = [&](double start_s, double dur_s) {
            const double f = grid[uniform_index(rng, grid.size())];
            const auto burst = render_burst<float>(model, p, dur_s, f, rng, q);
            detail::add_burst(seg, static_cast<std::ptrdiff_t>(std::llround(start_s * fs_cap)),
                              burst.samples, 1.0);
        };

        const double d0 = draw_burst_duration(model, p, rng);
        if (burst_samples(d0, p) > p.frame_length)
            throw config_error("burst does not fit in a frame at profile '" + p.name + "'");
        const double lead = (1.0 - cfg.min_burst_fraction) * d0;
        const double s0 = uniform(rng, frame_t0 - lead, frame_t1 - cfg.min_burst_fraction * d0);
        place(s0, d0);
        // Neighbouring bursts of the same transmitter that reach into the excerpt.
        for (double t = s0 + detail::draw_gap(model, p, rng); t < seg_t1; t += detail::draw_gap(model, p, rng))
            place(t, draw_burst_duration(model, p, rng));
        for (double t = s0 - detail::draw_gap(model, p, rng);; t -= detail::draw_gap(model, p, rng)) {
            const double d = draw_burst_duration(model, p, rng);
            if (t + d <= 0.0) break;
            place(t, d);
        }

        const auto dec = decimate(IqFrame<float>(std::move(seg), fs_cap), q);
        DroneFrame out;
        out.frame.sample_rate_hz = p.sample_rate_hz;
        out.frame.samples.assign(dec.samples.begin() + static_cast<std::ptrdiff_t>(pad),
                                 dec.samples.begin() + static_cast<std::ptrdiff_t>(pad + p.frame_length));
        out.recording_mean_energy = recording_mean;
        out.peak_energy = peak_smoothed_energy(out.frame, cfg.smooth_window);
        if (!segment_has_burst(out.peak_energy, recording_mean)) continue;
        out.mask = detect_bursts(out.frame, cfg.smooth_window, cfg.burst_threshold);
        return out;
    }
    throw config_error("could not synthesize a frame containing a burst for " + std::string(to_string(tx)));
}

namespace detail {

inline std::uint64_t sample_seed(std::uint64_t seed, int class_id, std::size_t index) {
    return derive_seed(seed, {0x73616d706c65ULL, static_cast<std::uint64_t>(class_id), index});
}

/// Balanced assignment of `kinds` values over n samples, shuffled so it is
/// independent of the SNR assignment (index mod grid size).
inline std::vector<std::size_t> balanced_assignment(std::size_t n, std::size_t kinds, std::uint64_t seed) {
    std::vector<std::size_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = i % kinds;
    auto rng = make_rng(seed, {0x6b696e6473ULL});
    std::shuffle(a.begin(), a.end(), rng);
    return a;
}

}  // namespace detail

inline void validate(const DatasetConfig& cfg) {
    cfg.profile.validate();
    if (cfg.capture_decimation < 2) throw config_error("dataset: capture decimation must be >= 2");
    const auto levels = snr_grid().size();
    for (std::size_t c = 0; c < num_classes; ++c)
        if (cfg.class_counts[c] < levels)
            throw config_error("dataset: class " + std::string(class_names[c]) + " needs at least " +
                               std::to_string(levels) + " samples to cover every SNR level");
    for (auto t : all_transmitters) find_model(cfg.transmitters, t).validate();
    cfg.lab_noise.validate();
}

/// The index-th sample of a class. Pure in (cfg, class_id, index).
inline LabeledSample make_sample(const DatasetConfig& cfg, int class_id, std::size_t index) {
    const auto grid = snr_grid();
    const auto& p = cfg.profile;
    const auto count = cfg.class_counts.at(static_cast<std::size_t>(class_id));
    const std::uint64_t seed = detail::sample_seed(cfg.seed, class_id, index);
    const SnrSpec snr{grid[index % grid.size()]};

    auto noise = [&](bool lab, std::uint64_t tag) {
        const auto model = lab ? cfg.lab_noise : NoiseModel::gaussian();
        return normalize_mean_power(synth_noise<float>(model, p, p.frame_length, derive_seed(seed, {tag})));
    };

    LabeledSample s;
    s.class_id = class_id;
    s.snr_db = snr.snr_db;
    IqFrame<float> mixed;
    if (class_id == noise_class) {
        const auto kinds = detail::balanced_assignment(count, 4, derive_seed(cfg.seed, {0x4e6f697365ULL}));
        static constexpr std::array<MixKind, 4> combos = {MixKind::LabLab, MixKind::LabGauss, MixKind::GaussLab,
                                                          MixKind::GaussGauss};
        s.mix = combos[kinds[index]];
        const bool first_lab = s.mix == MixKind::LabLab || s.mix == MixKind::LabGauss;
        const bool second_lab = s.mix == MixKind::LabLab || s.mix == MixKind::GaussLab;
        mixed = mix_at_snr(noise(first_lab, 1), noise(second_lab, 2), snr);
    } else {
        const auto kinds = detail::balanced_assignment(count, 2, derive_seed(cfg.seed, {0x44726f6e65ULL,
                                                                                        static_cast<std::uint64_t>(class_id)}));
        s.mix = kinds[index] == 0 ? MixKind::Lab : MixKind::Gauss;
        const auto clean = synth_drone_frame(cfg, transmitter_of(class_id), seed);
        mixed = mix_at_snr(normalize_carrier_power(clean.frame, clean.mask), noise(s.mix == MixKind::Lab, 1), snr);
    }
    s.spectrogram = complex_spectrogram(mixed, p.segment_length);
    return s;
}

struct DatasetManifest {
    int version = 1;
    ScaleProfile profile = ScaleProfile::desk();
    std::vector<double> snr_grid;
    ClassCounts class_counts{};
    std::size_t segment_length = 0;
    std::size_t columns = 0;
    PlaneStats stats;  // over the whole dataset; training uses per-split stats
    std::uint64_t seed = 0;
    std::vector<MixKind> mixes;

    std::size_t num_samples() const { return std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0}); }
    std::size_t record_bytes() const { return 2 + 2 + 4 * 2 * segment_length * columns + 4; }
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledSample> samples;

    std::vector<int> labels() const {
        std::vector<int> out(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].class_id;
        return out;
    }
};

/// Generate every class in class order; samples of one class are contiguous.
inline Dataset build_dataset(const DatasetConfig& cfg) {
    validate(cfg);
    Dataset ds;
    auto& m = ds.manifest;
    m.profile = cfg.profile;
    m.snr_grid = snr_grid();
    m.class_counts = cfg.class_counts;
    m.segment_length = cfg.profile.segment_length;
    m.columns = cfg.profile.columns();
    m.seed = cfg.seed;
    ds.samples.reserve(m.num_samples());
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t i = 0; i < cfg.class_counts[c]; ++i) ds.samples.push_back(make_sample(cfg, static_cast<int>(c), i));
    for (const auto& s : ds.samples) m.mixes.push_back(s.mix);
    m.stats = compute_plane_stats<float>(
        std::views::transform(ds.samples, [](const LabeledSample& s) -> const Spectrogram<float>& { return s.spectrogram; }));
    return ds;
}

// ---------------------------------------------------------------------------
// Stratified k-fold

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

struct SplitPlan {
    std::vector<Fold> folds;
};

/// Per class: shuffle, deal round-robin into k test folds; within each fold's
/// training portion hold out `val_fraction` of every class for validation.
inline SplitPlan stratified_kfold(std::span<const int> labels, std::size_t k = 5, double val_fraction = 0.2,
                                  std::uint64_t seed = 0) {
    if (k < 2) throw invalid_input("stratified_kfold: k must be >= 2");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw invalid_input("stratified_kfold: val_fraction in [0, 1)");
    int max_label = -1;
    for (int l : labels) {
        if (l < 0) throw invalid_input("stratified_kfold: negative label");
        max_label = std::max(max_label, l);
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (!by_class[c].empty() && by_class[c].size() < k)
            throw invalid_input("stratified_kfold: class " + std::to_string(c) + " has fewer than k samples");

    SplitPlan plan;
    plan.folds.resize(k);
    std::vector<std::vector<std::vector<std::size_t>>> class_folds(by_class.size(), std::vector<std::vector<std::size_t>>(k));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto idx = by_class[c];
        auto rng = make_rng(seed, {0x666f6c64ULL, c});
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t r = 0; r < idx.size(); ++r) class_folds[c][r % k].push_back(idx[r]);
    }

    for (std::size_t f = 0; f < k; ++f) {
        auto& fold = plan.folds[f];
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            fold.test.insert(fold.test.end(), class_folds[c][f].begin(), class_folds[c][f].end());
            std::vector<std::size_t> rest;
            for (std::size_t g = 0; g < k; ++g)
                if (g != f) rest.insert(rest.end(), class_folds[c][g].begin(), class_folds[c][g].end());
            auto rng = make_rng(seed, {0x76616cULL, f, c});
            std::shuffle(rest.begin(), rest.end(), rng);
            const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(rest.size())));
            fold.val.insert(fold.val.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
            fold.train.insert(fold.train.end(), rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
        }
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.val.begin(), fold.val.end());
        std::sort(fold.test.begin(), fold.test.end());
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xff));
    b.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw io_error("short write to '" + path.string() + "'");
}

}  // namespace detail

inline constexpr int dataset_format_version = 1;

inline nlohmann::json manifest_json(const DatasetManifest& m) {
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t c = 0; c < num_classes; ++c) counts[std::string(class_names[c])] = m.class_counts[c];
    nlohmann::json mixes = nlohmann::json::array();
    for (auto k : m.mixes) mixes.push_back(std::string(to_string(k)));
    return {
        {"version", m.version},
        {"profile", m.profile},
        {"classes", std::vector<std::string>(class_names.begin(), class_names.end())},
        {"snr_grid_db", m.snr_grid},
        {"class_counts", counts},
        {"spectrogram_shape", {2, m.segment_length, m.columns}},
        {"dtype", "float32-le"},
        {"record_layout", "u16 class_id, i16 snr_db*100, f32 planes [2,S,C] plane-major row-major, u32 crc32"},
        {"record_bytes", m.record_bytes()},
        {"fft", {{"normalization", "unitary"}, {"bin_order", "dc_centered"}, {"window", "rectangular"}}},
        {"standardization", {{"mean", m.stats.mean}, {"std", m.stats.stddev}}},
        {"seed", m.seed},
        {"num_samples", m.num_samples()},
        {"mix", mixes},
    };
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != dataset_format_version)
            throw format_error(format_error::kind::version, "dataset version " + std::to_string(m.version) +
                                                                " is not supported");
        const auto classes = j.at("classes").get<std::vector<std::string>>();
        if (classes != std::vector<std::string>(class_names.begin(), class_names.end()))
            throw format_error(format_error::kind::schema, "dataset class table differs from the fixed class order");
        m.profile = j.at("profile").get<ScaleProfile>();
        m.snr_grid = j.at("snr_grid_db").get<std::vector<double>>();
        for (std::size_t c = 0; c < num_classes; ++c)
            m.class_counts[c] = j.at("class_counts").at(std::string(class_names[c])).get<std::size_t>();
        const auto shape = j.at("spectrogram_shape").get<std::vector<std::size_t>>();
        if (shape.size() != 3 || shape[0] != 2) throw format_error(format_error::kind::schema, "bad spectrogram shape");
        m.segment_length = shape[1];
        m.columns = shape[2];
        if (j.at("dtype").get<std::string>() != "float32-le")
            throw format_error(format_error::kind::schema, "unsupported dtype");
        m.stats.mean = j.at("standardization").at("mean").get<std::array<double, 2>>();
        m.stats.stddev = j.at("standardization").at("std").get<std::array<double, 2>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("mix")) m.mixes.push_back(mix_kind_from_string(s.get<std::string>()));
        if (j.at("num_samples").get<std::size_t>() != m.num_samples() || m.mixes.size() != m.num_samples())
            throw format_error(format_error::kind::schema, "manifest sample counts are inconsistent");
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_error::kind::schema, std::string("manifest: ") + e.what());
    }
    return m;
}

/// Stable identifier of a manifest (CRC32 of its compact JSON), hex encoded.
inline std::string manifest_hash(const DatasetManifest& m) {
    const auto text = manifest_json(m).dump();
    const auto crc = detail::crc32_of(reinterpret_cast<const unsigned char*>(text.data()), text.size());
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc);
    return buf;
}

inline std::vector<unsigned char> encode_record(const LabeledSample& s) {
    std::vector<unsigned char> b;
    b.reserve(8 + 4 * s.spectrogram.planes.size());
    detail::put_u16(b, static_cast<std::uint16_t>(s.class_id));
    detail::put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(s.snr_db * 100.0))));
    for (float v : s.spectrogram.planes) detail::put_u32(b, std::bit_cast<std::uint32_t>(v));
    detail::put_u32(b, detail::crc32_of(b.data(), b.size()));
    return b;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create '" + dir.string() + "': " + ec.message());
    const auto& m = ds.manifest;
    if (ds.samples.size() != m.num_samples()) throw invalid_input("save_dataset: sample count disagrees with manifest");

    std::vector<unsigned char> data;
    data.reserve(m.record_bytes() * ds.samples.size());
    for (const auto& s : ds.samples) {
        if (s.spectrogram.segment_length != m.segment_length || s.spectrogram.columns != m.columns)
            throw invalid_input("save_dataset: spectrogram shape disagrees with manifest");
        const auto rec = encode_record(s);
        data.insert(data.end(), rec.begin(), rec.end());
    }
    detail::write_file(dir / "data.bin", data.data(), data.size());
    const auto text = manifest_json(m).dump(2) + "\n";
    detail::write_file(dir / "manifest.json", text.data(), text.size());
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
    const auto raw = detail::read_file(dir / "manifest.json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
        throw format_error(format_error::kind::schema, std::string("manifest: ") + e.what());
    }
    return manifest_from_json(j);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.manifest = load_manifest(dir);
    const auto& m = ds.manifest;
    const auto data = detail::read_file(dir / "data.bin");
    const std::size_t rb = m.record_bytes();
    if (data.size() != rb * m.num_samples())
        throw format_error(format_error::kind::truncated, "data.bin holds " + std::to_string(data.size()) +
                                                              " bytes, expected " + std::to_string(rb * m.num_samples()));
    ClassCounts seen{};
    ds.samples.resize(m.num_samples());
    const std::size_t nvals = 2 * m.segment_length * m.columns;
    for (std::size_t r = 0; r < m.num_samples(); ++r) {
        const unsigned char* p = data.data() + r * rb;
        if (detail::crc32_of(p, rb - 4) != detail::get_u32(p + rb - 4))
            throw format_error(format_error::kind::checksum, "record " + std::to_string(r) + " failed its checksum");
        auto& s = ds.samples[r];
        s.class_id = detail::get_u16(p);
        if (s.class_id >= static_cast<int>(num_classes))
            throw format_error(format_error::kind::schema, "record " + std::to_string(r) + " has an invalid class");
        s.snr_db = static_cast<std::int16_t>(detail::get_u16(p + 2)) / 100.0;
        s.mix = m.mixes[r];
        s.spectrogram = Spectrogram<float>(m.segment_length, m.columns);
        for (std::size_t k = 0; k < nvals; ++k) s.spectrogram.planes[k] = std::bit_cast<float>(detail::get_u32(p + 4 + 4 * k));
        ++seen[static_cast<std::size_t>(s.class_id)];
    }
    if (seen != m.class_counts) throw format_error(format_error::kind::schema, "per-class counts disagree with manifest");
    return ds;
}

}  // namespace rfdet
