// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic stand-ins for the recorded transmitters and interference.
//
// Transmitter parameters are kept in physical units of the 14 MHz capture
// (the reference band); a ScaleProfile maps them onto its own sample rate
// (frequencies scale with the bandwidth ratio) and time base (durations and
// repetition periods scale with time_scale).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/errors.hpp"
#include "rfdet/rng.hpp"
#include "rfdet/sigcore.hpp"

namespace rfdet {

inline constexpr double reference_sample_rate_hz = 14e6;
inline constexpr double band_center_hz = 2.44175e9;

enum class Transmitter { DJI, FutabaT7, FutabaT14, Graupner, Taranis, Turnigy };

inline constexpr std::array<Transmitter, 6> all_transmitters = {
    Transmitter::DJI, Transmitter::FutabaT7, Transmitter::FutabaT14,
    Transmitter::Graupner, Transmitter::Taranis, Transmitter::Turnigy};

inline std::string_view to_string(Transmitter t) {
    switch (t) {
        case Transmitter::DJI: return "DJI";
        case Transmitter::FutabaT7: return "FutabaT7";
        case Transmitter::FutabaT14: return "FutabaT14";
        case Transmitter::Graupner: return "Graupner";
        case Transmitter::Taranis: return "Taranis";
        case Transmitter::Turnigy: return "Turnigy";
    }
    return "?";
}

inline Transmitter transmitter_from_string(std::string_view s) {
    for (auto t : all_transmitters)
        if (to_string(t) == s) return t;
    throw config_error("unknown transmitter label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Scale profiles

struct ScaleProfile {
    std::string name;
    double sample_rate_hz = 0.0;
    std::size_t frame_length = 0;
    std::size_t segment_length = 0;
    double time_scale = 1.0;

    double frequency_scale() const noexcept { return sample_rate_hz / reference_sample_rate_hz; }
    double frame_duration_s() const noexcept { return static_cast<double>(frame_length) / sample_rate_hz; }
    std::size_t columns() const noexcept { return frame_length / segment_length; }

    /// frame_length must equal S^2 * 2^j so the spectrogram tiles exactly.
    void validate() const {
        if (!(sample_rate_hz > 0.0)) throw config_error("profile: sample rate must be positive");
        if (!(time_scale > 0.0)) throw config_error("profile: time_scale must be positive");
        const std::size_t s = segment_length;
        if (s < 2 || (s & (s - 1)) != 0) throw config_error("profile: segment length must be a power of two");
        if (frame_length % (s * s) != 0) throw config_error("profile: frame length must be a multiple of S^2");
        const std::size_t r = frame_length / (s * s);
        if ((r & (r - 1)) != 0) throw config_error("profile: frame length must be S^2 times a power of two");
    }

    static ScaleProfile paper() { return {"paper", 14e6, std::size_t{1} << 20, 1024, 1.0}; }
    static ScaleProfile desk() { return {"desk", 250e3, 4096, 64, 1.0}; }

    static ScaleProfile by_name(std::string_view name) {
        if (name == "paper") return paper();
        if (name == "desk") return desk();
        throw config_error("unknown profile '" + std::string(name) + "'");
    }
};

inline void to_json(nlohmann::json& j, const ScaleProfile& p) {
    j = {{"name", p.name},
         {"sample_rate_hz", p.sample_rate_hz},
         {"frame_length", p.frame_length},
         {"segment_length", p.segment_length},
         {"time_scale", p.time_scale}};
}

inline void from_json(const nlohmann::json& j, ScaleProfile& p) {
    j.at("name").get_to(p.name);
    j.at("sample_rate_hz").get_to(p.sample_rate_hz);
    j.at("frame_length").get_to(p.frame_length);
    j.at("segment_length").get_to(p.segment_length);
    j.at("time_scale").get_to(p.time_scale);
    p.validate();
}

// ---------------------------------------------------------------------------
// Transmitter models

struct TransmitterModel {
    Transmitter label = Transmitter::DJI;
    double center_freq_hz = band_center_hz;
    double channel_spacing_hz = 0.0;
    std::vector<double> burst_durations_s;  // alternatives drawn with equal probability
    double repetition_s = 0.0;              // fixed period (ignored when a range is set)
    std::optional<std::pair<double, double>> repetition_range_s;
    double bandwidth_fraction = 0.8;

    double center_offset_hz() const noexcept { return center_freq_hz - band_center_hz; }
    double burst_bandwidth_hz() const noexcept { return bandwidth_fraction * channel_spacing_hz; }
    double min_repetition_s() const noexcept { return repetition_range_s ? repetition_range_s->first : repetition_s; }

    void validate() const {
        if (!(channel_spacing_hz > 0.0)) throw config_error("transmitter: channel spacing must be positive");
        if (burst_durations_s.empty() || burst_durations_s.size() > 2)
            throw config_error("transmitter: one or two burst durations expected");
        for (double d : burst_durations_s) {
            if (!(d > 0.0)) throw config_error("transmitter: burst duration must be positive");
            if (!(d < min_repetition_s())) throw config_error("transmitter: burst must be shorter than its repetition period");
        }
        if (repetition_range_s && !(repetition_range_s->first > 0.0 && repetition_range_s->second >= repetition_range_s->first))
            throw config_error("transmitter: invalid repetition range");
        if (!(bandwidth_fraction > 0.0 && bandwidth_fraction <= 1.0))
            throw config_error("transmitter: bandwidth must not exceed the channel spacing");
    }
};

using TransmitterTable = std::vector<TransmitterModel>;

/// Macro parameters of the six recorded transmitters.
inline TransmitterTable default_transmitter_table() {
    auto fixed = [](Transmitter t, double fc_ghz, double spacing_mhz, std::vector<double> dur_ms, double rep_ms) {
        TransmitterModel m;
        m.label = t;
        m.center_freq_hz = fc_ghz * 1e9;
        m.channel_spacing_hz = spacing_mhz * 1e6;
        for (double d : dur_ms) m.burst_durations_s.push_back(d * 1e-3);
        m.repetition_s = rep_ms * 1e-3;
        return m;
    };
    TransmitterTable table = {
        fixed(Transmitter::DJI, 2.44175, 1.7, {2.18}, 630),
        fixed(Transmitter::FutabaT7, 2.44175, 2.0, {1.7}, 288),
        fixed(Transmitter::FutabaT14, 2.44175, 3.1, {1.4}, 330),
        fixed(Transmitter::Graupner, 2.44175, 1.0, {1.9, 3.7}, 750),
        fixed(Transmitter::Taranis, 2.440, 1.5, {3.1, 4.4}, 420),
        fixed(Transmitter::Turnigy, 2.445, 2.0, {1.3}, 120),
    };
    table.back().repetition_range_s = std::pair{0.120, 2.900};
    return table;
}

inline const TransmitterModel& find_model(const TransmitterTable& table, Transmitter t) {
    for (const auto& m : table)
        if (m.label == t) return m;
    throw config_error("transmitter table has no entry for " + std::string(to_string(t)));
}

inline void to_json(nlohmann::json& j, const TransmitterModel& m) {
    nlohmann::json dur = nlohmann::json::array();
    for (double d : m.burst_durations_s) dur.push_back(d * 1e3);
    j = {{"label", std::string(to_string(m.label))},
         {"center_freq_ghz", m.center_freq_hz / 1e9},
         {"spacing_mhz", m.channel_spacing_hz / 1e6},
         {"duration_ms", dur},
         {"bandwidth_fraction", m.bandwidth_fraction}};
    if (m.repetition_range_s)
        j["repetition_ms"] = {{"min", m.repetition_range_s->first * 1e3}, {"max", m.repetition_range_s->second * 1e3}};
    else
        j["repetition_ms"] = m.repetition_s * 1e3;
}

inline void from_json(const nlohmann::json& j, TransmitterModel& m) {
    m = TransmitterModel{};
    m.label = transmitter_from_string(j.at("label").get<std::string>());
    m.center_freq_hz = j.at("center_freq_ghz").get<double>() * 1e9;
    m.channel_spacing_hz = j.at("spacing_mhz").get<double>() * 1e6;
    const auto& dur = j.at("duration_ms");
    if (dur.is_array()) {
        for (const auto& d : dur) m.burst_durations_s.push_back(d.get<double>() * 1e-3);
    } else {
        m.burst_durations_s.push_back(dur.get<double>() * 1e-3);
    }
    const auto& rep = j.at("repetition_ms");
    if (rep.is_object()) {
        m.repetition_range_s = std::pair{rep.at("min").get<double>() * 1e-3, rep.at("max").get<double>() * 1e-3};
        m.repetition_s = m.repetition_range_s->first;
    } else {
        m.repetition_s = rep.get<double>() * 1e-3;
    }
    m.bandwidth_fraction = j.value("bandwidth_fraction", 0.8);
    m.validate();
}

/// Table file: {"band_center_ghz": ..., "transmitters": [...]}.
inline nlohmann::json transmitter_table_json(const TransmitterTable& table) {
    return {{"band_center_ghz", band_center_hz / 1e9}, {"transmitters", table}};
}

inline TransmitterTable load_transmitter_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open transmitter table '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
        if (std::abs(j.value("band_center_ghz", band_center_hz / 1e9) * 1e9 - band_center_hz) > 1.0)
            throw config_error("transmitter table: only the 2.44175 GHz band center is supported");
        return j.at("transmitters").get<TransmitterTable>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error("transmitter table '" + path + "': " + e.what());
    }
}

/// Channel center frequencies (baseband, profile units) that fit within 90% of the band.
inline std::vector<double> channel_frequencies(const TransmitterModel& m, const ScaleProfile& p) {
    const double half_usable = 0.45 * reference_sample_rate_hz;
    const double half_bw = m.burst_bandwidth_hz() / 2.0;
    std::vector<double> out;
    const int reach = static_cast<int>(std::ceil(reference_sample_rate_hz / m.channel_spacing_hz)) + 1;
    for (int i = -reach; i <= reach; ++i) {
        const double f = m.center_offset_hz() + i * m.channel_spacing_hz;
        if (std::abs(f) + half_bw <= half_usable) out.push_back(f * p.frequency_scale());
    }
    if (out.empty()) throw config_error("transmitter grid does not fit in the band");
    return out;
}

// ---------------------------------------------------------------------------
// Burst synthesis

namespace detail {

/// Gaussian-filtered frequency modulation with random symbols, unit envelope.
template <typename T>
std::vector<cplx<T>> gfsk(std::size_t n, double fs, double symbol_rate, double mod_index, double bt,
                          double carrier_hz, rng_engine& rng) {
    const double sps = fs / symbol_rate;
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * bt) * sps;
    const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
    double ksum = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
        const double v = std::exp(-0.5 * (k / sigma) * (k / sigma));
        kernel[static_cast<std::size_t>(k + half)] = v;
        ksum += v;
    }
    for (auto& v : kernel) v /= ksum;

    const std::size_t n_ext = n + 2 * static_cast<std::size_t>(half);
    const auto n_sym = static_cast<std::size_t>(std::ceil(n_ext / sps)) + 1;
    std::vector<double> bits(n_sym);
    std::bernoulli_distribution coin(0.5);
    for (auto& b : bits) b = coin(rng) ? 1.0 : -1.0;
    std::vector<double> nrz(n_ext);
    for (std::size_t i = 0; i < n_ext; ++i) nrz[i] = bits[static_cast<std::size_t>(i / sps)];

    const double deviation = mod_index * symbol_rate / 2.0;
    const double two_pi = 2.0 * std::numbers::pi;
    double phase = uniform(rng, 0.0, two_pi);
    std::vector<cplx<T>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double shaped = 0.0;
        for (std::size_t k = 0; k < kernel.size(); ++k) shaped += kernel[k] * nrz[i + k];
        out[i] = {static_cast<T>(std::cos(phase)), static_cast<T>(std::sin(phase))};
        phase = std::fmod(phase + two_pi * (carrier_hz + deviation * shaped) / fs, two_pi);
    }
    return out;
}

}  // namespace detail

inline constexpr double gfsk_mod_index = 0.5;
inline constexpr double gfsk_bt = 0.5;
inline constexpr double gfsk_bandwidth_per_symbol_rate = 1.25;

struct SynthBurst {
    IqFrame<float> frame;
    BurstMask mask;
    double duration_s = 0.0;
    double frequency_hz = 0.0;
    std::size_t channel_index = 0;
};

inline double draw_burst_duration(const TransmitterModel& m, const ScaleProfile& p, rng_engine& rng) {
    const double d = m.burst_durations_s.size() == 1 ? m.burst_durations_s[0]
                                                      : m.burst_durations_s[uniform_index(rng, m.burst_durations_s.size())];
    return d * p.time_scale;
}

inline std::size_t burst_samples(double duration_s, const ScaleProfile& p) {
    return static_cast<std::size_t>(std::llround(duration_s * p.sample_rate_hz));
}

/// Render one burst of given (already scaled) duration on a given channel.
/// With `oversample` > 1 the burst is produced at a multiple of the profile's
/// sample rate while keeping the profile's frequency plan.
template <typename T = float>
IqFrame<T> render_burst(const TransmitterModel& m, const ScaleProfile& p, double duration_s, double frequency_hz,
                        rng_engine& rng, int oversample = 1) {
    const double fs = p.sample_rate_hz * oversample;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
    if (n == 0) throw config_error("burst shorter than one sample at this profile");
    const double bw = m.burst_bandwidth_hz() * p.frequency_scale();
    IqFrame<T> f;
    f.sample_rate_hz = fs;
    f.samples = detail::gfsk<T>(n, fs, bw / gfsk_bandwidth_per_symbol_rate, gfsk_mod_index, gfsk_bt, frequency_hz, rng);
    return f;
}

/// A single band-limited burst on a random channel of the model's grid with
/// unit carrier power; the mask covers the whole fragment.
inline SynthBurst synth_burst(const TransmitterModel& m, const ScaleProfile& p, std::uint64_t seed) {
    m.validate();
    auto rng = make_rng(seed, {0x6275727374ULL});
    SynthBurst b;
    b.duration_s = draw_burst_duration(m, p, rng);
    if (burst_samples(b.duration_s, p) > p.frame_length)
        throw config_error("burst of " + std::string(to_string(m.label)) + " does not fit in a frame at profile '" +
                           p.name + "'");
    const auto grid = channel_frequencies(m, p);
    b.channel_index = uniform_index(rng, grid.size());
    b.frequency_hz = grid[b.channel_index];
    b.frame = render_burst<float>(m, p, b.duration_s, b.frequency_hz, rng);
    b.mask = BurstMask::whole(b.frame.length());
    return b;
}

/// Burst start times in [0, total): fixed period, or gaps drawn uniformly from
/// the repetition range.
inline std::vector<double> synth_transmission_schedule(const TransmitterModel& m, const ScaleProfile& p,
                                                       double total_duration_s, std::uint64_t seed) {
    if (!(total_duration_s > 0.0)) throw invalid_input("schedule: total duration must be positive");
    std::vector<double> starts;
    if (m.repetition_range_s) {
        auto rng = make_rng(seed, {0x7363686564ULL});
        const double lo = m.repetition_range_s->first * p.time_scale;
        const double hi = m.repetition_range_s->second * p.time_scale;
        for (double t = 0.0; t < total_duration_s; t += uniform(rng, lo, hi)) starts.push_back(t);
    } else {
        const double period = m.repetition_s * p.time_scale;
        for (std::size_t k = 0;; ++k) {
            const double t = static_cast<double>(k) * period;
            if (t >= total_duration_s) break;
            starts.push_back(t);
        }
    }
    return starts;
}

// ---------------------------------------------------------------------------
// Noise

/// Interference mix standing in for the recorded Bluetooth/Wi-Fi lab noise.
/// Rates, durations and bandwidths are in reference units; powers are
/// relative to the receiver floor.
struct LabNoiseParams {
    double bt_rate_hz = 150.0;
    std::vector<double> bt_durations_s = {0.366e-3, 1.622e-3, 2.870e-3};  // 1-, 3- and 5-slot packets
    double bt_bandwidth_hz = 1e6;
    double bt_power_db_min = -10.0;  // per-packet received power, uniform in dB
    double bt_power_db_max = 6.0;
    double wifi_rate_hz = 15.0;
    double wifi_duration_s = 1.5e-3;
    double wifi_bandwidth_hz = 16.6e6;
    double wifi_offset_hz = -4.75e6;
    double wifi_power = 2.0;
    double floor_power = 1.0;
};

struct NoiseModel {
    enum class Kind { Gaussian, LabLike };
    Kind kind = Kind::Gaussian;
    double variance = 1.0;
    LabNoiseParams lab;

    static NoiseModel gaussian(double variance = 1.0) { return {Kind::Gaussian, variance, {}}; }
    static NoiseModel lab_like(LabNoiseParams params = {}) { return {Kind::LabLike, 1.0, params}; }

    void validate() const {
        if (!(variance > 0.0)) throw config_error("noise: variance must be positive");
        if (kind == Kind::LabLike) {
            const auto& l = lab;
            for (double v : {l.bt_rate_hz, l.bt_bandwidth_hz, l.wifi_rate_hz, l.wifi_duration_s, l.wifi_bandwidth_hz,
                             l.floor_power})
                if (!(v > 0.0)) throw config_error("noise: lab-like rates, durations and levels must be positive");
            if (l.bt_durations_s.empty() ||
                std::any_of(l.bt_durations_s.begin(), l.bt_durations_s.end(), [](double d) { return !(d > 0.0); }))
                throw config_error("noise: lab-like packet durations must be positive");
            if (!(l.bt_power_db_min <= l.bt_power_db_max) || !std::isfinite(l.bt_power_db_min) ||
                !std::isfinite(l.bt_power_db_max))
                throw config_error("noise: lab-like packet power range must be finite and ordered");
        }
    }
};

namespace detail {

template <typename T>
void add_burst(std::vector<cplx<T>>& dst, std::ptrdiff_t start, const std::vector<cplx<T>>& burst, double gain) {
    for (std::size_t k = 0; k < burst.size(); ++k) {
        const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(k);
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(dst.size())) continue;
        dst[static_cast<std::size_t>(i)] += burst[k] * static_cast<T>(gain);
    }
}

/// Poisson arrivals over [-duration, length) so edge-straddling bursts occur.
inline std::vector<std::ptrdiff_t> poisson_starts(double rate_hz, std::size_t burst_len, std::size_t length, double fs,
                                                  rng_engine& rng) {
    std::vector<std::ptrdiff_t> out;
    std::exponential_distribution<double> gap(rate_hz);
    double t = -static_cast<double>(burst_len) / fs + gap(rng);
    const double end = static_cast<double>(length) / fs;
    while (t < end) {
        out.push_back(static_cast<std::ptrdiff_t>(std::floor(t * fs)));
        t += gap(rng);
    }
    return out;
}

/// White complex noise through a Hamming-windowed sinc, shifted to `offset_hz`,
/// scaled to unit power.
template <typename T>
std::vector<cplx<T>> bandlimited_noise(std::size_t n, double fs, double bandwidth_hz, double offset_hz,
                                       rng_engine& rng) {
    constexpr std::ptrdiff_t taps = 63;
    constexpr std::ptrdiff_t half = taps / 2;
    const double fc = std::min(bandwidth_hz / 2.0, 0.45 * fs) / fs;
    std::vector<double> h(taps);
    for (std::ptrdiff_t k = 0; k < taps; ++k) {
        const double x = static_cast<double>(k - half);
        const double sinc = x == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
        h[static_cast<std::size_t>(k)] = sinc * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / (taps - 1)));
    }
    std::vector<std::complex<double>> white(n + taps - 1);
    for (auto& z : white) z = complex_normal<double>(rng);
    std::vector<std::complex<double>> y(n);
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> acc = 0.0;
        for (std::ptrdiff_t k = 0; k < taps; ++k) acc += h[static_cast<std::size_t>(k)] * white[i + static_cast<std::size_t>(k)];
        acc *= std::polar(1.0, 2.0 * std::numbers::pi * offset_hz * static_cast<double>(i) / fs);
        y[i] = acc;
        p += std::norm(acc);
    }
    const double g = p > 0.0 ? std::sqrt(static_cast<double>(n) / p) : 0.0;
    std::vector<cplx<T>> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {static_cast<T>(y[i].real() * g), static_cast<T>(y[i].imag() * g)};
    return out;
}

}  // namespace detail

template <typename T = float>
IqFrame<T> synth_noise(const NoiseModel& model, const ScaleProfile& p, std::size_t length, std::uint64_t seed) {
    if (length == 0) throw invalid_input("synth_noise: length must be positive");
    model.validate();
    auto rng = make_rng(seed, {0x6e6f697365ULL});
    const double fs = p.sample_rate_hz;
    IqFrame<T> f;
    f.sample_rate_hz = fs;
    f.samples.resize(length);

    if (model.kind == NoiseModel::Kind::Gaussian) {
        for (auto& z : f.samples) z = complex_normal<T>(rng, model.variance);
        return f;
    }

    const auto& l = model.lab;
    for (auto& z : f.samples) z = complex_normal<T>(rng, l.floor_power);

    // Narrowband hopping packets on a 1 MHz grid.
    std::vector<std::size_t> bt_lens;
    for (double d : l.bt_durations_s) bt_lens.push_back(std::max<std::size_t>(1, burst_samples(d * p.time_scale, p)));
    const std::size_t bt_max = *std::max_element(bt_lens.begin(), bt_lens.end());
    const double bt_bw = l.bt_bandwidth_hz * p.frequency_scale();
    const double grid_hz = 1e6 * p.frequency_scale();
    const auto hop_reach = static_cast<int>(std::floor((0.45 * fs - bt_bw / 2.0) / grid_hz));
    for (auto start : detail::poisson_starts(l.bt_rate_hz / p.time_scale, bt_max, length, fs, rng)) {
        const std::size_t len = bt_lens[uniform_index(rng, bt_lens.size())];
        const double power_db = uniform(rng, l.bt_power_db_min, l.bt_power_db_max);
        const int ch = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(2 * hop_reach + 1))) - hop_reach;
        const auto burst =
            detail::gfsk<T>(len, fs, bt_bw / gfsk_bandwidth_per_symbol_rate, 0.32, gfsk_bt, ch * grid_hz, rng);
        detail::add_burst(f.samples, start, burst, std::pow(10.0, power_db / 20.0));
    }

    // Longer wideband bursts.
    const std::size_t wifi_len = std::max<std::size_t>(1, burst_samples(l.wifi_duration_s * p.time_scale, p));
    for (auto start : detail::poisson_starts(l.wifi_rate_hz / p.time_scale, wifi_len, length, fs, rng)) {
        const auto burst = detail::bandlimited_noise<T>(wifi_len, fs, l.wifi_bandwidth_hz * p.frequency_scale(),
                                                        l.wifi_offset_hz * p.frequency_scale(), rng);
        detail::add_burst(f.samples, start, burst, std::sqrt(l.wifi_power));
    }
    return f;
}

}  // namespace rfdet
