// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "rfdet/sigcore.hpp"
#include "rfdet/spectro.hpp"
#include "rfdet/synth.hpp"

using namespace rfdet;

namespace {

const TransmitterTable& table() {
    static const TransmitterTable t = default_transmitter_table();
    return t;
}

const TransmitterModel& model(Transmitter t) { return find_model(table(), t); }

// Width of the band holding the central 99% of the burst power.
double occupied_bandwidth(const IqFrame<float>& f) {
    std::size_t n = 1;
    while (n < f.length()) n <<= 1;
    n <<= 1;
    std::vector<std::complex<double>> in(n), out(n);
    for (std::size_t i = 0; i < f.length(); ++i) in[i] = f.samples[i];
    fft_forward<double>(in, out);
    std::vector<double> p(n);
    for (std::size_t b = 0; b < n; ++b) p[b] = std::norm(out[(b + n / 2) % n]);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    double acc = 0.0;
    std::size_t lo = 0, hi = n - 1;
    for (std::size_t b = 0; b < n; ++b) {
        acc += p[b];
        if (acc > 0.005 * total) {
            lo = b;
            break;
        }
    }
    acc = 0.0;
    for (std::size_t b = n; b-- > 0;) {
        acc += p[b];
        if (acc > 0.005 * total) {
            hi = b;
            break;
        }
    }
    return static_cast<double>(hi - lo + 1) * f.sample_rate_hz / static_cast<double>(n);
}

double mean_duration(const TransmitterModel& m) {
    return std::accumulate(m.burst_durations_s.begin(), m.burst_durations_s.end(), 0.0) /
           static_cast<double>(m.burst_durations_s.size());
}

}  // namespace

TEST(Profiles, PaperAndDesk) {
    const auto p = ScaleProfile::paper();
    EXPECT_DOUBLE_EQ(p.sample_rate_hz, 14e6);
    EXPECT_EQ(p.frame_length, std::size_t{1} << 20);
    EXPECT_EQ(p.segment_length, 1024u);
    EXPECT_NO_THROW(p.validate());
    const auto d = ScaleProfile::desk();
    EXPECT_EQ(d.frame_length / d.segment_length, 64u);
    EXPECT_NO_THROW(d.validate());
    auto bad = d;
    bad.frame_length = 4096 * 3;
    EXPECT_THROW(bad.validate(), config_error);
    EXPECT_THROW(ScaleProfile::by_name("huge"), config_error);
}

TEST(TransmitterTable, MacroParameters) {
    const auto& dji = model(Transmitter::DJI);
    EXPECT_DOUBLE_EQ(dji.channel_spacing_hz, 1.7e6);
    EXPECT_DOUBLE_EQ(dji.burst_durations_s.at(0), 2.18e-3);
    EXPECT_DOUBLE_EQ(dji.repetition_s, 0.630);
    EXPECT_NEAR(model(Transmitter::Taranis).center_offset_hz(), -1.75e6, 1.0);
    EXPECT_NEAR(model(Transmitter::Turnigy).center_offset_hz(), 3.25e6, 1.0);
    EXPECT_EQ(model(Transmitter::Graupner).burst_durations_s.size(), 2u);
    for (const auto& m : table()) {
        EXPECT_LE(m.burst_bandwidth_hz(), m.channel_spacing_hz);
        for (double d : m.burst_durations_s) EXPECT_LT(d, m.min_repetition_s());
    }
}

TEST(TransmitterTable, PairwiseSeparable) {
    auto differs = [](double a, double b) { return std::abs(a - b) / std::min(a, b) >= 0.15; };
    for (std::size_t i = 0; i < table().size(); ++i)
        for (std::size_t j = i + 1; j < table().size(); ++j) {
            const auto& a = table()[i];
            const auto& b = table()[j];
            EXPECT_TRUE(differs(a.channel_spacing_hz, b.channel_spacing_hz) ||
                        differs(mean_duration(a), mean_duration(b)) ||
                        differs(a.burst_bandwidth_hz(), b.burst_bandwidth_hz()))
                << to_string(a.label) << " vs " << to_string(b.label);
        }
}

TEST(TransmitterTable, JsonRoundTrip) {
    const auto j = transmitter_table_json(table());
    const auto back = j.at("transmitters").get<TransmitterTable>();
    ASSERT_EQ(back.size(), table().size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].label, table()[i].label);
        EXPECT_NEAR(back[i].channel_spacing_hz, table()[i].channel_spacing_hz, 1e-6);
        EXPECT_NEAR(back[i].repetition_s, table()[i].repetition_s, 1e-12);
        EXPECT_EQ(back[i].repetition_range_s.has_value(), table()[i].repetition_range_s.has_value());
    }
}

TEST(TransmitterTable, ConfigFileMatchesDefaults) {
    const auto loaded = load_transmitter_table(std::string(RFDET_CONFIG_DIR) + "/transmitters.json");
    ASSERT_EQ(loaded.size(), table().size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        const auto& a = loaded[i];
        const auto& b = table()[i];
        EXPECT_EQ(a.label, b.label);
        EXPECT_NEAR(a.center_freq_hz, b.center_freq_hz, 1e-3);
        EXPECT_NEAR(a.channel_spacing_hz, b.channel_spacing_hz, 1e-6);
        EXPECT_NEAR(a.repetition_s, b.repetition_s, 1e-12);
        ASSERT_EQ(a.burst_durations_s.size(), b.burst_durations_s.size());
        for (std::size_t k = 0; k < a.burst_durations_s.size(); ++k)
            EXPECT_NEAR(a.burst_durations_s[k], b.burst_durations_s[k], 1e-12);
        EXPECT_DOUBLE_EQ(a.bandwidth_fraction, b.bandwidth_fraction);
    }
}

TEST(SynthBurst, DjiPaperDuration) {
    const auto b = synth_burst(model(Transmitter::DJI), ScaleProfile::paper(), 1);
    EXPECT_EQ(b.frame.length(), 30520u);
    EXPECT_DOUBLE_EQ(b.frame.sample_rate_hz, 14e6);
    EXPECT_NEAR(masked_mean_power(b.frame, b.mask), 1.0, 1e-5);
}

TEST(SynthBurst, TimeScaleScalesDuration) {
    for (double t : {0.25, 0.5, 1.0}) {
        auto p = ScaleProfile::desk();
        p.time_scale = t;
        const auto b = synth_burst(model(Transmitter::DJI), p, 3);
        EXPECT_DOUBLE_EQ(b.duration_s, 2.18e-3 * t);
        EXPECT_EQ(b.frame.length(), static_cast<std::size_t>(std::llround(2.18e-3 * t * p.sample_rate_hz)));
    }
}

TEST(SynthBurst, TurnigyOccupiedBandwidth) {
    const auto p = ScaleProfile::paper();
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto b = synth_burst(model(Transmitter::Turnigy), p, s);
        EXPECT_LE(occupied_bandwidth(b.frame), 2e6 * p.frequency_scale());
    }
}

TEST(SynthBurst, Reproducible) {
    const auto a = synth_burst(model(Transmitter::Taranis), ScaleProfile::desk(), 9);
    const auto b = synth_burst(model(Transmitter::Taranis), ScaleProfile::desk(), 9);
    EXPECT_EQ(a.frame.samples, b.frame.samples);
    const auto c = synth_burst(model(Transmitter::Taranis), ScaleProfile::desk(), 10);
    EXPECT_NE(a.frame.samples, c.frame.samples);
}

TEST(SynthBurst, DetectorRecoversDuration) {
    const auto p = ScaleProfile::desk();
    for (const auto& m : table())
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto b = synth_burst(m, p, 50 + s);
            IqFrame<float> f(p.frame_length, p.sample_rate_hz);
            rfdet::detail::add_burst(f.samples, 1500, b.frame.samples, 1.0);
            const auto mask = detect_bursts(f);
            ASSERT_EQ(mask.intervals.size(), 1u) << to_string(m.label);
            EXPECT_NEAR(static_cast<double>(mask.covered()), static_cast<double>(b.frame.length()),
                        0.1 * static_cast<double>(b.frame.length()))
                << to_string(m.label);
        }
}

TEST(Schedule, DjiFixedPeriod) {
    const auto st = synth_transmission_schedule(model(Transmitter::DJI), ScaleProfile::desk(), 3.15, 0);
    const std::vector<double> want = {0.0, 0.63, 1.26, 1.89, 2.52};
    ASSERT_EQ(st.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(st[i], want[i], 1e-12);
}

TEST(Schedule, ShortSpanSingleBurst) {
    for (const auto& m : table())
        EXPECT_EQ(synth_transmission_schedule(m, ScaleProfile::desk(), 0.9 * m.min_repetition_s(), 4).size(), 1u);
}

TEST(Schedule, TurnigyGapsInRange) {
    const auto st = synth_transmission_schedule(model(Transmitter::Turnigy), ScaleProfile::desk(), 10.0, 17);
    ASSERT_GT(st.size(), 3u);
    for (std::size_t i = 1; i < st.size(); ++i) {
        EXPECT_GE(st[i] - st[i - 1], 0.120 - 1e-12);
        EXPECT_LE(st[i] - st[i - 1], 2.900 + 1e-12);
    }
    EXPECT_EQ(st, synth_transmission_schedule(model(Transmitter::Turnigy), ScaleProfile::desk(), 10.0, 17));
    EXPECT_THROW(synth_transmission_schedule(model(Transmitter::DJI), ScaleProfile::desk(), 0.0, 1), invalid_input);
}

TEST(Noise, GaussianPower) {
    const auto f = synth_noise<double>(NoiseModel::gaussian(2.5), ScaleProfile::desk(), 1 << 16, 3);
    EXPECT_NEAR(mean_power(f), 2.5, 0.03 * 2.5);
}

TEST(Noise, UnitGaussianNearlyUnchangedByNormalization) {
    const auto f = synth_noise<double>(NoiseModel::gaussian(1.0), ScaleProfile::desk(), 1 << 22, 4);
    const auto g = normalize_mean_power(f);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < f.length(); ++i) {
        num += std::norm(g.samples[i] - f.samples[i]);
        den += std::norm(f.samples[i]);
    }
    EXPECT_LT(std::sqrt(num / den), 1e-3);
}

TEST(Noise, LabLikeHasShortBursts) {
    const auto p = ScaleProfile::desk();
    int frames_with_burst = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto f = synth_noise<float>(NoiseModel::lab_like(), p, p.frame_length, 100 + s);
        for (const auto& z : f.samples) ASSERT_TRUE(std::isfinite(z.real()) && std::isfinite(z.imag()));
        const auto m = detect_bursts(f);
        ASSERT_FALSE(m.empty());
        const double peak = peak_smoothed_energy(f);
        const double floor = mean_power(f);
        const bool localized = peak > 2.0 * floor && std::all_of(m.intervals.begin(), m.intervals.end(), [&](const Interval& iv) {
                                   return iv.size() < p.frame_length / 5;
                               });
        frames_with_burst += localized ? 1 : 0;
    }
    EXPECT_GE(frames_with_burst, 1);
}

TEST(Noise, LabLikePacketLengthsAndPowers) {
    const auto p = ScaleProfile::desk();
    auto nm = NoiseModel::lab_like();
    nm.lab.bt_rate_hz = 5.0;
    nm.lab.wifi_rate_hz = 1e-9;
    nm.lab.floor_power = 1e-12;
    std::set<std::size_t> allowed;
    for (double d : nm.lab.bt_durations_s) allowed.insert(burst_samples(d, p));
    const auto f = synth_noise<double>(nm, p, 10 * 250000, 12);
    std::map<std::size_t, int> lengths;
    double lo_db = 1e9, hi_db = -1e9;
    std::size_t i = 0;
    while (i < f.length()) {
        if (std::norm(f.samples[i]) < 1e-6) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        double acc = 0.0;
        while (i < f.length() && std::norm(f.samples[i]) >= 1e-6) acc += std::norm(f.samples[i++]);
        if (start == 0 || i == f.length()) continue;
        const std::size_t len = i - start;
        if (!allowed.count(len)) continue;  // overlapping packets
        ++lengths[len];
        const double db = 10.0 * std::log10(acc / static_cast<double>(len));
        lo_db = std::min(lo_db, db);
        hi_db = std::max(hi_db, db);
    }
    EXPECT_EQ(lengths.size(), allowed.size());
    int total = 0;
    for (const auto& [len, n] : lengths) total += n;
    EXPECT_GT(total, 30);
    EXPECT_GE(lo_db, nm.lab.bt_power_db_min - 0.5);
    EXPECT_LE(hi_db, nm.lab.bt_power_db_max + 0.5);
    EXPECT_GT(hi_db - lo_db, 10.0);
}

TEST(Noise, LabLikeValidation) {
    auto nm = NoiseModel::lab_like();
    nm.lab.bt_durations_s.clear();
    EXPECT_THROW(nm.validate(), config_error);
    nm = NoiseModel::lab_like();
    nm.lab.bt_durations_s = {1e-3, 0.0};
    EXPECT_THROW(nm.validate(), config_error);
    nm = NoiseModel::lab_like();
    nm.lab.bt_power_db_min = 3.0;
    nm.lab.bt_power_db_max = -3.0;
    EXPECT_THROW(nm.validate(), config_error);
}

TEST(Noise, Reproducible) {
    const auto p = ScaleProfile::desk();
    EXPECT_EQ(synth_noise<float>(NoiseModel::lab_like(), p, 4096, 8).samples,
              synth_noise<float>(NoiseModel::lab_like(), p, 4096, 8).samples);
    EXPECT_THROW(synth_noise<float>(NoiseModel::gaussian(), p, 0, 8), invalid_input);
    EXPECT_THROW(synth_noise<float>(NoiseModel::gaussian(0.0), p, 8, 8), config_error);
}
