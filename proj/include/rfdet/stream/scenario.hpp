// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/dataset.hpp"
#include "rfdet/errors.hpp"
#include "rfdet/synth.hpp"

namespace rfdet::stream {

/// Free-space attenuation relative to a reference distance plus a directional
/// receive pattern sampled at 0, 90 and 180 degrees and interpolated linearly
/// in between.
struct ChannelModel {
    double reference_distance_m = 110.0;
    double front_gain_dbi = 8.5;
    double side_gain_dbi = -1.5;
    double back_gain_dbi = -11.5;

    /// Bearing folded to [0, 180] degrees.
    static double fold_bearing(double bearing_deg) {
        double b = std::fmod(std::abs(bearing_deg), 360.0);
        return b > 180.0 ? 360.0 - b : b;
    }

    double gain_dbi(double bearing_deg) const {
        const double b = fold_bearing(bearing_deg);
        if (b <= 90.0) return front_gain_dbi + (side_gain_dbi - front_gain_dbi) * b / 90.0;
        return side_gain_dbi + (back_gain_dbi - side_gain_dbi) * (b - 90.0) / 90.0;
    }

    double front_to_back_db() const { return front_gain_dbi - back_gain_dbi; }

    double amplitude(double distance_m, double bearing_deg) const {
        if (!(distance_m > 0.0)) throw invalid_input("channel: distance must be positive");
        return reference_distance_m / distance_m * std::pow(10.0, gain_dbi(bearing_deg) / 20.0);
    }

    double power_db(double distance_m, double bearing_deg) const {
        return 20.0 * std::log10(amplitude(distance_m, bearing_deg));
    }

    void validate() const {
        if (!(reference_distance_m > 0.0)) throw config_error("channel: reference distance must be positive");
        for (double g : {front_gain_dbi, side_gain_dbi, back_gain_dbi})
            if (!std::isfinite(g)) throw config_error("channel: gains must be finite");
    }
};

template <typename T>
IqFrame<T> apply_channel(const IqFrame<T>& frame, double distance_m, double bearing_deg, const ChannelModel& ch) {
    return rfdet::detail::scaled(frame, ch.amplitude(distance_m, bearing_deg));
}

struct ScenarioTransmitter {
    Transmitter label = Transmitter::DJI;
    double start_s = 0.0;
    double stop_s = 0.0;
    double distance_m = 110.0;
    double bearing_deg = 0.0;
    std::optional<std::uint64_t> id;  // seed key; defaults to the list position

    std::uint64_t key(std::size_t position) const { return id.value_or(position); }
};

struct Scenario {
    double duration_s = 1.0;
    std::vector<ScenarioTransmitter> transmitters;
    NoiseModel noise = NoiseModel::gaussian(1.0);
    ScaleProfile profile = ScaleProfile::desk();
    ChannelModel channel;
    double tx_power_db = 0.0;  // burst carrier power at reference distance and 0 dBi, relative to unit

    std::size_t num_batches() const { return static_cast<std::size_t>(std::ceil(duration_s - 1e-12)); }

    void validate() const {
        if (!(duration_s > 0.0)) throw config_error("scenario: duration must be positive");
        profile.validate();
        noise.validate();
        channel.validate();
        for (const auto& t : transmitters) {
            if (!(t.distance_m > 0.0)) throw config_error("scenario: distance_m must be positive");
            if (t.start_s < 0.0 || t.stop_s > duration_s + 1e-12 || !(t.start_s < t.stop_s))
                throw config_error("scenario: transmitter times must satisfy 0 <= start < stop <= duration");
        }
    }
};

inline void to_json(nlohmann::json& j, const ScenarioTransmitter& t) {
    j = {{"label", to_string(t.label)}, {"start_s", t.start_s},         {"stop_s", t.stop_s},
         {"distance_m", t.distance_m},  {"bearing_deg", t.bearing_deg}};
    if (t.id) j["id"] = *t.id;
}

inline void from_json(const nlohmann::json& j, ScenarioTransmitter& t) {
    t.label = transmitter_from_string(j.at("label").get<std::string>());
    t.start_s = j.value("start_s", 0.0);
    t.stop_s = j.at("stop_s").get<double>();
    t.distance_m = j.value("distance_m", 110.0);
    t.bearing_deg = j.value("bearing_deg", 0.0);
    if (j.contains("id")) t.id = j.at("id").get<std::uint64_t>();
}

inline nlohmann::json scenario_json(const Scenario& s) {
    nlohmann::json noise = {{"kind", s.noise.kind == NoiseModel::Kind::Gaussian ? "gaussian" : "lab"},
                            {"power", s.noise.variance}};
    return {{"duration_s", s.duration_s},
            {"profile", s.profile},
            {"noise", noise},
            {"tx_power_db", s.tx_power_db},
            {"channel",
             {{"reference_distance_m", s.channel.reference_distance_m},
              {"front_gain_dbi", s.channel.front_gain_dbi},
              {"side_gain_dbi", s.channel.side_gain_dbi},
              {"back_gain_dbi", s.channel.back_gain_dbi}}},
            {"transmitters", s.transmitters}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    try {
        s.duration_s = j.at("duration_s").get<double>();
        if (j.contains("profile")) {
            const auto& p = j.at("profile");
            s.profile = p.is_string() ? ScaleProfile::by_name(p.get<std::string>()) : p.get<ScaleProfile>();
        }
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            const auto kind = n.value("kind", std::string("gaussian"));
            const double power = n.value("power", 1.0);
            if (kind == "gaussian")
                s.noise = NoiseModel::gaussian(power);
            else if (kind == "lab")
                s.noise = NoiseModel::lab_like();
            else
                throw config_error("scenario: unknown noise kind '" + kind + "'");
        }
        s.tx_power_db = j.value("tx_power_db", 0.0);
        if (j.contains("channel")) {
            const auto& c = j.at("channel");
            s.channel.reference_distance_m = c.value("reference_distance_m", s.channel.reference_distance_m);
            s.channel.front_gain_dbi = c.value("front_gain_dbi", s.channel.front_gain_dbi);
            s.channel.side_gain_dbi = c.value("side_gain_dbi", s.channel.side_gain_dbi);
            s.channel.back_gain_dbi = c.value("back_gain_dbi", s.channel.back_gain_dbi);
        }
        s.transmitters = j.value("transmitters", std::vector<ScenarioTransmitter>{});
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    const auto raw = rfdet::detail::read_file(path);
    try {
        return scenario_from_json(nlohmann::json::parse(raw.begin(), raw.end()));
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("scenario '" + path.string() + "': " + e.what());
    }
}

/// One scheduled burst, shared by the IQ source and the ground truth.
struct ScheduledBurst {
    std::size_t transmitter = 0;  // position in Scenario::transmitters
    Transmitter label = Transmitter::DJI;
    double start_s = 0.0;
    double duration_s = 0.0;
    double frequency_hz = 0.0;
    std::uint64_t seed = 0;

    double end_s() const { return start_s + duration_s; }
};

/// Every burst of every transmitter, ordered by transmitter then time.
inline std::vector<ScheduledBurst> scenario_bursts(const Scenario& sc, const TransmitterTable& table, std::uint64_t seed) {
    sc.validate();
    std::vector<ScheduledBurst> out;
    for (std::size_t i = 0; i < sc.transmitters.size(); ++i) {
        const auto& tx = sc.transmitters[i];
        const auto& model = find_model(table, tx.label);
        const std::uint64_t key = derive_seed(seed, {0x7478ULL, tx.key(i)});
        const auto starts = synth_transmission_schedule(model, sc.profile, tx.stop_s - tx.start_s, key);
        const auto grid = channel_frequencies(model, sc.profile);
        for (std::size_t k = 0; k < starts.size(); ++k) {
            auto rng = make_rng(key, {0x6275ULL, k});
            ScheduledBurst b;
            b.transmitter = i;
            b.label = tx.label;
            b.start_s = tx.start_s + starts[k];
            b.duration_s = draw_burst_duration(model, sc.profile, rng);
            b.frequency_hz = grid[uniform_index(rng, grid.size())];
            b.seed = derive_seed(key, {0x6d6f64ULL, k});
            if (b.start_s < tx.stop_s) out.push_back(b);
        }
    }
    return out;
}

}  // namespace rfdet::stream
