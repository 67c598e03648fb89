// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "rfdet/rng.hpp"
#include "rfdet/stream/scenario.hpp"
#include "rfdet/synth.hpp"

namespace rfdet::stream {

struct IqBatch {
    std::size_t index = 0;
    IqFrame<float> frame;
};

/// Deterministic one-second batches of a scenario. Noise depends only on
/// (seed, batch index); each burst only on its own seed, so streams superpose.
class Source {
public:
    Source(Scenario sc, std::uint64_t seed, TransmitterTable table = default_transmitter_table(),
           bool include_noise = true)
        : sc_(std::move(sc)), seed_(seed), table_(std::move(table)), include_noise_(include_noise) {
        bursts_ = scenario_bursts(sc_, table_, seed_);
        batch_len_ = static_cast<std::size_t>(std::llround(sc_.profile.sample_rate_hz));
    }

    const Scenario& scenario() const noexcept { return sc_; }
    const std::vector<ScheduledBurst>& bursts() const noexcept { return bursts_; }
    std::size_t num_batches() const { return sc_.num_batches(); }
    std::size_t batch_length() const noexcept { return batch_len_; }

    IqBatch batch(std::size_t b) const {
        const double fs = sc_.profile.sample_rate_hz;
        IqBatch out;
        out.index = b;
        if (include_noise_) {
            out.frame = synth_noise<float>(sc_.noise, sc_.profile, batch_len_, derive_seed(seed_, {0x666c6f6f72ULL, b}));
        } else {
            out.frame.sample_rate_hz = fs;
            out.frame.samples.assign(batch_len_, cplx<float>{});
        }
        const auto b0 = static_cast<std::ptrdiff_t>(b * batch_len_);
        const auto b1 = b0 + static_cast<std::ptrdiff_t>(batch_len_);
        const double tx_gain = std::pow(10.0, sc_.tx_power_db / 20.0);
        for (const auto& burst : bursts_) {
            const auto s0 = static_cast<std::ptrdiff_t>(std::llround(burst.start_s * fs));
            const auto n = static_cast<std::ptrdiff_t>(burst_samples(burst.duration_s, sc_.profile));
            if (s0 + n <= b0 || s0 >= b1) continue;
            const auto& tx = sc_.transmitters[burst.transmitter];
            auto rng = make_rng(burst.seed);
            const auto iq = render_burst<float>(find_model(table_, burst.label), sc_.profile, burst.duration_s,
                                                burst.frequency_hz, rng);
            const double amp = tx_gain * sc_.channel.amplitude(tx.distance_m, tx.bearing_deg);
            rfdet::detail::add_burst(out.frame.samples, s0 - b0, iq.samples, amp);
        }
        return out;
    }

private:
    Scenario sc_;
    std::uint64_t seed_;
    TransmitterTable table_;
    bool include_noise_;
    std::vector<ScheduledBurst> bursts_;
    std::size_t batch_len_ = 0;
};

}  // namespace rfdet::stream
