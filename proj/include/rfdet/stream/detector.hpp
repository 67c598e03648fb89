// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/dataset.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/nn/checkpoint.hpp"
#include "rfdet/nn/vgg.hpp"
#include "rfdet/sigcore.hpp"
#include "rfdet/spectro.hpp"
#include "rfdet/stream/queue.hpp"
#include "rfdet/stream/source.hpp"

namespace rfdet::stream {

enum class Decision { Noise, Drone };

inline std::string_view to_string(Decision d) { return d == Decision::Drone ? "Drone" : "Noise"; }

struct DetectionReport {
    std::size_t frame_index = 0;  // global, batch-major
    std::size_t batch_index = 0;
    double timestamp_s = 0.0;     // frame start
    std::array<double, num_classes> posteriors{};
    int label = 0;
    Decision frame_decision = Decision::Noise;
    Decision pooled_decision = Decision::Noise;  // per batch
    double latency_s = 0.0;
    double realtime_factor = 0.0;
};

struct ClassifierConfig {
    double threshold = 0.5;
    bool carrier_agc = true;  // per-frame carrier-power normalization before the spectrogram
};

inline Decision frame_decision(const std::array<double, num_classes>& post, int label, double threshold) {
    return is_drone_class(label) && post[static_cast<std::size_t>(label)] >= threshold ? Decision::Drone
                                                                                      : Decision::Noise;
}

/// Slices batches into classification frames and labels each one.
class StreamClassifier {
public:
    StreamClassifier(const nn::ModelCheckpoint& ck, const ScaleProfile& profile, ClassifierConfig cfg = {})
        : model_(nn::instantiate<float>(ck)), stats_(ck.stats), profile_(profile), cfg_(cfg) {
        if (ck.meta.sample_rate_hz != 0.0 && ck.meta.sample_rate_hz != profile.sample_rate_hz)
            throw config_error("stream: checkpoint was trained at " + std::to_string(ck.meta.sample_rate_hz) +
                               " Hz, scenario runs at " + std::to_string(profile.sample_rate_hz) + " Hz");
        if ((ck.meta.frame_length != 0 && ck.meta.frame_length != profile.frame_length) ||
            ck.config.input_height != profile.segment_length || ck.config.input_width != profile.columns())
            throw config_error("stream: checkpoint input shape does not match profile '" + profile.name + "'");
    }

    const ClassifierConfig& config() const noexcept { return cfg_; }

    std::size_t frames_per_batch(std::size_t batch_length) const { return batch_length / profile_.frame_length; }

    std::vector<DetectionReport> classify_batch(const IqBatch& batch) {
        if (batch.frame.sample_rate_hz != profile_.sample_rate_hz)
            throw config_error("stream: batch sample rate differs from the classifier profile");
        const std::size_t n = profile_.frame_length;
        const std::size_t frames = frames_per_batch(batch.frame.length());
        const double fs = profile_.sample_rate_hz;
        std::vector<DetectionReport> out;
        out.reserve(frames);
        Decision pooled = Decision::Noise;
        for (std::size_t f = 0; f < frames; ++f) {
            IqFrame<float> frame;
            frame.sample_rate_hz = fs;
            frame.samples.assign(batch.frame.samples.begin() + static_cast<std::ptrdiff_t>(f * n),
                                 batch.frame.samples.begin() + static_cast<std::ptrdiff_t>((f + 1) * n));
            if (cfg_.carrier_agc) {
                const auto mask = detect_bursts(frame);
                if (!mask.empty() && masked_mean_power(frame, mask) > 0.0) frame = normalize_carrier_power(frame, mask);
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto spec = complex_spectrogram(frame, profile_.segment_length);
            nn::Tensor<float> x({1, 2, spec.segment_length, spec.columns});
            for (std::size_t p = 0; p < 2; ++p) {
                const double m = stats_.mean[p], inv = 1.0 / stats_.stddev[p];
                const auto src = spec.plane(p);
                float* dst = x.ptr() + p * spec.plane_size();
                for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>((src[i] - m) * inv);
            }
            const auto probs = nn::softmax(model_.forward(x, false));
            const auto t1 = std::chrono::steady_clock::now();

            DetectionReport r;
            r.batch_index = batch.index;
            r.frame_index = batch.index * frames + f;
            r.timestamp_s = static_cast<double>(batch.index * batch.frame.length() + f * n) / fs;
            for (std::size_t c = 0; c < num_classes; ++c) r.posteriors[c] = probs[c];
            r.label = static_cast<int>(std::max_element(r.posteriors.begin(), r.posteriors.end()) - r.posteriors.begin());
            r.frame_decision = frame_decision(r.posteriors, r.label, cfg_.threshold);
            if (r.frame_decision == Decision::Drone) pooled = Decision::Drone;
            r.latency_s = std::chrono::duration<double>(t1 - t0).count();
            r.realtime_factor = std::max(r.latency_s, 1e-12) / profile_.frame_duration_s();
            out.push_back(r);
        }
        for (auto& r : out) r.pooled_decision = pooled;
        return out;
    }

private:
    nn::Vgg<float> model_;
    PlaneStats stats_;
    ScaleProfile profile_;
    ClassifierConfig cfg_;
};

/// Re-derive frame and pooled decisions for another threshold.
inline std::vector<DetectionReport> apply_threshold(std::vector<DetectionReport> reports, double threshold) {
    std::map<std::size_t, Decision> pooled;
    for (auto& r : reports) {
        r.frame_decision = frame_decision(r.posteriors, r.label, threshold);
        auto& p = pooled[r.batch_index];
        if (r.frame_decision == Decision::Drone) p = Decision::Drone;
    }
    for (auto& r : reports) r.pooled_decision = pooled[r.batch_index];
    return reports;
}

/// Producer thread generates batches into a queue of capacity 2; the calling
/// thread classifies them in order.
inline std::vector<DetectionReport> run_pipeline(const Source& source, StreamClassifier& classifier,
                                                 std::size_t queue_capacity = 2) {
    BoundedQueue<IqBatch> queue(queue_capacity);
    std::exception_ptr producer_error;
    std::thread producer([&] {
        try {
            for (std::size_t b = 0; b < source.num_batches(); ++b)
                if (!queue.push(source.batch(b))) break;
        } catch (...) {
            producer_error = std::current_exception();
        }
        queue.close();
    });
    std::vector<DetectionReport> reports;
    try {
        while (auto batch = queue.pop()) {
            auto r = classifier.classify_batch(*batch);
            reports.insert(reports.end(), r.begin(), r.end());
        }
    } catch (...) {
        queue.close();
        producer.join();
        throw;
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);
    return reports;
}

// ---------------------------------------------------------------------------
// Ground truth and summaries

struct FrameTruth {
    int class_id = noise_class;
    std::ptrdiff_t transmitter = -1;  // position in the scenario, -1 for noise
};

/// Frame label: the class of the burst with the largest overlap among those
/// that have at least `min_fraction` of their duration inside the frame.
inline std::vector<FrameTruth> frame_truth(const Scenario& sc, const std::vector<ScheduledBurst>& bursts,
                                           std::size_t frames_per_batch, double min_fraction = 0.25) {
    const auto& p = sc.profile;
    const double fs = p.sample_rate_hz;
    const double batch_s = std::round(fs) / fs;
    const double frame_s = p.frame_duration_s();
    const std::size_t n_frames = sc.num_batches() * frames_per_batch;
    std::vector<FrameTruth> truth(n_frames);
    std::vector<double> best(n_frames, 0.0);
    for (const auto& b : bursts) {
        const double dur = burst_samples(b.duration_s, p) / fs;
        const double start = static_cast<double>(std::llround(b.start_s * fs)) / fs;
        const auto first_batch = static_cast<std::size_t>(std::max(0.0, std::floor(start / batch_s)));
        const auto last_batch = static_cast<std::size_t>(std::floor((start + dur) / batch_s));
        for (std::size_t bb = first_batch; bb <= last_batch && bb < sc.num_batches(); ++bb)
            for (std::size_t f = 0; f < frames_per_batch; ++f) {
                const double f0 = bb * batch_s + f * frame_s, f1 = f0 + frame_s;
                const double ov = std::min(f1, start + dur) - std::max(f0, start);
                const std::size_t k = bb * frames_per_batch + f;
                if (ov >= min_fraction * dur && ov > best[k]) {
                    best[k] = ov;
                    truth[k] = {class_of(b.label), static_cast<std::ptrdiff_t>(b.transmitter)};
                }
            }
    }
    return truth;
}

struct SummaryRow {
    std::size_t transmitter = 0;
    std::string label;
    double distance_m = 0.0;
    double bearing_deg = 0.0;
    std::size_t frames = 0;             // frames labelled with this transmitter
    double recall = 0.0;                // 7-class: argmax == true class
    double detection_rate = 0.0;        // frame decision == Drone
    double binary_balanced_acc = 0.0;   // (detection rate + noise specificity) / 2
    double pooled_detection_rate = 0.0; // batches with any of its frames pooled Drone
};

struct RunSummary {
    std::vector<SummaryRow> rows;
    std::size_t noise_frames = 0;
    double noise_specificity = 0.0;     // frame decision == Noise on noise frames
    double pooled_noise_specificity = 0.0;
    double binary_balanced_acc = 0.0;   // over all frames
    double mean_realtime_factor = 0.0;
    bool empty = true;
};

inline RunSummary summarize_run(const std::vector<DetectionReport>& reports, const std::vector<FrameTruth>& truth,
                                const Scenario& sc) {
    RunSummary s;
    if (reports.empty()) return s;
    if (reports.size() > truth.size()) throw invalid_input("summarize_run: more reports than ground-truth frames");
    s.empty = false;
    std::vector<std::size_t> frames(sc.transmitters.size(), 0), hits(sc.transmitters.size(), 0),
        det(sc.transmitters.size(), 0);
    std::size_t noise_ok = 0, drone_frames = 0, drone_ok = 0;
    std::map<std::size_t, std::pair<bool, Decision>> batch_state;  // (contains drone frame, pooled)
    std::vector<std::map<std::size_t, Decision>> tx_batches(sc.transmitters.size());
    double rtf = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const auto& t = truth[r.frame_index];
        rtf += r.realtime_factor;
        auto& bs = batch_state[r.batch_index];
        bs.second = r.pooled_decision;
        if (t.transmitter < 0) {
            ++s.noise_frames;
            noise_ok += r.frame_decision == Decision::Noise;
        } else {
            const auto k = static_cast<std::size_t>(t.transmitter);
            ++frames[k];
            hits[k] += r.label == t.class_id;
            det[k] += r.frame_decision == Decision::Drone;
            ++drone_frames;
            drone_ok += r.frame_decision == Decision::Drone;
            bs.first = true;
            tx_batches[k][r.batch_index] = r.pooled_decision;
        }
    }
    s.mean_realtime_factor = rtf / static_cast<double>(reports.size());
    s.noise_specificity = s.noise_frames ? static_cast<double>(noise_ok) / s.noise_frames : std::nan("");
    std::size_t noise_batches = 0, noise_batches_ok = 0;
    for (const auto& [b, st] : batch_state)
        if (!st.first) {
            ++noise_batches;
            noise_batches_ok += st.second == Decision::Noise;
        }
    s.pooled_noise_specificity = noise_batches ? static_cast<double>(noise_batches_ok) / noise_batches : std::nan("");
    const double det_all = drone_frames ? static_cast<double>(drone_ok) / drone_frames : std::nan("");
    if (drone_frames && s.noise_frames)
        s.binary_balanced_acc = 0.5 * (det_all + s.noise_specificity);
    else
        s.binary_balanced_acc = drone_frames ? det_all : s.noise_specificity;
    for (std::size_t k = 0; k < sc.transmitters.size(); ++k) {
        const auto& tx = sc.transmitters[k];
        SummaryRow row;
        row.transmitter = k;
        row.label = std::string(to_string(tx.label));
        row.distance_m = tx.distance_m;
        row.bearing_deg = tx.bearing_deg;
        row.frames = frames[k];
        if (frames[k]) {
            row.recall = static_cast<double>(hits[k]) / frames[k];
            row.detection_rate = static_cast<double>(det[k]) / frames[k];
            row.binary_balanced_acc =
                s.noise_frames ? 0.5 * (row.detection_rate + s.noise_specificity) : row.detection_rate;
            std::size_t pooled_hits = 0;
            for (const auto& [b, d] : tx_batches[k]) pooled_hits += d == Decision::Drone;
            row.pooled_detection_rate = static_cast<double>(pooled_hits) / tx_batches[k].size();
        } else {
            row.recall = row.detection_rate = row.binary_balanced_acc = row.pooled_detection_rate = std::nan("");
        }
        s.rows.push_back(row);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json report_json(const DetectionReport& r, bool with_latency = true) {
    nlohmann::json j = {{"frame", r.frame_index},
                        {"batch", r.batch_index},
                        {"timestamp_s", r.timestamp_s},
                        {"posteriors", r.posteriors},
                        {"label", class_names[static_cast<std::size_t>(r.label)]},
                        {"frame_decision", to_string(r.frame_decision)},
                        {"pooled_decision", to_string(r.pooled_decision)}};
    if (with_latency) {
        j["latency_s"] = r.latency_s;
        j["realtime_factor"] = r.realtime_factor;
    }
    return j;
}

inline std::string reports_jsonl(const std::vector<DetectionReport>& reports, bool with_latency = true) {
    std::string out;
    for (const auto& r : reports) out += report_json(r, with_latency).dump() + "\n";
    return out;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json summary_json(const RunSummary& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"transmitter", r.transmitter},
                        {"label", r.label},
                        {"distance_m", r.distance_m},
                        {"bearing_deg", r.bearing_deg},
                        {"frames", r.frames},
                        {"recall", finite_or_null(r.recall)},
                        {"detection_rate", finite_or_null(r.detection_rate)},
                        {"binary_balanced_acc", finite_or_null(r.binary_balanced_acc)},
                        {"pooled_detection_rate", finite_or_null(r.pooled_detection_rate)}});
    return {{"schema_version", 1},
            {"empty", s.empty},
            {"rows", rows},
            {"noise_frames", s.noise_frames},
            {"noise_specificity", finite_or_null(s.noise_specificity)},
            {"pooled_noise_specificity", finite_or_null(s.pooled_noise_specificity)},
            {"binary_balanced_acc", finite_or_null(s.binary_balanced_acc)},
            {"mean_realtime_factor", s.mean_realtime_factor}};
}

}  // namespace rfdet::stream
