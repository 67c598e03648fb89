// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "rfdet/stream/detector.hpp"

using namespace rfdet;
using namespace rfdet::stream;

namespace {

nn::ModelCheckpoint random_checkpoint(std::uint64_t seed = 1) {
    nn::Vgg<float> m(nn::VggConfig{}, seed);
    nn::CheckpointMeta meta;
    const auto p = ScaleProfile::desk();
    meta.profile = p.name;
    meta.sample_rate_hz = p.sample_rate_hz;
    meta.frame_length = p.frame_length;
    meta.segment_length = p.segment_length;
    return nn::make_checkpoint(m, PlaneStats{}, meta);
}

Scenario two_tx_scenario() {
    Scenario sc;
    sc.duration_s = 2.0;
    ScenarioTransmitter a, b;
    a.label = Transmitter::DJI;
    a.stop_s = 2.0;
    a.id = 10;
    b.label = Transmitter::Taranis;
    b.start_s = 0.5;
    b.stop_s = 2.0;
    b.distance_m = 220.0;
    b.bearing_deg = 90.0;
    b.id = 11;
    sc.transmitters = {a, b};
    return sc;
}

}  // namespace

TEST(Channel, AntennaAndPathLoss) {
    const ChannelModel ch;
    EXPECT_NEAR(ch.amplitude(ch.reference_distance_m, 0.0), std::pow(10.0, 8.5 / 20.0), 1e-12);
    EXPECT_NEAR(ch.power_db(300.0, 180.0) - ch.power_db(300.0, 0.0), -20.0, 1e-12);
    EXPECT_NEAR(ch.power_db(440.0, 45.0) - ch.power_db(220.0, 45.0), -20.0 * std::log10(2.0), 1e-12);
    EXPECT_NEAR(20.0 * std::log10(2.0), 6.0206, 1e-4);
    EXPECT_DOUBLE_EQ(ch.gain_dbi(90.0), -1.5);
    EXPECT_DOUBLE_EQ(ch.gain_dbi(270.0), ch.gain_dbi(90.0));
    EXPECT_DOUBLE_EQ(ch.gain_dbi(-180.0), -11.5);
    EXPECT_DOUBLE_EQ(ch.front_to_back_db(), 20.0);
    EXPECT_THROW(ch.amplitude(0.0, 0.0), invalid_input);
}

TEST(Channel, ApplyScalesAmplitude) {
    IqFrame<double> f(8, 1.0);
    for (std::size_t i = 0; i < 8; ++i) f.samples[i] = {double(i), -0.5 * double(i)};
    const ChannelModel ch;
    const auto g = apply_channel(f, 220.0, 180.0, ch);
    const double a = ch.amplitude(220.0, 180.0);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(std::abs(g.samples[i] - a * f.samples[i]), 0.0, 1e-12);
}

TEST(Scenario, JsonRoundTripAndValidation) {
    const auto sc = two_tx_scenario();
    const auto back = scenario_from_json(scenario_json(sc));
    EXPECT_EQ(scenario_json(back), scenario_json(sc));
    auto j = scenario_json(sc);
    j["transmitters"][0]["stop_s"] = 3.0;
    EXPECT_THROW(scenario_from_json(j), config_error);
    j = scenario_json(sc);
    j["transmitters"][0]["distance_m"] = 0.0;
    EXPECT_THROW(scenario_from_json(j), config_error);
    j = scenario_json(sc);
    j["noise"]["kind"] = "pink";
    EXPECT_THROW(scenario_from_json(j), config_error);
    EXPECT_NO_THROW(load_scenario(std::string(RFDET_CONFIG_DIR) + "/scenario_demo.json"));
}

TEST(Source, BatchLengthAndCount) {
    Scenario sc;
    sc.duration_s = 2.5;
    const Source src(sc, 1);
    EXPECT_EQ(src.num_batches(), 3u);
    EXPECT_EQ(src.batch_length(), 250000u);
    EXPECT_EQ(src.batch(2).frame.length(), 250000u);
}

TEST(Source, EmptyScenarioIsPureNoise) {
    Scenario sc;
    sc.duration_s = 1.0;
    const Source src(sc, 4);
    EXPECT_TRUE(src.bursts().empty());
    const auto b = src.batch(0);
    const Source again(sc, 4);
    EXPECT_EQ(b.frame.samples, again.batch(0).frame.samples);
    EXPECT_NEAR(mean_power(b.frame), 1.0, 0.02);
    const auto truth = frame_truth(sc, src.bursts(), 61);
    for (const auto& t : truth) EXPECT_EQ(t.class_id, noise_class);
}

TEST(Source, DjiScheduleMatchesOracle) {
    Scenario sc;
    sc.duration_s = 3.0;
    ScenarioTransmitter tx;
    tx.label = Transmitter::DJI;
    tx.stop_s = 3.0;
    sc.transmitters = {tx};
    const std::uint64_t seed = 12;
    const Source src(sc, seed);
    const auto table = default_transmitter_table();
    const auto starts = synth_transmission_schedule(find_model(table, Transmitter::DJI), sc.profile, 3.0,
                                                    derive_seed(seed, {0x7478ULL, 0}));
    ASSERT_EQ(src.bursts().size(), starts.size());
    for (std::size_t k = 0; k < starts.size(); ++k) EXPECT_DOUBLE_EQ(src.bursts()[k].start_s, starts[k]);
    // 600 ms repetition over 3 s.
    EXPECT_GE(starts.size(), 4u);
    EXPECT_LE(starts.size(), 6u);
}

TEST(Source, Superposition) {
    auto both = two_tx_scenario();
    auto only_a = both, only_b = both;
    only_a.transmitters = {both.transmitters[0]};
    only_b.transmitters = {both.transmitters[1]};
    Scenario empty = both;
    empty.transmitters.clear();
    const std::uint64_t seed = 5;
    for (std::size_t b = 0; b < 2; ++b) {
        const auto s = Source(both, seed).batch(b).frame.samples;
        const auto a = Source(only_a, seed, default_transmitter_table(), false).batch(b).frame.samples;
        const auto c = Source(only_b, seed, default_transmitter_table(), false).batch(b).frame.samples;
        const auto n = Source(empty, seed).batch(b).frame.samples;
        double worst = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, double(std::abs(s[i] - (a[i] + c[i] + n[i]))));
        EXPECT_LT(worst, 1e-5);
    }
}

TEST(Detector, FramesPerBatchAtDeskProfile) {
    StreamClassifier clf(random_checkpoint(), ScaleProfile::desk());
    EXPECT_EQ(clf.frames_per_batch(250000), 61u);
}

TEST(Detector, ProfileMismatchRejected) {
    auto ck = random_checkpoint();
    ck.meta.sample_rate_hz = 14e6;
    EXPECT_THROW(StreamClassifier(ck, ScaleProfile::desk()), config_error);
    StreamClassifier clf(random_checkpoint(), ScaleProfile::desk());
    IqBatch b;
    b.frame = IqFrame<float>(250000, 1e6);
    EXPECT_THROW(clf.classify_batch(b), config_error);
}

TEST(Detector, ReportInvariantsAndDeterminism) {
    const auto sc = two_tx_scenario();
    const Source src(sc, 3);
    StreamClassifier c1(random_checkpoint(2), sc.profile), c2(random_checkpoint(2), sc.profile);
    const auto r1 = run_pipeline(src, c1);
    const auto r2 = run_pipeline(Source(sc, 3), c2);
    ASSERT_EQ(r1.size(), 122u);
    EXPECT_EQ(reports_jsonl(r1, false), reports_jsonl(r2, false));
    for (std::size_t i = 0; i < r1.size(); ++i) {
        const auto& r = r1[i];
        EXPECT_EQ(r.frame_index, i);
        double s = 0;
        for (double p : r.posteriors) s += p;
        EXPECT_NEAR(s, 1.0, 1e-6);
        EXPECT_GT(r.realtime_factor, 0.0);
        EXPECT_NEAR(r.timestamp_s, double(r.batch_index) + double(i % 61) * 4096.0 / 250000.0, 1e-12);
    }
}

TEST(Detector, ThresholdMonotonicity) {
    const auto sc = two_tx_scenario();
    StreamClassifier clf(random_checkpoint(4), sc.profile);
    const auto reports = run_pipeline(Source(sc, 8), clf);
    std::size_t prev_frames = reports.size() + 1, prev_pooled = reports.size() + 1;
    for (double th : {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        const auto r = apply_threshold(reports, th);
        std::size_t frames = 0, pooled = 0;
        for (const auto& x : r) {
            frames += x.frame_decision == Decision::Drone;
            pooled += x.pooled_decision == Decision::Drone;
        }
        EXPECT_LE(frames, prev_frames);
        EXPECT_LE(pooled, prev_pooled);
        prev_frames = frames;
        prev_pooled = pooled;
    }
}

TEST(Truth, QuarterBurstRule) {
    Scenario sc;
    sc.duration_s = 1.0;
    ScenarioTransmitter tx;
    tx.label = Transmitter::Taranis;
    tx.stop_s = 1.0;
    sc.transmitters = {tx};
    const double frame_s = sc.profile.frame_duration_s();
    ScheduledBurst b;
    b.label = Transmitter::Taranis;
    b.duration_s = 0.004;  // shorter than a frame
    const double dur = burst_samples(b.duration_s, sc.profile) / sc.profile.sample_rate_hz;
    // 20% of the burst in frame 9, 80% in frame 10.
    b.start_s = 10 * frame_s - 0.2 * dur;
    auto t = frame_truth(sc, {b}, 61);
    EXPECT_EQ(t[9].class_id, noise_class);
    EXPECT_EQ(t[10].class_id, class_of(Transmitter::Taranis));
    // 30% / 70%: both frames qualify.
    b.start_s = 10 * frame_s - 0.3 * dur;
    t = frame_truth(sc, {b}, 61);
    EXPECT_EQ(t[9].class_id, class_of(Transmitter::Taranis));
    EXPECT_EQ(t[10].class_id, class_of(Transmitter::Taranis));
    EXPECT_EQ(t[10].transmitter, 0);
}

TEST(Summary, PerfectRandomAndEmpty) {
    const auto sc = two_tx_scenario();
    const Source src(sc, 6);
    const auto truth = frame_truth(sc, src.bursts(), 61);
    std::vector<DetectionReport> perfect, random;
    auto rng = make_rng(77);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        DetectionReport r;
        r.frame_index = i;
        r.batch_index = i / 61;
        r.label = truth[i].class_id;
        r.posteriors[static_cast<std::size_t>(r.label)] = 1.0;
        r.frame_decision = is_drone_class(r.label) ? Decision::Drone : Decision::Noise;
        r.realtime_factor = 0.1;
        perfect.push_back(r);
    }
    const auto ps = summarize_run(apply_threshold(perfect, 0.5), truth, sc);
    EXPECT_FALSE(ps.empty);
    EXPECT_DOUBLE_EQ(ps.binary_balanced_acc, 1.0);
    for (const auto& row : ps.rows) {
        ASSERT_GT(row.frames, 0u);
        EXPECT_DOUBLE_EQ(row.recall, 1.0);
        EXPECT_DOUBLE_EQ(row.binary_balanced_acc, 1.0);
    }
    EXPECT_NEAR(ps.mean_realtime_factor, 0.1, 1e-12);

    // Uniform random labels on a long repeated truth sequence.
    std::vector<FrameTruth> long_truth;
    for (int rep = 0; rep < 200; ++rep) long_truth.insert(long_truth.end(), truth.begin(), truth.end());
    for (std::size_t i = 0; i < long_truth.size(); ++i) {
        DetectionReport r;
        r.frame_index = i;
        r.batch_index = i / 61;
        r.label = static_cast<int>(uniform_index(rng, num_classes));
        r.posteriors[static_cast<std::size_t>(r.label)] = 1.0;
        random.push_back(r);
    }
    const auto rs = summarize_run(apply_threshold(random, 0.5), long_truth, sc);
    for (const auto& row : rs.rows) {
        const double n = static_cast<double>(row.frames);
        const double ci = 4.0 * std::sqrt((1.0 / 7.0) * (6.0 / 7.0) / n);
        EXPECT_NEAR(row.recall, 1.0 / 7.0, ci) << row.label;
        EXPECT_NEAR(row.detection_rate, 6.0 / 7.0, 4.0 * std::sqrt((6.0 / 49.0) / n));
    }

    const auto es = summarize_run({}, truth, sc);
    EXPECT_TRUE(es.empty);
    EXPECT_TRUE(es.rows.empty());
    EXPECT_TRUE(summary_json(es).at("empty").get<bool>());
}

TEST(Queue, FifoAndClose) {
    BoundedQueue<int> q(2);
    EXPECT_TRUE(q.push(1));
    EXPECT_TRUE(q.push(2));
    EXPECT_EQ(q.size(), 2u);
    EXPECT_EQ(*q.pop(), 1);
    q.close();
    EXPECT_FALSE(q.push(3));
    EXPECT_EQ(*q.pop(), 2);
    EXPECT_FALSE(q.pop().has_value());
    EXPECT_THROW(BoundedQueue<int>(0), invalid_input);
}

TEST(Queue, BackPressureBoundsOccupancy) {
    BoundedQueue<int> q(2);
    std::atomic<int> pushed{0};
    std::thread producer([&] {
        for (int i = 0; i < 100; ++i) {
            q.push(i);
            ++pushed;
        }
        q.close();
    });
    while (pushed < 2) std::this_thread::yield();
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    EXPECT_EQ(pushed.load(), 2);
    std::vector<int> got;
    while (auto v = q.pop()) got.push_back(*v);
    producer.join();
    ASSERT_EQ(got.size(), 100u);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(got[static_cast<std::size_t>(i)], i);
    EXPECT_LE(q.high_water_mark(), 2u);
}

TEST(Pipeline, SampleRateMismatchStopsRun) {
    Scenario sc;
    sc.duration_s = 1.0;
    sc.profile.sample_rate_hz = 1e6;  // classifier is built for the desk profile
    StreamClassifier clf(random_checkpoint(), ScaleProfile::desk());
    EXPECT_THROW(run_pipeline(Source(sc, 1), clf), config_error);
}
