// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "rfdet/dataset.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/nn/train.hpp"

namespace rfdet::eval {

struct SnrPoint {
    double snr_db = 0.0;
    double balanced_acc = 0.0;
    std::size_t count = 0;
    ConfusionMatrix cm;
};

/// Per-level balanced accuracy over the classes present in each bucket.
/// Grid levels without samples are omitted from `points` and listed in `empty`.
struct SnrCurve {
    std::vector<SnrPoint> points;
    std::vector<double> empty;

    std::size_t total_count() const {
        std::size_t n = 0;
        for (const auto& p : points) n += p.count;
        return n;
    }
};

inline SnrCurve per_snr_curve(std::span<const int> preds, std::span<const int> labels, std::span<const double> snr_db,
                              std::span<const double> grid, std::size_t classes = num_classes) {
    if (preds.size() != labels.size() || preds.size() != snr_db.size())
        throw invalid_input("per_snr_curve: predictions, labels and SNR tags differ in length");
    std::map<double, std::pair<std::vector<int>, std::vector<int>>> buckets;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto& b = buckets[snr_db[i]];
        b.first.push_back(preds[i]);
        b.second.push_back(labels[i]);
    }
    for (const auto& [snr, b] : buckets) {
        bool on_grid = false;
        for (double g : grid) on_grid |= std::abs(g - snr) < 1e-9;
        if (!on_grid) throw invalid_input("per_snr_curve: SNR tag " + std::to_string(snr) + " dB is not on the grid");
    }
    SnrCurve curve;
    for (double g : grid) {
        auto it = buckets.find(g);
        if (it == buckets.end()) {
            curve.empty.push_back(g);
            continue;
        }
        SnrPoint p;
        p.snr_db = g;
        p.cm = confusion(it->second.first, it->second.second, classes);
        p.count = it->second.first.size();
        p.balanced_acc = balanced_accuracy(p.cm, true);
        curve.points.push_back(std::move(p));
    }
    return curve;
}

/// Model-driven variant over `idx` of a labelled sample set.
template <typename T>
SnrCurve per_snr_curve(nn::Vgg<T>& model, std::span<const LabeledSample> samples, std::span<const std::size_t> idx,
                       const PlaneStats& stats) {
    const auto pred = nn::predict(model, samples, idx, stats);
    std::vector<int> labels;
    std::vector<double> snr;
    for (auto i : idx) {
        labels.push_back(samples[i].class_id);
        snr.push_back(samples[i].snr_db);
    }
    const auto grid = snr_grid();
    return per_snr_curve(pred.classes, labels, snr, grid, model.config().num_classes);
}

/// Off-diagonal mass split into confusions that cross the drone/noise boundary
/// and confusions among drone classes, summed over the given points.
struct ConfusionSplit {
    long drone_noise = 0;
    long drone_drone = 0;
};

inline ConfusionSplit split_confusions(const ConfusionMatrix& cm, std::size_t noise = noise_class) {
    ConfusionSplit s;
    for (std::size_t t = 0; t < cm.classes; ++t)
        for (std::size_t p = 0; p < cm.classes; ++p) {
            if (t == p) continue;
            if ((t == noise) != (p == noise))
                s.drone_noise += cm(t, p);
            else if (t != noise)
                s.drone_drone += cm(t, p);
        }
    return s;
}

}  // namespace rfdet::eval
