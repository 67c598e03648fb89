// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rfdet/dataset.hpp"
#include "rfdet/errors.hpp"
#include "rfdet/eval/metrics.hpp"
#include "rfdet/nn/adam.hpp"
#include "rfdet/nn/checkpoint.hpp"
#include "rfdet/nn/vgg.hpp"
#include "rfdet/rng.hpp"
#include "rfdet/spectro.hpp"

namespace rfdet::nn {

enum class LrSchedule { Constant, Cosine };

inline std::string_view to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

inline LrSchedule lr_schedule_from_string(std::string_view s) {
    if (s == "constant") return LrSchedule::Constant;
    if (s == "cosine") return LrSchedule::Cosine;
    throw config_error("unknown learning-rate schedule '" + std::string(s) + "'");
}

struct TrainConfig {
    int epochs = 200;
    std::size_t batch_size = 8;
    AdamConfig adam;
    LrSchedule lr_schedule = LrSchedule::Constant;
    std::uint64_t seed = 0;

    /// Learning rate for 1-based optimizer step `step` out of `total_steps`;
    /// cosine anneals from adam.lr towards 0 over the run.
    double lr_at(long step, long total_steps) const {
        if (lr_schedule == LrSchedule::Constant || total_steps <= 0) return adam.lr;
        const double frac = static_cast<double>(step - 1) / static_cast<double>(total_steps);
        return 0.5 * adam.lr * (1.0 + std::cos(std::numbers::pi * frac));
    }

    void validate() const {
        if (epochs < 0) throw config_error("TrainConfig: epochs must be >= 0");
        if (batch_size == 0) throw config_error("TrainConfig: batch size must be positive");
        adam.validate();
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_balanced_acc = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
    ModelCheckpoint checkpoint;
    std::vector<EpochRecord> history;
};

/// Standardized batch tensor [B x 2 x S x C] from the selected samples.
template <typename T>
Tensor<T> make_batch(std::span<const LabeledSample> samples, std::span<const std::size_t> idx, const PlaneStats& stats) {
    if (idx.empty()) throw invalid_input("make_batch: empty batch");
    const auto& first = samples[idx[0]].spectrogram;
    const std::size_t s = first.segment_length, c = first.columns, plane = s * c;
    Tensor<T> x({idx.size(), 2, s, c});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& sp = samples[idx[b]].spectrogram;
        if (sp.segment_length != s || sp.columns != c) throw invalid_input("make_batch: mixed spectrogram shapes");
        for (std::size_t p = 0; p < 2; ++p) {
            const double m = stats.mean[p];
            const double inv = 1.0 / stats.stddev[p];
            const float* src = sp.planes.data() + p * plane;
            T* dst = x.ptr() + (b * 2 + p) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>((src[i] - m) * inv);
        }
    }
    return x;
}

struct Predictions {
    std::vector<int> classes;
    std::vector<std::vector<double>> probs;       // [N][K]
    std::vector<std::vector<double>> embeddings;  // [N][hidden], filled on request
};

/// Eval-mode inference in fixed-size chunks.
template <typename T>
Predictions predict(Vgg<T>& model, std::span<const LabeledSample> samples, std::span<const std::size_t> idx,
                    const PlaneStats& stats, std::size_t batch = 32, bool want_embeddings = false) {
    Predictions out;
    for (std::size_t s = 0; s < idx.size(); s += batch) {
        const auto chunk = idx.subspan(s, std::min(batch, idx.size() - s));
        auto r = model.forward_full(make_batch<T>(samples, chunk, stats), false);
        const auto p = softmax(r.logits);
        const std::size_t k = p.dim(1), h = r.embedding.dim(1);
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            std::vector<double> row(p.ptr() + b * k, p.ptr() + (b + 1) * k);
            const T* z = r.logits.ptr() + b * k;
            out.classes.push_back(static_cast<int>(std::max_element(z, z + k) - z));
            out.probs.push_back(std::move(row));
            if (want_embeddings) out.embeddings.emplace_back(r.embedding.ptr() + b * h, r.embedding.ptr() + (b + 1) * h);
        }
    }
    return out;
}

template <typename T>
double validation_balanced_accuracy(Vgg<T>& model, std::span<const LabeledSample> samples,
                                    std::span<const std::size_t> val, const PlaneStats& stats) {
    if (val.empty()) return 0.0;
    const auto pred = predict(model, samples, val, stats);
    std::vector<int> labels;
    for (auto i : val) labels.push_back(samples[i].class_id);
    return eval::balanced_accuracy(eval::confusion(pred.classes, labels, model.config().num_classes), true);
}

template <typename T>
PlaneStats training_stats(std::span<const LabeledSample> samples, std::span<const std::size_t> idx) {
    return compute_plane_stats<float>(std::views::transform(
        idx, [&](std::size_t i) -> const Spectrogram<float>& { return samples[i].spectrogram; }));
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam on `train_idx`; after every epoch the validation balanced
/// accuracy is measured and the weights are snapshotted when it strictly
/// improves. The model ends up holding the best snapshot.
template <typename T>
TrainResult train(Vgg<T>& model, std::span<const LabeledSample> samples, std::span<const std::size_t> train_idx,
                  std::span<const std::size_t> val_idx, const TrainConfig& cfg, CheckpointMeta meta = {},
                  const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_idx.empty()) throw invalid_input("train: empty training split");
    {
        std::vector<std::size_t> a(train_idx.begin(), train_idx.end()), b(val_idx.begin(), val_idx.end());
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<std::size_t> both;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
        if (!both.empty()) throw invalid_input("train: training and validation splits overlap");
    }
    for (auto i : train_idx)
        if (i >= samples.size()) throw invalid_input("train: index out of range");

    const PlaneStats stats = training_stats<T>(samples, train_idx);
    meta.seed = cfg.seed;

    TrainResult result;
    if (cfg.epochs == 0) {
        meta.epoch = 0;
        meta.val_balanced_acc = validation_balanced_accuracy(model, samples, val_idx, stats);
        result.checkpoint = make_checkpoint(model, stats, meta);
        return result;
    }

    AdamState<T> opt;
    AdamConfig adam = cfg.adam;
    const long total_steps =
        static_cast<long>(cfg.epochs) * static_cast<long>((train_idx.size() + cfg.batch_size - 1) / cfg.batch_size);
    long step = 0;
    double best = -1.0;
    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    std::vector<int> labels;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto rng = make_rng(cfg.seed, {0x73687566ULL, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t s = 0, batch_no = 0; s < order.size(); s += cfg.batch_size, ++batch_no) {
            const std::span<const std::size_t> chunk(order.data() + s, std::min(cfg.batch_size, order.size() - s));
            labels.clear();
            for (auto i : chunk) labels.push_back(samples[i].class_id);
            model.zero_grad();
            const auto diverged = [&](const char* what) {
                return training_diverged(epoch, batch_no, std::string("non-finite ") + what + " at epoch " +
                                                              std::to_string(epoch) + ", batch " + std::to_string(batch_no));
            };
            const auto x = make_batch<T>(samples, chunk, stats);
            if (!x.all_finite()) throw diverged("input");
            const auto logits = model.forward(x, true);
            const auto ce = softmax_cross_entropy<T>(logits, labels);
            if (!std::isfinite(ce.loss) || !logits.all_finite()) throw diverged("loss");
            model.backward(ce.grad);
            auto ps = model.params();
            ++step;
            adam.lr = cfg.lr_at(step, total_steps);
            adam_step(ps, opt, step, adam);
            for (const auto& p : ps)
                if (!p.value->all_finite()) throw diverged("parameters");
            loss_sum += ce.loss * static_cast<double>(chunk.size());
            seen += chunk.size();
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen),
                        validation_balanced_accuracy(model, samples, val_idx, stats)};
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (rec.val_balanced_acc > best) {
            best = rec.val_balanced_acc;
            meta.epoch = epoch;
            meta.val_balanced_acc = best;
            result.checkpoint = make_checkpoint(model, stats, meta);
        }
    }
    load_into(model, result.checkpoint);
    return result;
}

inline void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out << "epoch,train_loss,val_balanced_acc\n";
    char buf[96];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", r.epoch, r.train_loss, r.val_balanced_acc);
        out << buf;
    }
    if (!out) throw io_error("short write to '" + path.string() + "'");
}

}  // namespace rfdet::nn
