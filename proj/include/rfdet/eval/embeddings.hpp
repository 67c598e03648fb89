// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "rfdet/dataset.hpp"
#include "rfdet/nn/train.hpp"

namespace rfdet::eval {

struct EmbeddingSet {
    std::vector<std::vector<double>> rows;  // [N][hidden]
    std::vector<int> labels;
    std::vector<double> snr_db;
    std::vector<std::size_t> sample_ids;

    std::size_t size() const noexcept { return rows.size(); }
};

/// Hidden dense-layer activations (after its ReLU) in eval mode.
template <typename T>
EmbeddingSet extract_embeddings(nn::Vgg<T>& model, std::span<const LabeledSample> samples,
                                std::span<const std::size_t> idx, const PlaneStats& stats) {
    EmbeddingSet e;
    if (idx.empty()) return e;
    auto pred = nn::predict(model, samples, idx, stats, 32, true);
    e.rows = std::move(pred.embeddings);
    for (auto i : idx) {
        e.labels.push_back(samples[i].class_id);
        e.snr_db.push_back(samples[i].snr_db);
        e.sample_ids.push_back(i);
    }
    return e;
}

}  // namespace rfdet::eval
