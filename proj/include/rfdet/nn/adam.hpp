// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "rfdet/errors.hpp"
#include "rfdet/nn/layers.hpp"

namespace rfdet::nn {

struct AdamConfig {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const {
        if (!(lr > 0.0)) throw config_error("Adam: lr must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw config_error("Adam: betas in [0, 1)");
        if (!(eps > 0.0) || weight_decay < 0.0) throw config_error("Adam: invalid eps or weight decay");
    }
};

/// First/second moment buffers, one pair per trainable parameter.
template <typename T>
struct AdamState {
    std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update at step t (1-based). Weight decay is the
/// L2 form added to the gradient.
template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState<T>& state, long t, const AdamConfig& cfg) {
    if (t < 1) throw invalid_input("adam_step: step index must be >= 1");
    std::size_t slot = 0;
    for (auto& p : params) {
        if (!p.trainable()) continue;
        if (state.m.size() <= slot) {
            state.m.emplace_back(p.value->size(), 0.0);
            state.v.emplace_back(p.value->size(), 0.0);
        }
        auto& m = state.m[slot];
        auto& v = state.v[slot];
        if (m.size() != p.value->size()) throw invalid_input("adam_step: state shape mismatch for " + p.name);
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < m.size(); ++i) {
            double g = (*p.grad)[i];
            const double w = (*p.value)[i];
            if (cfg.weight_decay != 0.0) g += cfg.weight_decay * w;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            (*p.value)[i] = static_cast<T>(w - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
        ++slot;
    }
}

}  // namespace rfdet::nn
