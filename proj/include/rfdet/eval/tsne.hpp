// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact O(N^2) t-SNE.

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "rfdet/errors.hpp"
#include "rfdet/rng.hpp"

namespace rfdet::eval {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    double init_scale = 1e-4;
    double min_gain = 0.01;
    int kl_every = 0;  // 0 = no KL history
    std::uint64_t seed = 0;
};

struct TsneResult {
    std::vector<std::array<double, 2>> points;
    std::vector<std::pair<int, double>> kl_history;  // (iteration, KL) after that many iterations
};

namespace detail {

inline std::vector<double> squared_distances(const std::vector<std::vector<double>>& x) {
    const std::size_t n = x.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < x[i].size(); ++k) {
                const double t = x[i][k] - x[j][k];
                s += t * t;
            }
            d[i * n + j] = d[j * n + i] = s;
        }
    return d;
}

/// Row-conditional Gaussian affinities with per-row precision found by
/// bisection so each row's entropy equals ln(perplexity).
inline std::vector<double> conditional_affinities(const std::vector<double>& d2, std::size_t n, double perplexity) {
    const double target = std::log(perplexity);
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        const double* di = d2.data() + i * n;
        double* pi = p.data() + i * n;
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, di[j]);
        for (int it = 0; it < 200; ++it) {
            double sum = 0.0, wsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double e = std::exp(-beta * (di[j] - dmin));
                pi[j] = e;
                sum += e;
                wsum += e * (di[j] - dmin);
            }
            const double h = std::log(sum) + beta * wsum / sum;
            for (std::size_t j = 0; j < n; ++j) pi[j] /= sum;
            const double diff = h - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = std::isinf(lo) ? beta / 2.0 : 0.5 * (beta + lo);
            }
        }
        pi[i] = 0.0;
    }
    return p;
}

}  // namespace detail

/// Joint affinities P = (P_cond + P_cond^T) / 2N, floored at 1e-12.
inline std::vector<double> tsne_joint_affinities(const std::vector<std::vector<double>>& x, double perplexity) {
    const std::size_t n = x.size();
    const auto pc = detail::conditional_affinities(detail::squared_distances(x), n, perplexity);
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) p[i * n + j] = std::max((pc[i * n + j] + pc[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
    return p;
}

inline double tsne_kl(const std::vector<double>& p, const std::vector<std::array<double, 2>>& y) {
    const std::size_t n = y.size();
    std::vector<double> num(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
            num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += num[i * n + j];
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < n * n; ++i)
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(num[i] / z, 1e-300));
    return kl;
}

inline TsneResult tsne_project(const std::vector<std::vector<double>>& x, const TsneConfig& cfg = {}) {
    const std::size_t n = x.size();
    if (!(cfg.perplexity > 0.0)) throw invalid_input("tsne: perplexity must be positive");
    if (static_cast<double>(n) <= 3.0 * cfg.perplexity)
        throw invalid_input("tsne: need more than 3 x perplexity points, got " + std::to_string(n));
    for (const auto& r : x)
        if (r.size() != x[0].size()) throw invalid_input("tsne: ragged input");
    if (cfg.iterations < 0) throw invalid_input("tsne: negative iteration count");

    const auto p = tsne_joint_affinities(x, cfg.perplexity);

    TsneResult res;
    auto rng = make_rng(cfg.seed, {0x74736e65ULL});
    std::normal_distribution<double> nd(0.0, 1.0);
    res.points.resize(n);
    for (auto& y : res.points) y = {cfg.init_scale * nd(rng), cfg.init_scale * nd(rng)};

    std::vector<std::array<double, 2>> update(n, {0.0, 0.0}), gains(n, {1.0, 1.0}), grad(n);
    std::vector<double> num(n * n);
    for (int it = 0; it < cfg.iterations; ++it) {
        const double exag = it < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        const double mom = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = res.points[i][0] - res.points[j][0], dy = res.points[i][1] - res.points[j][1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = num[j * n + i] = v;
                z += 2.0 * v;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0, gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = (exag * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
                gx += w * (res.points[i][0] - res.points[j][0]);
                gy += w * (res.points[i][1] - res.points[j][1]);
            }
            grad[i] = {4.0 * gx, 4.0 * gy};
        }
        for (std::size_t i = 0; i < n; ++i)
            for (int d = 0; d < 2; ++d) {
                auto& g = gains[i][d];
                g = (grad[i][d] > 0) != (update[i][d] > 0) ? g + 0.2 : g * 0.8;
                g = std::max(g, cfg.min_gain);
                update[i][d] = mom * update[i][d] - cfg.learning_rate * g * grad[i][d];
                res.points[i][d] += update[i][d];
            }
        std::array<double, 2> mean{0.0, 0.0};
        for (const auto& y : res.points) {
            mean[0] += y[0];
            mean[1] += y[1];
        }
        for (auto& y : res.points) {
            y[0] -= mean[0] / static_cast<double>(n);
            y[1] -= mean[1] / static_cast<double>(n);
        }
        if (cfg.kl_every > 0 && ((it + 1) % cfg.kl_every == 0 || it + 1 == cfg.iterations))
            res.kl_history.emplace_back(it + 1, tsne_kl(p, res.points));
    }
    return res;
}

}  // namespace rfdet::eval
