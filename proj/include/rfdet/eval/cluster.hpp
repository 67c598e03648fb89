// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "rfdet/errors.hpp"
#include "rfdet/rng.hpp"

namespace rfdet::eval {

using Points = std::vector<std::vector<double>>;

namespace detail {

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

}  // namespace detail

struct KMeansResult {
    std::vector<int> assignment;
    Points centroids;
    double inertia = 0.0;
};

/// Lloyd's algorithm from k-means++ seeds; best of `restarts` by inertia.
inline KMeansResult kmeans(const Points& x, std::size_t k, std::uint64_t seed = 0, int restarts = 10,
                           int max_iter = 300) {
    const std::size_t n = x.size();
    if (k == 0 || k > n) throw invalid_input("kmeans: need 1 <= k <= n");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        auto rng = make_rng(seed, {0x6b6d65616e73ULL, static_cast<std::uint64_t>(r)});
        Points c;
        c.push_back(x[uniform_index(rng, n)]);
        std::vector<double> d(n);
        while (c.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = std::numeric_limits<double>::infinity();
                for (const auto& cc : c) d[i] = std::min(d[i], detail::sqdist(x[i], cc));
                total += d[i];
            }
            if (total <= 0.0) {
                c.push_back(x[uniform_index(rng, n)]);
                continue;
            }
            double u = uniform(rng, 0.0, total);
            std::size_t pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                u -= d[i];
                if (u <= 0.0) {
                    pick = i;
                    break;
                }
            }
            c.push_back(x[pick]);
        }
        std::vector<int> a(n, -1);
        double inertia = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            bool changed = false;
            inertia = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                int bi = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < k; ++j) {
                    const double dd = detail::sqdist(x[i], c[j]);
                    if (dd < bd) {
                        bd = dd;
                        bi = static_cast<int>(j);
                    }
                }
                changed |= a[i] != bi;
                a[i] = bi;
                inertia += bd;
            }
            if (!changed) break;
            Points sum(k, std::vector<double>(x[0].size(), 0.0));
            std::vector<std::size_t> cnt(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++cnt[static_cast<std::size_t>(a[i])];
                for (std::size_t q = 0; q < x[i].size(); ++q) sum[static_cast<std::size_t>(a[i])][q] += x[i][q];
            }
            for (std::size_t j = 0; j < k; ++j)
                if (cnt[j] > 0)
                    for (std::size_t q = 0; q < sum[j].size(); ++q) c[j][q] = sum[j][q] / static_cast<double>(cnt[j]);
        }
        if (inertia < best.inertia) best = {a, c, inertia};
    }
    return best;
}

/// Fraction of points whose cluster's majority class equals their own class.
inline double cluster_purity(std::span<const int> clusters, std::span<const int> labels) {
    if (clusters.size() != labels.size() || clusters.empty()) throw invalid_input("purity: bad input lengths");
    std::map<int, std::map<int, long>> tally;
    for (std::size_t i = 0; i < clusters.size(); ++i) ++tally[clusters[i]][labels[i]];
    long hit = 0;
    for (const auto& [c, m] : tally) {
        long mx = 0;
        for (const auto& [l, v] : m) mx = std::max(mx, v);
        hit += mx;
    }
    return static_cast<double>(hit) / static_cast<double>(clusters.size());
}

/// Mean silhouette coefficient with Euclidean distance; singletons score 0.
inline double silhouette(const Points& x, std::span<const int> labels) {
    const std::size_t n = x.size();
    if (labels.size() != n || n < 2) throw invalid_input("silhouette: bad input");
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    if (sizes.size() < 2) throw degenerate_input("silhouette: needs at least two groups");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<int, double> sum;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[labels[j]] += std::sqrt(detail::sqdist(x[i], x[j]));
        const std::size_t own = sizes[labels[i]];
        if (own < 2) continue;
        const double a = sum[labels[i]] / static_cast<double>(own - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [l, s] : sum)
            if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

}  // namespace rfdet::eval
