// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rfdet/errors.hpp"

namespace rfdet::eval {

/// counts[t][p]: rows are true classes, columns predictions.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<long> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}

    long& operator()(std::size_t t, std::size_t p) { return counts[t * classes + p]; }
    long operator()(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }

    long row_sum(std::size_t t) const {
        return std::accumulate(counts.begin() + static_cast<std::ptrdiff_t>(t * classes),
                               counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * classes), 0L);
    }
    long total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }
    long trace() const {
        long s = 0;
        for (std::size_t i = 0; i < classes; ++i) s += (*this)(i, i);
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        if (o.classes != classes) throw invalid_input("ConfusionMatrix: size mismatch");
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes = 7) {
    if (preds.size() != labels.size()) throw invalid_input("confusion: predictions and labels differ in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes)
            throw invalid_input("confusion: label out of range at index " + std::to_string(i));
        ++cm(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
    const long n = cm.total();
    if (n == 0) throw invalid_input("accuracy: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

/// Mean per-class recall. With `skip_empty`, classes without samples are left
/// out of the mean instead of rejecting the matrix.
inline double balanced_accuracy(const ConfusionMatrix& cm, bool skip_empty = false) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < cm.classes; ++t) {
        const long r = cm.row_sum(t);
        if (r == 0) {
            if (skip_empty) continue;
            throw invalid_input("balanced_accuracy: class " + std::to_string(t) + " has no samples");
        }
        sum += static_cast<double>(cm(t, t)) / static_cast<double>(r);
        ++used;
    }
    if (used == 0) throw invalid_input("balanced_accuracy: no samples");
    return sum / static_cast<double>(used);
}

inline std::vector<double> recalls(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.classes, std::nan(""));
    for (std::size_t t = 0; t < cm.classes; ++t) {
        const long r = cm.row_sum(t);
        if (r > 0) out[t] = static_cast<double>(cm(t, t)) / static_cast<double>(r);
    }
    return out;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t q = i; q <= j; ++q) r[idx[q]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw invalid_input("pearson: need two equal-length series, n >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw degenerate_input("pearson: constant series");
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = ranks(x), ry = ranks(y);
    return pearson(rx, ry);
}

}  // namespace rfdet::eval
