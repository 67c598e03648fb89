// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-preparation DSP chain: decimation, burst localization, the two power
// normalizations and SNR mixing. Everything here is a pure function.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rfdet/errors.hpp"

namespace rfdet {

template <typename T>
using cplx = std::complex<T>;

/// Fixed-length complex baseband samples with their sample rate.
template <typename T = float>
struct IqFrame {
    std::vector<cplx<T>> samples;
    double sample_rate_hz = 0.0;

    IqFrame() = default;

    IqFrame(std::vector<cplx<T>> s, double rate) : samples(std::move(s)), sample_rate_hz(rate) {
        if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
            throw invalid_input("IqFrame: sample rate must be positive and finite");
        for (const auto& z : samples)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw invalid_input("IqFrame: non-finite sample");
    }

    IqFrame(std::size_t n, double rate) : IqFrame(std::vector<cplx<T>>(n), rate) {}

    std::size_t length() const noexcept { return samples.size(); }
    double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate_hz; }

    template <typename U>
    IqFrame<U> cast() const {
        std::vector<cplx<U>> out(samples.size());
        std::transform(samples.begin(), samples.end(), out.begin(), [](const cplx<T>& z) {
            return cplx<U>(static_cast<U>(z.real()), static_cast<U>(z.imag()));
        });
        IqFrame<U> f;
        f.samples = std::move(out);
        f.sample_rate_hz = sample_rate_hz;
        return f;
    }
};

/// Half-open sample range [start, end).
struct Interval {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted, non-overlapping burst support within a frame.
struct BurstMask {
    std::vector<Interval> intervals;
    std::size_t frame_length = 0;

    std::size_t covered() const noexcept {
        std::size_t m = 0;
        for (const auto& iv : intervals) m += iv.size();
        return m;
    }

    bool empty() const noexcept { return intervals.empty(); }

    bool contains(std::size_t i) const noexcept {
        for (const auto& iv : intervals)
            if (i >= iv.start && i < iv.end) return true;
        return false;
    }

    static BurstMask whole(std::size_t n) { return {{{0, n}}, n}; }

    /// Throws invalid_input when the invariants do not hold.
    void validate() const {
        std::size_t prev_end = 0;
        for (std::size_t k = 0; k < intervals.size(); ++k) {
            const auto& iv = intervals[k];
            if (iv.start >= iv.end || iv.end > frame_length || (k > 0 && iv.start < prev_end))
                throw invalid_input("BurstMask: intervals must be sorted, non-empty, disjoint and in range");
            prev_end = iv.end;
        }
    }
};

/// SNR in dB with its linear mixing factor k = 10^(snr/10).
struct SnrSpec {
    double snr_db = 0.0;

    double k_factor() const noexcept { return std::pow(10.0, snr_db / 10.0); }
};

inline constexpr std::size_t default_smooth_window = 129;
inline constexpr double default_burst_threshold = 0.5;
inline constexpr double segment_select_factor = 0.001;

// ---------------------------------------------------------------------------
// Decimation

/// One second-order section, a0 == 1.
struct Biquad {
    double b0, b1, b2, a1, a2;

    std::complex<double> response(double omega) const {
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }
};

/// Chebyshev type I low-pass as cascaded biquads, designed through the analog
/// prototype and the bilinear transform. `cutoff` is relative to Nyquist.
/// Each section is scaled to unit DC gain, so the passband ripples upward
/// from 1 instead of downward.
inline std::vector<Biquad> cheby1_lowpass(int order, double ripple_db, double cutoff) {
    if (order < 2 || order % 2 != 0) throw invalid_input("cheby1_lowpass: order must be even and >= 2");
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw invalid_input("cheby1_lowpass: cutoff must lie in (0, 1)");
    if (!(ripple_db > 0.0)) throw invalid_input("cheby1_lowpass: ripple must be positive");

    using std::numbers::pi;
    const double eps = std::sqrt(std::pow(10.0, 0.1 * ripple_db) - 1.0);
    const double mu = std::asinh(1.0 / eps) / order;
    const double fs2 = 4.0;  // 2 * fs with fs = 2 (Nyquist-normalized)
    const double warped = fs2 * std::tan(pi * cutoff / 2.0);

    std::vector<Biquad> sections;
    // Upper-half-plane poles; the conjugates complete each section.
    for (int m = 1; m < order; m += 2) {
        const double theta = pi * m / (2.0 * order);
        const std::complex<double> p_analog = -std::sinh(std::complex<double>(mu, theta)) * warped;
        const std::complex<double> p = (fs2 + p_analog) / (fs2 - p_analog);
        const double a1 = -2.0 * p.real();
        const double a2 = std::norm(p);
        const double g = (1.0 + a1 + a2) / 4.0;  // zeros at z = -1 twice
        sections.push_back({g, 2.0 * g, g, a1, a2});
    }
    return sections;
}

inline std::complex<double> cascade_response(std::span<const Biquad> sos, double omega) {
    std::complex<double> h = 1.0;
    for (const auto& s : sos) h *= s.response(omega);
    return h;
}

namespace detail {

// Transposed direct form II, in place. `level` seeds every section with the
// steady state of a constant input of that value (all sections have unit DC gain).
inline void sosfilt_inplace(std::span<const Biquad> sos, std::vector<std::complex<double>>& x,
                            std::complex<double> level) {
    for (const auto& s : sos) {
        std::complex<double> z2 = (s.b2 - s.a2) * level;
        std::complex<double> z1 = (s.b1 - s.a1) * level + z2;
        for (auto& v : x) {
            const std::complex<double> in = v;
            const std::complex<double> y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace detail

/// Zero-phase forward-backward filtering with odd-extension padding.
inline std::vector<std::complex<double>> filtfilt(std::span<const Biquad> sos,
                                                  std::span<const std::complex<double>> x) {
    const std::size_t n = x.size();
    if (n < 2) return {x.begin(), x.end()};
    const std::size_t pad = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);

    std::vector<std::complex<double>> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    detail::sosfilt_inplace(sos, ext, ext.front());
    std::reverse(ext.begin(), ext.end());
    detail::sosfilt_inplace(sos, ext, ext.front());
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline constexpr int decimation_filter_order = 8;
inline constexpr double decimation_ripple_db = 0.05;

inline std::vector<Biquad> decimation_filter(int factor) {
    return cheby1_lowpass(decimation_filter_order, decimation_ripple_db, 0.8 / factor);
}

/// Anti-alias low-pass (8th-order Chebyshev I, zero-phase) then keep every
/// `factor`-th sample.
template <typename T>
IqFrame<T> decimate(const IqFrame<T>& frame, int factor) {
    if (factor < 2) throw invalid_input("decimate: factor must be >= 2");
    const auto q = static_cast<std::size_t>(factor);
    if (frame.length() == 0 || frame.length() % q != 0)
        throw invalid_input("decimate: frame length " + std::to_string(frame.length()) +
                            " not divisible by " + std::to_string(factor));

    std::vector<std::complex<double>> x(frame.length());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = {frame.samples[i].real(), frame.samples[i].imag()};
    const auto sos = decimation_filter(factor);
    const auto y = filtfilt(sos, x);

    IqFrame<T> out;
    out.sample_rate_hz = frame.sample_rate_hz / factor;
    out.samples.resize(frame.length() / q);
    for (std::size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = {static_cast<T>(y[i * q].real()), static_cast<T>(y[i * q].imag())};
    return out;
}

// ---------------------------------------------------------------------------
// Energy and bursts

/// Centered moving average of |x|^2; near the edges the window is truncated
/// and the average runs over the samples that exist.
template <typename T>
std::vector<double> smoothed_energy(const IqFrame<T>& frame, std::size_t window) {
    if (window < 1) throw invalid_input("smoothed_energy: window must be >= 1");
    const std::size_t n = frame.length();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<double>(std::norm(frame.samples[i]));

    const std::size_t before = (window - 1) / 2;
    const std::size_t after = window - 1 - before;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= before ? i - before : 0;
        const std::size_t hi = std::min(n, i + after + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

template <typename T>
double peak_smoothed_energy(const IqFrame<T>& frame, std::size_t window = default_smooth_window) {
    const auto e = smoothed_energy(frame, window);
    return e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
}

/// Maximal runs where smoothed energy exceeds `rel_threshold` times the
/// frame's maximum smoothed energy. An all-zero frame yields an empty mask.
template <typename T>
BurstMask detect_bursts(const IqFrame<T>& frame, std::size_t smooth_window = default_smooth_window,
                        double rel_threshold = default_burst_threshold) {
    if (smooth_window < 1) throw invalid_input("detect_bursts: smooth_window must be >= 1");
    if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
        throw invalid_input("detect_bursts: rel_threshold must lie in (0, 1)");

    BurstMask mask;
    mask.frame_length = frame.length();
    const auto e = smoothed_energy(frame, smooth_window);
    if (e.empty()) return mask;
    const double peak = *std::max_element(e.begin(), e.end());
    const double thr = rel_threshold * peak;

    std::size_t i = 0;
    while (i < e.size()) {
        if (e[i] > thr) {
            std::size_t j = i;
            while (j < e.size() && e[j] > thr) ++j;
            mask.intervals.push_back({i, j});
            i = j;
        } else {
            ++i;
        }
    }
    return mask;
}

/// Segment selection against the recording-wide average energy.
inline bool segment_has_burst(double segment_energy, double recording_mean_energy,
                              double factor = segment_select_factor) {
    if (!(recording_mean_energy > 0.0)) throw invalid_input("segment_has_burst: mean energy must be positive");
    return segment_energy > factor * recording_mean_energy;
}

template <typename T>
double mean_power(const IqFrame<T>& frame) {
    if (frame.length() == 0) return 0.0;
    double acc = 0.0;
    for (const auto& z : frame.samples) acc += static_cast<double>(std::norm(z));
    return acc / static_cast<double>(frame.length());
}

template <typename T>
double masked_mean_power(const IqFrame<T>& frame, const BurstMask& mask) {
    double acc = 0.0;
    std::size_t m = 0;
    for (const auto& iv : mask.intervals) {
        for (std::size_t i = iv.start; i < iv.end; ++i) acc += static_cast<double>(std::norm(frame.samples[i]));
        m += iv.size();
    }
    return m == 0 ? 0.0 : acc / static_cast<double>(m);
}

namespace detail {

template <typename T>
IqFrame<T> scaled(const IqFrame<T>& frame, double gain) {
    IqFrame<T> out;
    out.sample_rate_hz = frame.sample_rate_hz;
    out.samples.resize(frame.length());
    for (std::size_t i = 0; i < frame.length(); ++i) {
        const auto& z = frame.samples[i];
        out.samples[i] = {static_cast<T>(z.real() * gain), static_cast<T>(z.imag() * gain)};
    }
    return out;
}

}  // namespace detail

/// Scale so that the mean power over the burst samples equals 1.
template <typename T>
IqFrame<T> normalize_carrier_power(const IqFrame<T>& frame, const BurstMask& mask) {
    if (mask.frame_length != frame.length()) throw invalid_input("normalize_carrier_power: mask/frame length mismatch");
    mask.validate();
    if (mask.covered() == 0) throw degenerate_input("normalize_carrier_power: empty burst mask");
    const double p = masked_mean_power(frame, mask);
    if (!(p > 0.0)) throw degenerate_input("normalize_carrier_power: zero energy under mask");
    return detail::scaled(frame, 1.0 / std::sqrt(p));
}

/// Scale so that the whole-frame mean power equals 1.
template <typename T>
IqFrame<T> normalize_mean_power(const IqFrame<T>& frame) {
    const double p = mean_power(frame);
    if (!(p > 0.0)) throw degenerate_input("normalize_mean_power: frame has no energy");
    return detail::scaled(frame, 1.0 / std::sqrt(p));
}

/// y = (sqrt(k) * signal + noise) / sqrt(k + 1), k = 10^(snr/10).
template <typename T>
IqFrame<T> mix_at_snr(const IqFrame<T>& signal, const IqFrame<T>& noise, SnrSpec spec) {
    if (signal.length() != noise.length()) throw invalid_input("mix_at_snr: length mismatch");
    if (signal.sample_rate_hz != noise.sample_rate_hz) throw invalid_input("mix_at_snr: sample rate mismatch");
    const double k = spec.k_factor();
    const T sk = static_cast<T>(std::sqrt(k));
    const T denom = static_cast<T>(std::sqrt(k + 1.0));

    IqFrame<T> out;
    out.sample_rate_hz = signal.sample_rate_hz;
    out.samples.resize(signal.length());
    for (std::size_t i = 0; i < signal.length(); ++i) out.samples[i] = (sk * signal.samples[i] + noise.samples[i]) / denom;
    return out;
}

}  // namespace rfdet
