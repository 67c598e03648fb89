// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "rfdet/errors.hpp"
#include "rfdet/sigcore.hpp"

namespace rfdet {

namespace detail {

template <typename T>
struct fftw_api;

template <>
struct fftw_api<double> {
    using plan = fftw_plan;
    using complex = fftw_complex;
    static plan make(int n, complex* in, complex* out) {
        return fftw_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    static void execute(plan p, complex* in, complex* out) { fftw_execute_dft(p, in, out); }
    static void destroy(plan p) { fftw_destroy_plan(p); }
};

template <>
struct fftw_api<float> {
    using plan = fftwf_plan;
    using complex = fftwf_complex;
    static plan make(int n, complex* in, complex* out) {
        return fftwf_plan_dft_1d(n, in, out, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    static void execute(plan p, complex* in, complex* out) { fftwf_execute_dft(p, in, out); }
    static void destroy(plan p) { fftwf_destroy_plan(p); }
};

/// Process-wide cache of forward plans keyed by length. Planning is
/// serialized (FFTW's planner is not thread-safe); execution is not.
template <typename T>
class fft_plan_cache {
public:
    using api = fftw_api<T>;

    static fft_plan_cache& instance() {
        static fft_plan_cache cache;
        return cache;
    }

    typename api::plan get(int n) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        std::vector<std::complex<T>> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        auto p = api::make(n, reinterpret_cast<typename api::complex*>(a.data()),
                           reinterpret_cast<typename api::complex*>(b.data()));
        plans_.emplace(n, p);
        return p;
    }

    ~fft_plan_cache() {
        for (auto& [n, p] : plans_) api::destroy(p);
    }

private:
    fft_plan_cache() = default;
    std::mutex mutex_;
    std::map<int, typename api::plan> plans_;
};

}  // namespace detail

/// Unnormalized forward DFT, out[k] = sum_n in[n] exp(-2 pi i k n / N).
template <typename T>
void fft_forward(std::span<const std::complex<T>> in, std::span<std::complex<T>> out) {
    if (in.size() != out.size()) throw invalid_input("fft_forward: size mismatch");
    using api = detail::fftw_api<T>;
    auto plan = detail::fft_plan_cache<T>::instance().get(static_cast<int>(in.size()));
    // FFTW does not write through `in` for out-of-place complex transforms.
    api::execute(plan, reinterpret_cast<typename api::complex*>(const_cast<std::complex<T>*>(in.data())),
                 reinterpret_cast<typename api::complex*>(out.data()));
}

/// Two real planes [2 x S x C]: plane 0 holds Re, plane 1 holds Im; row b is a
/// frequency bin (DC-centered), column j a time segment.
template <typename T = float>
struct Spectrogram {
    std::size_t segment_length = 0;  // S
    std::size_t columns = 0;         // C
    std::vector<T> planes;

    Spectrogram() = default;
    Spectrogram(std::size_t s, std::size_t c) : segment_length(s), columns(c), planes(2 * s * c, T(0)) {}

    std::size_t plane_size() const noexcept { return segment_length * columns; }

    T& at(std::size_t plane, std::size_t bin, std::size_t col) {
        return planes[(plane * segment_length + bin) * columns + col];
    }
    const T& at(std::size_t plane, std::size_t bin, std::size_t col) const {
        return planes[(plane * segment_length + bin) * columns + col];
    }

    std::complex<T> value(std::size_t bin, std::size_t col) const { return {at(0, bin, col), at(1, bin, col)}; }

    std::span<T> plane(std::size_t p) { return {planes.data() + p * plane_size(), plane_size()}; }
    std::span<const T> plane(std::size_t p) const { return {planes.data() + p * plane_size(), plane_size()}; }

    friend bool operator==(const Spectrogram&, const Spectrogram&) = default;
};

/// Consecutive non-overlapping FFTs of length S with unitary scaling,
/// rectangular window and bins reordered so row 0 is the most negative frequency.
template <typename T>
Spectrogram<T> complex_spectrogram(const IqFrame<T>& frame, std::size_t segment_length) {
    const std::size_t s = segment_length;
    if (s < 2 || (s & (s - 1)) != 0) throw invalid_input("complex_spectrogram: segment length must be a power of two");
    if (frame.length() == 0 || frame.length() % s != 0)
        throw invalid_input("complex_spectrogram: frame length not divisible by segment length");

    const std::size_t cols = frame.length() / s;
    Spectrogram<T> out(s, cols);
    std::vector<std::complex<T>> bins(s);
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(s)));
    for (std::size_t j = 0; j < cols; ++j) {
        fft_forward<T>(std::span<const std::complex<T>>(frame.samples.data() + j * s, s), bins);
        for (std::size_t b = 0; b < s; ++b) {
            const auto v = bins[(b + s / 2) % s] * scale;
            out.at(0, b, j) = v.real();
            out.at(1, b, j) = v.imag();
        }
    }
    return out;
}

/// Row-major [S x C] matrix.
struct PowerImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline constexpr double default_log_epsilon = 1e-12;

/// log10(|X| + epsilon) per bin; for plotting only.
template <typename T>
PowerImage log_power(const Spectrogram<T>& spec, double epsilon = default_log_epsilon) {
    if (!(epsilon > 0.0)) throw invalid_input("log_power: epsilon must be positive");
    PowerImage img{spec.segment_length, spec.columns, std::vector<double>(spec.plane_size())};
    for (std::size_t b = 0; b < spec.segment_length; ++b)
        for (std::size_t j = 0; j < spec.columns; ++j) {
            const double re = spec.at(0, b, j);
            const double im = spec.at(1, b, j);
            img.values[b * spec.columns + j] = std::log10(std::sqrt(re * re + im * im) + epsilon);
        }
    return img;
}

/// Per-plane mean and standard deviation.
struct PlaneStats {
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> stddev{1.0, 1.0};

    friend bool operator==(const PlaneStats&, const PlaneStats&) = default;
};

/// Population moments per plane over a set of spectrograms, accumulated in
/// double in index order.
template <typename T, typename Range>
PlaneStats compute_plane_stats(const Range& spectrograms) {
    std::array<double, 2> sum{0.0, 0.0}, sq{0.0, 0.0};
    double count = 0.0;
    for (const Spectrogram<T>& s : spectrograms) {
        for (std::size_t p = 0; p < 2; ++p)
            for (T v : s.plane(p)) {
                sum[p] += v;
                sq[p] += static_cast<double>(v) * v;
            }
        count += static_cast<double>(s.plane_size());
    }
    PlaneStats st;
    if (count == 0.0) return st;
    for (std::size_t p = 0; p < 2; ++p) {
        st.mean[p] = sum[p] / count;
        st.stddev[p] = std::sqrt(std::max(0.0, sq[p] / count - st.mean[p] * st.mean[p]));
    }
    return st;
}

template <typename T>
Spectrogram<T> input_standardize(const Spectrogram<T>& spec, const PlaneStats& stats) {
    for (double s : stats.stddev)
        if (!(s > 0.0)) throw degenerate_input("input_standardize: zero standard deviation");
    Spectrogram<T> out = spec;
    for (std::size_t p = 0; p < 2; ++p) {
        const double m = stats.mean[p];
        const double inv = 1.0 / stats.stddev[p];
        for (auto& v : out.plane(p)) v = static_cast<T>((v - m) * inv);
    }
    return out;
}

}  // namespace rfdet
