// SPDX-License-Identifier: Apache-2.0
#pragma once

// Layers with hand-written reverse passes. Each layer caches what its
// backward needs from the most recent forward call.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfdet/errors.hpp"
#include "rfdet/nn/tensor.hpp"
#include "rfdet/rng.hpp"

namespace rfdet::nn {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatrixRM<T>>;

/// A named parameter or buffer. Buffers (batch-norm running statistics) have
/// no gradient and are skipped by the optimizer.
template <typename T>
struct Param {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;

    bool trainable() const noexcept { return grad != nullptr; }
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
    /// Gradient w.r.t. the last forward input; parameter gradients accumulate.
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual void collect(std::vector<Param<T>>& /*out*/, const std::string& /*prefix*/) {}
    virtual std::string kind() const = 0;
};

namespace detail {

inline void expect_rank(const Shape& s, std::size_t rank, const char* who) {
    if (s.size() != rank) throw invalid_input(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " +
                                              shape_string(s));
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// 3x3 convolution, stride 1, zero padding 1. im2col + GEMM.
template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(std::size_t in_ch, std::size_t out_ch)
        : in_(in_ch), out_(out_ch), weight_({out_ch, in_ch * 9}), bias_({out_ch}),
          grad_w_({out_ch, in_ch * 9}), grad_b_({out_ch}) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        detail::expect_rank(x.shape, 4, "Conv2d");
        if (x.dim(1) != in_) throw invalid_input("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                                                 shape_string(x.shape));
        in_shape_ = x.shape;
        const std::size_t b = x.dim(0), h = x.dim(2), w = x.dim(3), hw = h * w, n = b * hw, k = in_ * 9;
        cols_.assign(k * n, T(0));
        for (std::size_t c = 0; c < in_; ++c)
            for (std::size_t ky = 0; ky < 3; ++ky)
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    T* row = cols_.data() + (c * 9 + ky * 3 + kx) * n;
                    for (std::size_t s = 0; s < b; ++s) {
                        const T* src = x.ptr() + (s * in_ + c) * hw;
                        T* dst = row + s * hw;
                        for (std::size_t y = 0; y < h; ++y) {
                            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                            const T* srow = src + static_cast<std::size_t>(sy) * w;
                            T* drow = dst + y * w;
                            const std::size_t x0 = kx == 0 ? 1 : 0;
                            const std::size_t x1 = kx == 2 ? w - 1 : w;
                            for (std::size_t xx = x0; xx < x1; ++xx) drow[xx] = srow[xx + kx - 1];
                        }
                    }
                }
        MatrixRM<T> out_mat(out_, n);
        out_mat.noalias() = CMapRM<T>(weight_.ptr(), out_, k) * CMapRM<T>(cols_.data(), k, n);

        Tensor<T> y({b, out_, h, w});
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t o = 0; o < out_; ++o) {
                const T bo = bias_[o];
                const T* src = out_mat.data() + o * n + s * hw;
                T* dst = y.ptr() + (s * out_ + o) * hw;
                for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + bo;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const std::size_t b = in_shape_[0], h = in_shape_[2], w = in_shape_[3], hw = h * w, n = b * hw, k = in_ * 9;
        MatrixRM<T> gmat(out_, n);
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t o = 0; o < out_; ++o) {
                const T* src = g.ptr() + (s * out_ + o) * hw;
                std::copy(src, src + hw, gmat.data() + o * n + s * hw);
            }
        CMapRM<T> cols(cols_.data(), k, n);
        MapRM<T>(grad_w_.ptr(), out_, k).noalias() += gmat * cols.transpose();
        for (std::size_t o = 0; o < out_; ++o) grad_b_[o] += gmat.row(static_cast<Eigen::Index>(o)).sum();

        MatrixRM<T> dcols(k, n);
        dcols.noalias() = CMapRM<T>(weight_.ptr(), out_, k).transpose() * gmat;

        Tensor<T> dx(in_shape_);
        for (std::size_t c = 0; c < in_; ++c)
            for (std::size_t ky = 0; ky < 3; ++ky)
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const T* row = dcols.data() + (c * 9 + ky * 3 + kx) * n;
                    for (std::size_t s = 0; s < b; ++s) {
                        T* dst = dx.ptr() + (s * in_ + c) * hw;
                        const T* src = row + s * hw;
                        for (std::size_t y = 0; y < h; ++y) {
                            const auto sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                            T* drow = dst + static_cast<std::size_t>(sy) * w;
                            const T* srow = src + y * w;
                            const std::size_t x0 = kx == 0 ? 1 : 0;
                            const std::size_t x1 = kx == 2 ? w - 1 : w;
                            for (std::size_t xx = x0; xx < x1; ++xx) drow[xx + kx - 1] += srow[xx];
                        }
                    }
                }
        return dx;
    }

    void collect(std::vector<Param<T>>& out, const std::string& prefix) override {
        out.push_back({prefix + "weight", &weight_, &grad_w_});
        out.push_back({prefix + "bias", &bias_, &grad_b_});
    }

    std::string kind() const override { return "conv3x3"; }

    /// He (fan-in) normal init, zero bias.
    void init(rng_engine& rng) {
        std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(in_ * 9)));
        for (auto& v : weight_.data) v = static_cast<T>(d(rng));
        bias_.zero();
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    std::size_t in_, out_;
    Tensor<T> weight_, bias_, grad_w_, grad_b_;
    Shape in_shape_;
    std::vector<T> cols_;
};

// ---------------------------------------------------------------------------

/// Per-channel batch normalization over (N, H, W). Train mode normalizes with
/// biased batch variance and updates running stats with the unbiased one.
template <typename T>
class BatchNorm2d : public Layer<T> {
public:
    explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double eps = 1e-5)
        : ch_(channels), momentum_(momentum), eps_(eps), gamma_({channels}, T(1)), beta_({channels}),
          running_mean_({channels}), running_var_({channels}, T(1)), grad_gamma_({channels}), grad_beta_({channels}) {}

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        detail::expect_rank(x.shape, 4, "BatchNorm2d");
        if (x.dim(1) != ch_) throw invalid_input("BatchNorm2d: channel mismatch " + shape_string(x.shape));
        train_ = train;
        in_shape_ = x.shape;
        const std::size_t b = x.dim(0), hw = x.dim(2) * x.dim(3);
        const double count = static_cast<double>(b * hw);
        Tensor<T> y(x.shape);
        xhat_ = Tensor<T>(x.shape);
        inv_std_.assign(ch_, 0.0);
        for (std::size_t c = 0; c < ch_; ++c) {
            double mean, var;
            if (train) {
                double s = 0.0;
                for (std::size_t n = 0; n < b; ++n) {
                    const T* p = x.ptr() + (n * ch_ + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) s += p[i];
                }
                mean = s / count;
                double sq = 0.0;
                for (std::size_t n = 0; n < b; ++n) {
                    const T* p = x.ptr() + (n * ch_ + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) sq += (p[i] - mean) * (p[i] - mean);
                }
                var = sq / count;
                const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
                running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
                running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
            } else {
                mean = running_mean_[c];
                var = running_var_[c];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[c] = inv;
            const double g = gamma_[c], be = beta_[c];
            for (std::size_t n = 0; n < b; ++n) {
                const T* p = x.ptr() + (n * ch_ + c) * hw;
                T* xh = xhat_.ptr() + (n * ch_ + c) * hw;
                T* q = y.ptr() + (n * ch_ + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double v = (p[i] - mean) * inv;
                    xh[i] = static_cast<T>(v);
                    q[i] = static_cast<T>(g * v + be);
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const std::size_t b = in_shape_[0], hw = in_shape_[2] * in_shape_[3];
        const double count = static_cast<double>(b * hw);
        Tensor<T> dx(in_shape_);
        for (std::size_t c = 0; c < ch_; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t n = 0; n < b; ++n) {
                const T* gp = g.ptr() + (n * ch_ + c) * hw;
                const T* xh = xhat_.ptr() + (n * ch_ + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_g += gp[i];
                    sum_gx += static_cast<double>(gp[i]) * xh[i];
                }
            }
            grad_beta_[c] += static_cast<T>(sum_g);
            grad_gamma_[c] += static_cast<T>(sum_gx);
            const double scale = gamma_[c] * inv_std_[c];
            for (std::size_t n = 0; n < b; ++n) {
                const T* gp = g.ptr() + (n * ch_ + c) * hw;
                const T* xh = xhat_.ptr() + (n * ch_ + c) * hw;
                T* d = dx.ptr() + (n * ch_ + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    d[i] = train_ ? static_cast<T>(scale / count * (count * gp[i] - sum_g - xh[i] * sum_gx))
                                  : static_cast<T>(scale * gp[i]);
                }
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>>& out, const std::string& prefix) override {
        out.push_back({prefix + "weight", &gamma_, &grad_gamma_});
        out.push_back({prefix + "bias", &beta_, &grad_beta_});
        out.push_back({prefix + "running_mean", &running_mean_, nullptr});
        out.push_back({prefix + "running_var", &running_var_, nullptr});
    }

    std::string kind() const override { return "batchnorm2d"; }

    /// Normalized pre-affine activations of the last forward.
    const Tensor<T>& normalized() const { return xhat_; }

private:
    std::size_t ch_;
    double momentum_, eps_;
    Tensor<T> gamma_, beta_, running_mean_, running_var_, grad_gamma_, grad_beta_;
    bool train_ = true;
    Shape in_shape_;
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        Tensor<T> y(x.shape);
        mask_.assign(x.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool on = x[i] > T(0);
            mask_[i] = on;
            y[i] = on ? x[i] : T(0);
        }
        shape_ = x.shape;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> dx(shape_);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] = mask_[i] ? g[i] : T(0);
        return dx;
    }

    std::string kind() const override { return "relu"; }

private:
    Shape shape_;
    std::vector<unsigned char> mask_;
};

// ---------------------------------------------------------------------------

/// Inverted dropout: in training, zeroes each element with probability p and
/// scales survivors by 1/(1-p); identity in eval mode.
template <typename T>
class Dropout : public Layer<T> {
public:
    explicit Dropout(double p, std::uint64_t seed = 0) : p_(p), rng_(make_rng(seed, {0x64726f70ULL})) {
        if (!(p >= 0.0 && p < 1.0)) throw invalid_input("Dropout: p must lie in [0, 1)");
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) override {
        shape_ = x.shape;
        if (!train || p_ == 0.0) {
            scale_.assign(x.size(), T(1));
            return x;
        }
        std::bernoulli_distribution keep(1.0 - p_);
        const T s = static_cast<T>(1.0 / (1.0 - p_));
        scale_.resize(x.size());
        Tensor<T> y(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i) {
            scale_[i] = keep(rng_) ? s : T(0);
            y[i] = x[i] * scale_[i];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> dx(shape_);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * scale_[i];
        return dx;
    }

    std::string kind() const override { return "dropout"; }

    double p() const noexcept { return p_; }
    const rng_engine& engine() const noexcept { return rng_; }
    void set_engine(const rng_engine& e) { rng_ = e; }

private:
    double p_;
    rng_engine rng_;
    Shape shape_;
    std::vector<T> scale_;
};

// ---------------------------------------------------------------------------

/// 2x2 max pooling, stride 2. Ties resolve to the first element in scan order.
template <typename T>
class MaxPool2 : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, bool) override {
        detail::expect_rank(x.shape, 4, "MaxPool2");
        const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h < 2 || w < 2 || h % 2 || w % 2) throw invalid_input("MaxPool2: spatial size must be even, got " +
                                                                  shape_string(x.shape));
        in_shape_ = x.shape;
        const std::size_t oh = h / 2, ow = w / 2;
        Tensor<T> y({b, c, oh, ow});
        argmax_.assign(y.size(), 0);
        for (std::size_t p = 0; p < b * c; ++p) {
            const T* src = x.ptr() + p * h * w;
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    std::size_t best = (2 * i) * w + 2 * j;
                    for (std::size_t di = 0; di < 2; ++di)
                        for (std::size_t dj = 0; dj < 2; ++dj) {
                            const std::size_t idx = (2 * i + di) * w + 2 * j + dj;
                            if (src[idx] > src[best]) best = idx;
                        }
                    const std::size_t o = p * oh * ow + i * ow + j;
                    y[o] = src[best];
                    argmax_[o] = p * h * w + best;
                }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> dx(in_shape_);
        for (std::size_t o = 0; o < g.size(); ++o) dx[argmax_[o]] += g[o];
        return dx;
    }

    std::string kind() const override { return "maxpool2"; }

private:
    Shape in_shape_;
    std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------------------

/// Average pooling onto a fixed grid x grid raster, flattened to [B, C*grid*grid].
/// grid == 1 is global average pooling.
template <typename T>
class AdaptiveAvgPool : public Layer<T> {
public:
    explicit AdaptiveAvgPool(std::size_t grid = 1) : grid_(grid) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        detail::expect_rank(x.shape, 4, "AdaptiveAvgPool");
        const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h % grid_ || w % grid_) throw invalid_input("AdaptiveAvgPool: spatial size not divisible by grid");
        in_shape_ = x.shape;
        const std::size_t ch = h / grid_, cw = w / grid_;
        const double inv = 1.0 / static_cast<double>(ch * cw);
        Tensor<T> y({b, c * grid_ * grid_});
        for (std::size_t p = 0; p < b * c; ++p) {
            const T* src = x.ptr() + p * h * w;
            for (std::size_t gi = 0; gi < grid_; ++gi)
                for (std::size_t gj = 0; gj < grid_; ++gj) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < ch; ++i)
                        for (std::size_t j = 0; j < cw; ++j) s += src[(gi * ch + i) * w + gj * cw + j];
                    y[p * grid_ * grid_ + gi * grid_ + gj] = static_cast<T>(s * inv);
                }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const std::size_t b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
        const std::size_t ch = h / grid_, cw = w / grid_;
        const T inv = static_cast<T>(1.0 / static_cast<double>(ch * cw));
        Tensor<T> dx(in_shape_);
        for (std::size_t p = 0; p < b * c; ++p) {
            T* dst = dx.ptr() + p * h * w;
            for (std::size_t gi = 0; gi < grid_; ++gi)
                for (std::size_t gj = 0; gj < grid_; ++gj) {
                    const T v = g[p * grid_ * grid_ + gi * grid_ + gj] * inv;
                    for (std::size_t i = 0; i < ch; ++i)
                        for (std::size_t j = 0; j < cw; ++j) dst[(gi * ch + i) * w + gj * cw + j] = v;
                }
        }
        return dx;
    }

    std::string kind() const override { return "avgpool"; }

private:
    std::size_t grid_;
    Shape in_shape_;
};

// ---------------------------------------------------------------------------

/// y = x W^T + b, W is [out, in].
template <typename T>
class Linear : public Layer<T> {
public:
    Linear(std::size_t in, std::size_t out)
        : in_(in), out_(out), weight_({out, in}), bias_({out}), grad_w_({out, in}), grad_b_({out}) {}

    Tensor<T> forward(const Tensor<T>& x, bool) override {
        detail::expect_rank(x.shape, 2, "Linear");
        if (x.dim(1) != in_) throw invalid_input("Linear: expected " + std::to_string(in_) + " features, got " +
                                                 shape_string(x.shape));
        input_ = x;
        const std::size_t b = x.dim(0);
        Tensor<T> y({b, out_});
        MapRM<T> ym(y.ptr(), b, out_);
        ym.noalias() = CMapRM<T>(x.ptr(), b, in_) * CMapRM<T>(weight_.ptr(), out_, in_).transpose();
        for (std::size_t s = 0; s < b; ++s)
            for (std::size_t o = 0; o < out_; ++o) y[s * out_ + o] += bias_[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const std::size_t b = input_.dim(0);
        CMapRM<T> gm(g.ptr(), b, out_);
        MapRM<T>(grad_w_.ptr(), out_, in_).noalias() += gm.transpose() * CMapRM<T>(input_.ptr(), b, in_);
        for (std::size_t o = 0; o < out_; ++o) grad_b_[o] += gm.col(static_cast<Eigen::Index>(o)).sum();
        Tensor<T> dx({b, in_});
        MapRM<T>(dx.ptr(), b, in_).noalias() = gm * CMapRM<T>(weight_.ptr(), out_, in_);
        return dx;
    }

    void collect(std::vector<Param<T>>& out, const std::string& prefix) override {
        out.push_back({prefix + "weight", &weight_, &grad_w_});
        out.push_back({prefix + "bias", &bias_, &grad_b_});
    }

    std::string kind() const override { return "linear"; }

    void init(rng_engine& rng) {
        std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(in_)));
        for (auto& v : weight_.data) v = static_cast<T>(d(rng));
        bias_.zero();
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    std::size_t in_, out_;
    Tensor<T> weight_, bias_, grad_w_, grad_b_;
    Tensor<T> input_;
};

// ---------------------------------------------------------------------------

/// Row-wise softmax, max-shifted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    detail::expect_rank(logits.shape, 2, "softmax");
    const std::size_t b = logits.dim(0), k = logits.dim(1);
    Tensor<T> p(logits.shape);
    for (std::size_t s = 0; s < b; ++s) {
        const T* z = logits.ptr() + s * k;
        const double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        for (std::size_t j = 0; j < k; ++j) p[s * k + j] = static_cast<T>(std::exp(z[j] - mx) / sum);
    }
    return p;
}

template <typename T>
struct CrossEntropy {
    double loss = 0.0;   // mean over the batch
    Tensor<T> grad;      // d loss / d logits = (softmax - onehot) / B
};

template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    detail::expect_rank(logits.shape, 2, "softmax_cross_entropy");
    const std::size_t b = logits.dim(0), k = logits.dim(1);
    if (labels.size() != b) throw invalid_input("softmax_cross_entropy: label count differs from batch size");
    CrossEntropy<T> out;
    out.grad = Tensor<T>(logits.shape);
    double total = 0.0;
    for (std::size_t s = 0; s < b; ++s) {
        const int y = labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= k) throw invalid_input("softmax_cross_entropy: label out of range");
        const T* z = logits.ptr() + s * k;
        const double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const double log_sum = mx + std::log(sum);
        total += log_sum - z[y];
        for (std::size_t j = 0; j < k; ++j) {
            const double pj = std::exp(z[j] - log_sum);
            out.grad[s * k + j] = static_cast<T>((pj - (static_cast<int>(j) == y ? 1.0 : 0.0)) / static_cast<double>(b));
        }
    }
    out.loss = total / static_cast<double>(b);
    return out;
}

}  // namespace rfdet::nn
