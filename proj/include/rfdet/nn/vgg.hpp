// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfdet/errors.hpp"
#include "rfdet/nn/layers.hpp"
#include "rfdet/rng.hpp"

namespace rfdet::nn {

enum class VggVariant { VGG11, VGG13, VGG16, VGG19 };

inline std::string_view to_string(VggVariant v) {
    switch (v) {
        case VggVariant::VGG11: return "vgg11";
        case VggVariant::VGG13: return "vgg13";
        case VggVariant::VGG16: return "vgg16";
        case VggVariant::VGG19: return "vgg19";
    }
    return "?";
}

inline VggVariant vgg_variant_from_string(std::string_view s) {
    for (auto v : {VggVariant::VGG11, VggVariant::VGG13, VggVariant::VGG16, VggVariant::VGG19})
        if (s == to_string(v)) return v;
    throw config_error("unknown VGG variant '" + std::string(s) + "'");
}

/// Number of 3x3 conv layers in each of the five canonical stages.
inline std::array<std::size_t, 5> vgg_stage_depths(VggVariant v) {
    switch (v) {
        case VggVariant::VGG11: return {1, 1, 2, 2, 2};
        case VggVariant::VGG13: return {2, 2, 2, 2, 2};
        case VggVariant::VGG16: return {2, 2, 3, 3, 3};
        case VggVariant::VGG19: return {2, 2, 4, 4, 4};
    }
    return {};
}

/// Batch-norm VGG. `widths` selects both the stage count (first N canonical
/// stages) and their channel counts.
struct VggConfig {
    VggVariant variant = VggVariant::VGG11;
    std::vector<std::size_t> widths{8, 16, 32, 32};
    std::size_t in_channels = 2;
    std::size_t input_height = 64;
    std::size_t input_width = 64;
    std::size_t hidden = 256;
    std::size_t num_classes = 7;
    std::size_t pool_grid = 1;  // 1 = global average pooling
    double dropout = 0.0;       // before the output layer, training only

    static std::vector<std::size_t> desk_widths() { return {8, 16, 32, 32}; }
    static std::vector<std::size_t> paper_widths() { return {64, 128, 256, 512, 512}; }

    void validate() const {
        if (widths.empty() || widths.size() > 5) throw config_error("VggConfig: 1 to 5 stage widths required");
        for (auto w : widths)
            if (w == 0) throw config_error("VggConfig: zero stage width");
        if (in_channels == 0 || hidden == 0 || num_classes == 0 || pool_grid == 0)
            throw config_error("VggConfig: zero-sized dimension");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("VggConfig: dropout must lie in [0, 1)");
        const std::size_t div = (std::size_t{1} << widths.size()) * pool_grid;
        if (input_height % div || input_width % div)
            throw config_error("VggConfig: input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                               " not divisible by " + std::to_string(div));
    }

    friend bool operator==(const VggConfig&, const VggConfig&) = default;
};

inline void to_json(nlohmann::json& j, const VggConfig& c) {
    j = {{"variant", to_string(c.variant)}, {"widths", c.widths},           {"in_channels", c.in_channels},
         {"input_height", c.input_height},  {"input_width", c.input_width}, {"hidden", c.hidden},
         {"num_classes", c.num_classes},    {"pool_grid", c.pool_grid},           {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json& j, VggConfig& c) {
    c.variant = vgg_variant_from_string(j.at("variant").get<std::string>());
    c.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.input_height = j.at("input_height").get<std::size_t>();
    c.input_width = j.at("input_width").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.pool_grid = j.value("pool_grid", std::size_t{1});
    c.dropout = j.value("dropout", 0.0);
}

template <typename T>
struct ForwardResult {
    Tensor<T> logits;     // [B x classes]
    Tensor<T> embedding;  // [B x hidden], post-activation
};

template <typename T = float>
class Vgg {
public:
    explicit Vgg(VggConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const auto depths = vgg_stage_depths(cfg_.variant);
        std::size_t ch = cfg_.in_channels;
        auto rng = make_rng(seed, {0x696e6974ULL});
        for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
            for (std::size_t d = 0; d < depths[s]; ++d) {
                auto conv = std::make_unique<Conv2d<T>>(ch, cfg_.widths[s]);
                conv->init(rng);
                add_feature(std::move(conv));
                add_feature(std::make_unique<BatchNorm2d<T>>(cfg_.widths[s]));
                add_feature(std::make_unique<ReLU<T>>());
                ch = cfg_.widths[s];
            }
            add_feature(std::make_unique<MaxPool2<T>>());
        }
        pool_ = std::make_unique<AdaptiveAvgPool<T>>(cfg_.pool_grid);
        fc1_ = std::make_unique<Linear<T>>(ch * cfg_.pool_grid * cfg_.pool_grid, cfg_.hidden);
        fc1_->init(rng);
        act_ = std::make_unique<ReLU<T>>();
        drop_ = std::make_unique<Dropout<T>>(cfg_.dropout, seed);
        fc2_ = std::make_unique<Linear<T>>(cfg_.hidden, cfg_.num_classes);
        fc2_->init(rng);
    }

    Vgg(const Vgg& other) : Vgg(other.cfg_) {
        copy_params_from(other);
        drop_->set_engine(other.drop_->engine());
    }
    Vgg& operator=(const Vgg&) = delete;

    const VggConfig& config() const noexcept { return cfg_; }

    ForwardResult<T> forward_full(const Tensor<T>& x, bool train) {
        if (x.shape.size() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.input_height ||
            x.dim(3) != cfg_.input_width)
            throw invalid_input("Vgg: expected [B x " + std::to_string(cfg_.in_channels) + " x " +
                                std::to_string(cfg_.input_height) + " x " + std::to_string(cfg_.input_width) +
                                "], got " + shape_string(x.shape));
        Tensor<T> h = x;
        for (auto& l : features_) h = l->forward(h, train);
        h = pool_->forward(h, train);
        h = fc1_->forward(h, train);
        ForwardResult<T> r;
        r.embedding = act_->forward(h, train);
        r.logits = fc2_->forward(drop_->forward(r.embedding, train), train);
        return r;
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) { return forward_full(x, train).logits; }

    /// Reverse pass from d loss / d logits; returns d loss / d input.
    Tensor<T> backward(const Tensor<T>& grad_logits) {
        Tensor<T> g = fc2_->backward(grad_logits);
        g = drop_->backward(g);
        g = act_->backward(g);
        g = fc1_->backward(g);
        g = pool_->backward(g);
        for (auto it = features_.rbegin(); it != features_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    /// Parameters and buffers in a stable order with dotted names.
    std::vector<Param<T>> params() {
        std::vector<Param<T>> out;
        for (std::size_t i = 0; i < features_.size(); ++i)
            features_[i]->collect(out, "features." + std::to_string(i) + ".");
        fc1_->collect(out, "classifier.0.");
        fc2_->collect(out, "classifier.2.");
        return out;
    }

    void zero_grad() {
        for (auto& p : params())
            if (p.grad) p.grad->zero();
    }

    /// Trainable scalar count (conv/dense weights and biases, batch-norm affine).
    std::size_t num_parameters() {
        std::size_t n = 0;
        for (auto& p : params())
            if (p.trainable()) n += p.value->size();
        return n;
    }

    void copy_params_from(const Vgg& other) {
        if (!(cfg_ == other.cfg_)) throw config_error("Vgg: config mismatch in copy");
        auto dst = params();
        auto src = const_cast<Vgg&>(other).params();
        for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].value = *src[i].value;
    }

    Linear<T>& head() { return *fc2_; }

private:
    void add_feature(std::unique_ptr<Layer<T>> l) { features_.push_back(std::move(l)); }

    VggConfig cfg_;
    std::vector<std::unique_ptr<Layer<T>>> features_;
    std::unique_ptr<AdaptiveAvgPool<T>> pool_;
    std::unique_ptr<Linear<T>> fc1_;
    std::unique_ptr<ReLU<T>> act_;
    std::unique_ptr<Dropout<T>> drop_;
    std::unique_ptr<Linear<T>> fc2_;
};

}  // namespace rfdet::nn
