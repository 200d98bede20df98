#pragma once

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mito/backbones/convseg.hpp"
#include "mito/classifier/scorer.hpp"
#include "mito/core/geometry.hpp"
#include "mito/nn/layers.hpp"
#include "mito/nn/optim.hpp"
#include "mito/nn/serialize.hpp"
#include "mito/nn/tensor.hpp"

namespace mito::backbones {

/// Pretrained feature-extractor contract for classifier members. Production
/// members put an ImageNet-pretrained trunk here; the artifact ships two
/// small distinct convolutional families as stand-ins.
class FeatureBackbone {
public:
    virtual ~FeatureBackbone() = default;
    virtual nn::Tensor forward(const nn::Tensor& x, bool training) = 0;
    virtual nn::Tensor backward(const nn::Tensor& dy) = 0;
    virtual void zero_grad() = 0;
    virtual void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) = 0;
    virtual int out_channels() const = 0;
    virtual int downsample() const = 0;
    virtual std::string family() const = 0;
};

/// "resnet" member slot: two strided 3x3 convolutions.
class TinyConvA : public FeatureBackbone {
public:
    explicit TinyConvA(int width = 12, std::uint64_t seed = 0) : width_(width) {
        Rng rng(seed);
        net_.add("backbone", std::make_unique<nn::Conv2d>(3, width, 3, 2, 1, rng.derive("a1")));
        net_.add("backbone", std::make_unique<nn::ReLU>());
        net_.add("backbone", std::make_unique<nn::Conv2d>(width, width, 3, 2, 1, rng.derive("a2")));
        net_.add("backbone", std::make_unique<nn::ReLU>());
    }
    nn::Tensor forward(const nn::Tensor& x, bool training) override {
        return net_.forward(x, training);
    }
    nn::Tensor backward(const nn::Tensor& dy) override { return net_.backward(dy); }
    void zero_grad() override { net_.zero_grad(); }
    void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) override {
        net_.collect(params, buffers);
    }
    int out_channels() const override { return width_; }
    int downsample() const override { return 4; }
    std::string family() const override { return "resnet"; }

private:
    int width_;
    nn::Sequential net_;
};

/// "densenet" member slot: wider 5x5 stem and a growing channel stack, so the
/// two families are architecturally distinct behind the same contract.
class TinyConvB : public FeatureBackbone {
public:
    explicit TinyConvB(int width = 10, std::uint64_t seed = 0) : width_(width) {
        Rng rng(seed);
        net_.add("backbone", std::make_unique<nn::Conv2d>(3, width, 5, 2, 2, rng.derive("b1")));
        net_.add("backbone", std::make_unique<nn::ReLU>());
        net_.add("backbone", std::make_unique<nn::Conv2d>(width, width + 4, 3, 1, 1, rng.derive("b2")));
        net_.add("backbone", std::make_unique<nn::ReLU>());
        net_.add("backbone",
                 std::make_unique<nn::Conv2d>(width + 4, width + 4, 3, 2, 1, rng.derive("b3")));
        net_.add("backbone", std::make_unique<nn::ReLU>());
    }
    nn::Tensor forward(const nn::Tensor& x, bool training) override {
        return net_.forward(x, training);
    }
    nn::Tensor backward(const nn::Tensor& dy) override { return net_.backward(dy); }
    void zero_grad() override { net_.zero_grad(); }
    void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) override {
        net_.collect(params, buffers);
    }
    int out_channels() const override { return width_ + 4; }
    int downsample() const override { return 4; }
    std::string family() const override { return "densenet"; }

private:
    int width_;
    nn::Sequential net_;
};

inline std::unique_ptr<FeatureBackbone> make_feature_backbone(const std::string& family,
                                                              int width, std::uint64_t seed) {
    if (family == "resnet") return std::make_unique<TinyConvA>(width, seed);
    if (family == "densenet") return std::make_unique<TinyConvB>(width, seed);
    throw std::invalid_argument("make_feature_backbone: unknown member family \"" + family +
                                "\" (expected resnet or densenet)");
}

/// One ensemble member: feature backbone plus the classification head of
/// 3 blocks of convolutions with ReLU, batch normalization and dropout 0.5,
/// followed by a fully connected layer to a single logit.
class ClassifierMember : public classifier::PatchScorer {
public:
    ClassifierMember(const std::string& family, int input_size, int backbone_width,
                     int head_channels, std::uint64_t seed, double dropout = 0.5)
        : family_(family), input_size_(input_size), backbone_width_(backbone_width),
          head_channels_(head_channels) {
        Rng rng(seed);
        backbone_ = make_feature_backbone(family, backbone_width, rng.derive("backbone").seed());
        if (input_size % backbone_->downsample() != 0) {
            throw std::invalid_argument("ClassifierMember: input size must be divisible by " +
                                        std::to_string(backbone_->downsample()));
        }
        const int spatial = input_size / backbone_->downsample();
        int in_c = backbone_->out_channels();
        for (int b = 0; b < 3; ++b) {
            const std::string tag = "head";
            head_.add(tag, std::make_unique<nn::Conv2d>(in_c, head_channels, 3, 1, 1,
                                                        rng.derive("hc" + std::to_string(b))));
            head_.add(tag, std::make_unique<nn::ReLU>());
            head_.add(tag, std::make_unique<nn::BatchNorm2d>(head_channels));
            head_.add(tag, std::make_unique<nn::Dropout>(static_cast<float>(dropout),
                                                         rng.derive("hd" + std::to_string(b))));
            in_c = head_channels;
        }
        head_.add("head", std::make_unique<nn::Linear>(head_channels * spatial * spatial, 1,
                                                       rng.derive("fc")));
        backbone_->collect(params_, buffers_);
        head_.collect(params_, buffers_);

        const auto cached = pretrained_cache_dir() / ("classifier_" + family + ".weights");
        if (std::filesystem::exists(cached)) {
            std::vector<nn::ParamRef> bp, bb;
            backbone_->collect(bp, bb);
            nn::load_weights(cached, bp, bb);
            std::cerr << "[classifier] loaded pretrained " << family << " trunk from " << cached
                      << "\n";
        }
    }

    /// Single scalar logit per sample.
    nn::Tensor forward_logits(const nn::Tensor& x, bool training) {
        if (x.h != input_size_ || x.w != input_size_) {
            throw std::invalid_argument("ClassifierMember: input must be " +
                                        std::to_string(input_size_) + "px square");
        }
        return head_.forward(backbone_->forward(x, training), training);
    }

    void backward(const nn::Tensor& dlogits, bool into_backbone) {
        const nn::Tensor dfeat = head_.backward(dlogits);
        if (into_backbone) backbone_->backward(dfeat);
    }

    void zero_grad() {
        backbone_->zero_grad();
        head_.zero_grad();
    }

    std::vector<nn::ParamRef>& params() { return params_; }
    std::vector<nn::ParamRef>& buffers() { return buffers_; }

    /// Flat snapshot of backbone parameters (freezing contract checks).
    std::vector<float> backbone_parameters() const {
        std::vector<float> out;
        for (const auto& p : params_) {
            if (p.name.rfind("backbone.", 0) == 0) {
                out.insert(out.end(), p.value->begin(), p.value->end());
            }
        }
        return out;
    }

    /// Inference probability for one centroid patch (resized internally).
    double prob(const ImageU8& patch) const override {
        auto* self = const_cast<ClassifierMember*>(this);
        const ImageU8 sized = patch.width() == input_size_ ? patch
                                                           : resize_patch(patch, input_size_);
        const nn::Tensor logit = self->forward_logits(nn::tensor_from_image(sized), false);
        return 1.0 / (1.0 + std::exp(-static_cast<double>(logit.at(0, 0, 0, 0))));
    }

    const std::string& family() const { return family_; }
    int input_size() const { return input_size_; }
    int backbone_width() const { return backbone_width_; }
    int head_channels() const { return head_channels_; }

    void save(const std::filesystem::path& path) { nn::save_weights(path, params_, buffers_); }
    void load(const std::filesystem::path& path) { nn::load_weights(path, params_, buffers_); }

private:
    std::string family_;
    int input_size_;
    int backbone_width_;
    int head_channels_;
    std::unique_ptr<FeatureBackbone> backbone_;
    nn::Sequential head_;
    std::vector<nn::ParamRef> params_, buffers_;
};

}  // namespace mito::backbones
