#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mito/domaingan/generator.hpp"
#include "mito/nn/layers.hpp"
#include "mito/nn/serialize.hpp"
#include "mito/nn/tensor.hpp"

namespace mito::gan {

namespace detail {

inline ImageF32 image_from_tensor3(const nn::Tensor& t) {
    ImageF32 out(t.w, t.h, t.c);
    for (int c = 0; c < t.c; ++c) {
        for (int y = 0; y < t.h; ++y) {
            for (int x = 0; x < t.w; ++x) out.at(x, y, c) = t.at(0, c, y, x);
        }
    }
    return out;
}

}  // namespace detail

/// Reference generator backbone: a per-pixel color network (1x1 convolutions
/// only), making the bounded residual literally a color change. The output
/// layer is initialized small so training starts near the identity transform.
class ColorNetBackbone : public ImageToImageBackbone {
public:
    explicit ColorNetBackbone(int width = 8, std::uint64_t seed = 0) : width_(width) {
        Rng rng(seed);
        net_.add("g", std::make_unique<nn::Conv2d>(3, width, 1, 1, 0, rng.derive("g1")));
        net_.add("g", std::make_unique<nn::ReLU>());
        net_.add("g", std::make_unique<nn::Conv2d>(width, 3, 1, 1, 0, rng.derive("g2"), 0.05));
    }

    ImageF32 forward(const ImageF32& input) const override {
        nn::Sequential& net = const_cast<nn::Sequential&>(net_);
        return detail::image_from_tensor3(net.forward(nn::tensor_from_image(input), false));
    }

    std::string arch() const override { return "colornet" + std::to_string(width_); }
    int width() const { return width_; }

    nn::Tensor forward_train(const nn::Tensor& x) { return net_.forward(x, true); }
    nn::Tensor backward(const nn::Tensor& dy) { return net_.backward(dy); }
    void zero_grad() { net_.zero_grad(); }

    void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) {
        net_.collect(params, buffers);
    }

    void save(const std::filesystem::path& path) {
        std::vector<nn::ParamRef> params, buffers;
        net_.collect(params, buffers);
        nn::save_weights(path, params, buffers);
    }

    void load(const std::filesystem::path& path) {
        std::vector<nn::ParamRef> params, buffers;
        net_.collect(params, buffers);
        nn::load_weights(path, params, buffers);
    }

private:
    int width_;
    nn::Sequential net_;
};

inline std::shared_ptr<ColorNetBackbone> make_gan_backbone(const std::string& arch,
                                                           std::uint64_t seed = 0) {
    if (arch.rfind("colornet", 0) == 0) {
        const int width = std::stoi(arch.substr(8));
        return std::make_shared<ColorNetBackbone>(width, seed);
    }
    throw std::runtime_error("make_gan_backbone: unknown architecture \"" + arch + "\"");
}

/// Least-squares discriminator over small patches: two strided convolutions,
/// global average pooling and a linear head to one score per sample.
class PatchDiscriminator {
public:
    explicit PatchDiscriminator(int width = 8, std::uint64_t seed = 0) {
        Rng rng(seed);
        net_.add("d", std::make_unique<nn::Conv2d>(3, width, 3, 2, 1, rng.derive("d1")));
        net_.add("d", std::make_unique<nn::ReLU>());
        net_.add("d", std::make_unique<nn::Conv2d>(width, width, 3, 2, 1, rng.derive("d2")));
        net_.add("d", std::make_unique<nn::ReLU>());
        net_.add("d", std::make_unique<nn::GlobalAvgPool>());
        net_.add("d", std::make_unique<nn::Linear>(width, 1, rng.derive("d3")));
    }

    nn::Tensor forward(const nn::Tensor& x, bool training) { return net_.forward(x, training); }
    nn::Tensor backward(const nn::Tensor& dy) { return net_.backward(dy); }
    void zero_grad() { net_.zero_grad(); }

    void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) {
        net_.collect(params, buffers);
    }

private:
    nn::Sequential net_;
};

}  // namespace mito::gan
