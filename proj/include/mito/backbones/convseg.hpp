#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mito/bootstrap/bootstrap.hpp"
#include "mito/bootstrap/boxes.hpp"
#include "mito/detector/backbone.hpp"
#include "mito/nn/layers.hpp"
#include "mito/nn/optim.hpp"
#include "mito/nn/serialize.hpp"
#include "mito/nn/tensor.hpp"

namespace mito::backbones {

/// Pretrained-weight cache directory (MITOCASCADE_CACHE env var, defaulting
/// to ~/.cache/mitocascade). Reference backbones look here for weights and
/// fall back to seeded random init when nothing is cached.
inline std::filesystem::path pretrained_cache_dir() {
    if (const char* env = std::getenv("MITOCASCADE_CACHE")) {
        return std::filesystem::path(env);
    }
    if (const char* home = std::getenv("HOME")) {
        return std::filesystem::path(home) / ".cache" / "mitocascade";
    }
    return std::filesystem::path(".mitocascade_cache");
}

/// Small per-pixel segmentation network shared by the detector reference and
/// the bootstrap segmenter: three convolutional blocks producing a logit map
/// at input resolution.
class ConvSegNet {
public:
    explicit ConvSegNet(int width = 8, std::uint64_t seed = 0) : width_(width) {
        Rng rng(seed);
        net_.add("conv1", std::make_unique<nn::Conv2d>(3, width, 3, 1, 1, rng.derive("c1")));
        net_.add("conv1", std::make_unique<nn::ReLU>());
        net_.add("conv2", std::make_unique<nn::Conv2d>(width, width, 3, 1, 1, rng.derive("c2")));
        net_.add("conv2", std::make_unique<nn::ReLU>());
        net_.add("conv3", std::make_unique<nn::Conv2d>(width, 1, 1, 1, 0, rng.derive("c3")));
    }

    int width() const { return width_; }
    std::vector<std::string> blocks() const { return net_.block_names(); }

    nn::Tensor forward_logits(const nn::Tensor& x, bool training) {
        return net_.forward(x, training);
    }

    nn::Tensor backward(const nn::Tensor& dy) { return net_.backward(dy); }
    void zero_grad() { net_.zero_grad(); }

    void collect(std::vector<nn::ParamRef>& params, std::vector<nn::ParamRef>& buffers) {
        net_.collect(params, buffers);
    }

    /// Inference probability map; write-free and safe to share across threads.
    ImageF32 predict_probs(const ImageU8& raster) const {
        nn::Sequential& net = const_cast<nn::Sequential&>(net_);
        const nn::Tensor logits = net.forward(nn::tensor_from_image(raster), false);
        ImageF32 out(raster.width(), raster.height(), 1);
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                out.at(x, y) = 1.f / (1.f + std::exp(-logits.at(0, 0, y, x)));
            }
        }
        return out;
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

namespace detail {

/// Pixel-wise binary cross-entropy with logits; positives are up-weighted to
/// balance the heavy background majority. Returns the loss and writes the
/// gradient map.
inline double bce_with_logits(const nn::Tensor& logits, const ImageF32& target,
                              double pos_weight, nn::Tensor& dlogits) {
    dlogits = logits;
    double loss = 0.0;
    double weight_total = 0.0;
    const int h = logits.h, w = logits.w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double t = target.at(x, y);
            weight_total += t > 0.5 ? pos_weight : 1.0;
        }
    }
    const double inv = 1.0 / weight_total;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double z = logits.at(0, 0, y, x);
            const double t = target.at(x, y);
            const double wgt = (t > 0.5 ? pos_weight : 1.0) * inv;
            const double p = 1.0 / (1.0 + std::exp(-z));
            loss += wgt * (std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z))));
            dlogits.at(0, 0, y, x) = static_cast<float>(wgt * (p - t));
        }
    }
    return loss;
}

/// Target map for detector training: the inscribed ellipse of each box.
inline ImageF32 boxes_to_target(int size, const std::vector<BoundingBox>& boxes) {
    ImageF32 target(size, size, 1, 0.f);
    for (const auto& box : boxes) {
        const double cx = (box.x0 + box.x1) / 2.0, cy = (box.y0 + box.y1) / 2.0;
        const double rx = std::max(1.0, box.width() / 2.0);
        const double ry = std::max(1.0, box.height() / 2.0);
        const int x0 = std::max(0, static_cast<int>(std::floor(box.x0)));
        const int x1 = std::min(size, static_cast<int>(std::ceil(box.x1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(box.y0)));
        const int y1 = std::min(size, static_cast<int>(std::ceil(box.y1)));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const double dx = (x + 0.5 - cx) / rx;
                const double dy = (y + 0.5 - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) target.at(x, y) = 1.f;
            }
        }
    }
    return target;
}

}  // namespace detail

struct ConvSegDetectorConfig {
    int width = 8;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double proposal_threshold = 0.5;  // probability forming candidate components
    int min_component_area = 3;
    double pos_weight = 12.0;
    std::uint64_t seed = 0;
};

/// Reference detector: segmentation map -> connected components -> proposals
/// scored by peak probability, with the component's soft mask attached.
class ConvSegDetector : public detector::DetectorBackbone {
public:
    explicit ConvSegDetector(const ConvSegDetectorConfig& cfg = {})
        : cfg_(cfg), net_(cfg.width, cfg.seed), sgd_(cfg.momentum, cfg.weight_decay) {
        net_.collect(params_, buffers_);
        trainable_ = nn::trainable_all();
        const auto cached = pretrained_cache_dir() / (id() + ".weights");
        if (std::filesystem::exists(cached)) {
            net_.load(cached);
            std::cerr << "[detector] loaded pretrained weights from " << cached << "\n";
        }
    }

    std::vector<detector::Proposal> propose(const ImageU8& raster) const override {
        const ImageF32 probs = net_.predict_probs(raster);
        std::vector<detector::Proposal> proposals;

        const int w = probs.width(), h = probs.height();
        std::vector<int> label(static_cast<std::size_t>(w) * h, 0);
        std::vector<std::pair<int, int>> stack;
        int next_label = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (probs.at(x, y) < cfg_.proposal_threshold ||
                    label[static_cast<std::size_t>(y) * w + x] != 0) {
                    continue;
                }
                ++next_label;
                stack.clear();
                stack.emplace_back(x, y);
                label[static_cast<std::size_t>(y) * w + x] = next_label;
                int x0 = x, y0 = y, x1 = x, y1 = y, area = 0;
                float peak = 0.f;
                std::vector<std::pair<int, int>> members;
                while (!stack.empty()) {
                    const auto [cx, cy] = stack.back();
                    stack.pop_back();
                    members.emplace_back(cx, cy);
                    ++area;
                    peak = std::max(peak, probs.at(cx, cy));
                    x0 = std::min(x0, cx);
                    y0 = std::min(y0, cy);
                    x1 = std::max(x1, cx);
                    y1 = std::max(y1, cy);
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = cx + dx, ny = cy + dy;
                            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) {
                                continue;
                            }
                            auto& l = label[static_cast<std::size_t>(ny) * w + nx];
                            if (l != 0 || probs.at(nx, ny) < cfg_.proposal_threshold) continue;
                            l = next_label;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
                if (area < cfg_.min_component_area) continue;
                detector::Proposal p;
                p.box = BoundingBox(x0, y0, x1 + 1, y1 + 1);
                p.score = peak;
                ImageF32 mask(x1 - x0 + 1, y1 - y0 + 1, 1, 0.f);
                for (const auto& [mx, my] : members) {
                    mask.at(mx - x0, my - y0) = probs.at(mx, my);
                }
                p.mask = std::move(mask);
                proposals.push_back(std::move(p));
            }
        }
        std::sort(proposals.begin(), proposals.end(),
                  [](const detector::Proposal& a, const detector::Proposal& b) {
                      if (a.score != b.score) return a.score > b.score;
                      if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
                      return a.box.x0 < b.box.x0;
                  });
        return proposals;
    }

    std::vector<std::string> parameter_blocks() const override { return net_.blocks(); }

    void set_trainable(const std::vector<std::string>& blocks) override {
        trainable_ = nn::trainable_blocks(blocks);
    }

    std::vector<float> block_parameters(const std::string& block) const override {
        std::vector<float> out;
        for (const auto& p : params_) {
            if (p.name.rfind(block + ".", 0) == 0) {
                out.insert(out.end(), p.value->begin(), p.value->end());
            }
        }
        if (out.empty()) {
            throw std::invalid_argument("ConvSegDetector: unknown block " + block);
        }
        return out;
    }

    double train_step(const ImageU8& patch, const std::vector<BoundingBox>& boxes,
                      double lr) override {
        if (patch.width() != patch.height()) {
            throw std::invalid_argument("ConvSegDetector: training patches must be square");
        }
        const ImageF32 target = detail::boxes_to_target(patch.width(), boxes);
        net_.zero_grad();
        const nn::Tensor logits = net_.forward_logits(nn::tensor_from_image(patch), true);
        nn::Tensor dlogits;
        const double loss = detail::bce_with_logits(logits, target, cfg_.pos_weight, dlogits);
        net_.backward(dlogits);
        sgd_.step(params_, lr, trainable_);
        return loss;
    }

    void save(const std::filesystem::path& path) override { net_.save(path); }
    void load(const std::filesystem::path& path) override { net_.load(path); }
    std::string id() const override { return "convseg" + std::to_string(cfg_.width); }

private:
    ConvSegDetectorConfig cfg_;
    ConvSegNet net_;
    nn::Sgd sgd_;
    std::vector<nn::ParamRef> params_, buffers_;
    nn::TrainableFilter trainable_;
};

/// Backbone registry keyed by the checkpoint sidecar's id string.
inline std::unique_ptr<detector::DetectorBackbone> make_detector_backbone(
    const std::string& id, ConvSegDetectorConfig cfg = {}) {
    if (id.rfind("convseg", 0) == 0) {
        cfg.width = std::stoi(id.substr(7));
        return std::make_unique<ConvSegDetector>(cfg);
    }
    throw std::runtime_error("make_detector_backbone: unknown backbone id \"" + id + "\"");
}

struct ConvSegSegmenterConfig {
    int width = 8;
    int epochs = 20;
    double lr = 0.05;
    double momentum = 0.9;
    double pos_weight = 8.0;
    std::uint64_t seed = 0;
};

/// Reference bootstrap segmenter: the same ConvSegNet fit on the seed set
/// with weighted BCE.
class ConvSegSegmenter : public bootstrap::TrainableSegmentationBackbone {
public:
    explicit ConvSegSegmenter(const ConvSegSegmenterConfig& cfg = {})
        : cfg_(cfg), net_(cfg.width, cfg.seed), sgd_(cfg.momentum) {
        net_.collect(params_, buffers_);
    }

    void train(const std::vector<std::pair<ImageU8, ImageF32>>& examples) override {
        if (examples.empty()) {
            throw std::runtime_error("ConvSegSegmenter: no training examples");
        }
        Rng rng(cfg_.seed);
        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            std::vector<std::size_t> order(examples.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[rng.uniform_index(i)]);
            }
            double epoch_loss = 0.0;
            for (const std::size_t idx : order) {
                const auto& [patch, target] = examples[idx];
                net_.zero_grad();
                const nn::Tensor logits =
                    net_.forward_logits(nn::tensor_from_image(patch), true);
                nn::Tensor dlogits;
                epoch_loss +=
                    detail::bce_with_logits(logits, target, cfg_.pos_weight, dlogits);
                net_.backward(dlogits);
                sgd_.step(params_, cfg_.lr, nn::trainable_all());
            }
            if (!std::isfinite(epoch_loss)) {
                throw std::runtime_error("ConvSegSegmenter: training diverged");
            }
        }
    }

    ImageF32 predict(const ImageU8& patch) const override { return net_.predict_probs(patch); }

private:
    ConvSegSegmenterConfig cfg_;
    ConvSegNet net_;
    nn::Sgd sgd_;
    std::vector<nn::ParamRef> params_, buffers_;
};

}  // namespace mito::backbones
