#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/augment/policy.hpp"
#include "mito/backbones/classifier_nets.hpp"
#include "mito/classifier/loss.hpp"
#include "mito/classifier/schedule.hpp"
#include "mito/dataio/items.hpp"
#include "mito/domaingan/sampler.hpp"
#include "mito/eval/metrics.hpp"
#include "mito/nn/optim.hpp"

namespace mito::classifier {

struct ClassifierTrainConfig {
    int batch_size = 32;
    int epochs = 100;
    double lr0 = 2e-5;                 // cosine annealing start
    double adam_beta1 = 0.9;           // "standard parameters"
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double focal_gamma = 2.0;
    double focal_alpha = 0.75;
    int unfreeze_backbone_after = 5;   // head-only epochs
    int patch_px = 80;
    int resize_to = 224;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < unfreeze_backbone_after) {
            throw std::invalid_argument(
                "ClassifierTrainConfig: epochs must be >= unfreeze_backbone_after");
        }
        if (batch_size < 1 || lr0 <= 0 || patch_px < 1 || resize_to < 1) {
            throw std::invalid_argument("ClassifierTrainConfig: invalid training parameters");
        }
    }

    nlohmann::json to_json() const {
        return {{"batch_size", batch_size}, {"epochs", epochs}, {"lr0", lr0},
                {"adam_beta1", adam_beta1}, {"adam_beta2", adam_beta2}, {"adam_eps", adam_eps},
                {"focal_gamma", focal_gamma}, {"focal_alpha", focal_alpha},
                {"unfreeze_backbone_after", unfreeze_backbone_after}, {"patch_px", patch_px},
                {"resize_to", resize_to}, {"seed", seed}};
    }
};

struct ClassifierEpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_f1 = 0.0;
    double lr = 0.0;
};

struct ClassifierTrainResult {
    int best_epoch = 0;
    double best_val_f1 = -1.0;
    std::vector<ClassifierEpochLog> history;
    bool aborted_nan = false;
};

namespace detail {

/// 80px (configurable) centroid patch -> GAN domain transfer -> tailored
/// H&E policy -> resize for the pretrained trunk.
inline ImageU8 training_patch(const Frame& frame, const Point& centroid,
                              const ClassifierTrainConfig& cfg,
                              const gan::DomainTransformSet* tset,
                              const augment::AugmentPolicy& policy, Rng& rng) {
    ImageU8 patch = extract_patch(frame, centroid, cfg.patch_px);
    if (tset && !tset->empty()) {
        patch = gan::domain_augment_patch(patch, frame.domain, *tset, rng);
    }
    patch = augment::hne_randaugment(patch, policy, rng);
    return resize_patch(patch, cfg.resize_to);
}

/// Patch-level F1 at threshold 0.5 (member-selection metric).
inline double validation_f1(backbones::ClassifierMember& member,
                            const std::vector<dataio::ClassifierItem>& items,
                            dataio::FrameStore& frames, const ClassifierTrainConfig& cfg) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& item : items) {
        const Frame& frame = frames.get(item.slide_id);
        const ImageU8 patch =
            resize_patch(extract_patch(frame, item.centroid, cfg.patch_px), cfg.resize_to);
        const bool predicted = member.prob(patch) >= 0.5;
        if (predicted && item.label == 1) ++tp;
        if (predicted && item.label == 0) ++fp;
        if (!predicted && item.label == 1) ++fn;
    }
    return eval::prf_from_counts(tp, fp, fn).f1;
}

}  // namespace detail

/// Trains one ensemble member on the challenge-provided positives and hard
/// negatives: focal loss, ADAM, cosine annealing from lr0, head-only for the
/// first unfreeze_backbone_after epochs, best-validation-F1 checkpointing.
inline ClassifierTrainResult train_member(
    const dataio::DatasetManifest& manifest, dataio::FrameStore& frames,
    const dataio::SplitAssignment& split, const ClassifierTrainConfig& cfg,
    const gan::DomainTransformSet* tset, const augment::AugmentPolicy& policy,
    backbones::ClassifierMember& member, const std::filesystem::path& checkpoint_path = {},
    const std::function<void(const ClassifierEpochLog&)>& on_epoch = {}) {
    cfg.validate();
    policy.validate();
    const auto train_items = dataio::classifier_items(manifest, split, dataio::Subset::kTrain);
    const auto val_items = dataio::classifier_items(manifest, split, dataio::Subset::kVal);
    bool any_positive = false;
    for (const auto& item : train_items) any_positive = any_positive || item.label == 1;
    if (!any_positive) {
        throw std::runtime_error("train_member: no positive training items");
    }

    Rng rng(cfg.seed);
    nn::Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    ClassifierTrainResult result;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch - 1, cfg.epochs, cfg.lr0);
        const nn::TrainableFilter filter = epoch <= cfg.unfreeze_backbone_after
                                               ? nn::trainable_blocks({"head"})
                                               : nn::trainable_all();
        const bool backbone_active = epoch > cfg.unfreeze_backbone_after;

        std::vector<std::size_t> order(train_items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }

        double loss_sum = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(),
                                             start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<nn::Tensor> inputs;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                const auto& item = train_items[order[i]];
                const Frame& frame = frames.get(item.slide_id);
                inputs.push_back(nn::tensor_from_image(
                    detail::training_patch(frame, item.centroid, cfg, tset, policy, rng)));
                labels.push_back(item.label);
            }
            const nn::Tensor batch = nn::stack(inputs);

            member.zero_grad();
            const nn::Tensor logits = member.forward_logits(batch, true);
            nn::Tensor dlogits = logits;
            double loss = 0.0;
            const double inv = 1.0 / static_cast<double>(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const double z = logits.at(static_cast<int>(i), 0, 0, 0);
                const double p = 1.0 / (1.0 + std::exp(-z));
                loss += focal_loss(p, labels[i], cfg.focal_gamma, cfg.focal_alpha) * inv;
                dlogits.at(static_cast<int>(i), 0, 0, 0) = static_cast<float>(
                    focal_loss_dlogit(p, labels[i], cfg.focal_gamma, cfg.focal_alpha) * inv);
            }
            member.backward(dlogits, backbone_active);
            adam.step(member.params(), lr, filter);
            loss_sum += loss;
            ++batches;
            if (!std::isfinite(loss)) {
                result.aborted_nan = true;
                break;
            }
        }
        if (result.aborted_nan) break;

        ClassifierEpochLog log;
        log.epoch = epoch;
        log.mean_loss = batches > 0 ? loss_sum / batches : 0.0;
        log.val_f1 = detail::validation_f1(member, val_items, frames, cfg);
        log.lr = lr;
        if (log.val_f1 > result.best_val_f1) {
            result.best_val_f1 = log.val_f1;
            result.best_epoch = epoch;
            if (!checkpoint_path.empty()) member.save(checkpoint_path);
        }
        if (on_epoch) on_epoch(log);
        result.history.push_back(log);
    }
    return result;
}

}  // namespace mito::classifier
