#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/augment/policy.hpp"
#include "mito/dataio/items.hpp"
#include "mito/detector/backbone.hpp"
#include "mito/detector/infer.hpp"
#include "mito/detector/sampling.hpp"
#include "mito/detector/schedule.hpp"
#include "mito/domaingan/sampler.hpp"
#include "mito/eval/metrics.hpp"

namespace mito::detector {

struct DetectorTrainConfig {
    int patch_size = 3000;
    int batch_size = 1;            // one patch per optimizer step
    double lr0 = 0.002;            // SGD
    double plateau_factor = 2.0;
    int plateau_patience = 5;      // epochs without PR-AUC improvement
    int warmup_epochs = 1;
    int unfrozen_blocks = 2;       // last two convolutional blocks
    int max_epochs = 200;
    double momentum = 0.9;         // paper silent; logged
    double weight_decay = 0.0;     // paper silent; logged
    double max_shear = 0.1;
    int val_tile = 512;
    int val_overlap = 64;
    double val_min_score = 0.05;
    double dedup_radius = 15.0;    // ~ half the mean box diagonal
    long steps_per_epoch = 0;      // 0: one sampled patch per training slide
    std::uint64_t seed = 0;

    void validate() const {
        if (lr0 <= 0 || plateau_factor <= 1 || plateau_patience < 1) {
            throw std::invalid_argument("DetectorTrainConfig: invalid scheduler parameters");
        }
        if (patch_size < 1 || max_epochs < 1 || unfrozen_blocks < 0) {
            throw std::invalid_argument("DetectorTrainConfig: invalid training parameters");
        }
    }

    nlohmann::json to_json() const {
        return {{"patch_size", patch_size}, {"batch_size", batch_size}, {"lr0", lr0},
                {"plateau_factor", plateau_factor}, {"plateau_patience", plateau_patience},
                {"warmup_epochs", warmup_epochs}, {"unfrozen_blocks", unfrozen_blocks},
                {"max_epochs", max_epochs}, {"momentum", momentum},
                {"weight_decay", weight_decay}, {"max_shear", max_shear},
                {"val_tile", val_tile}, {"val_overlap", val_overlap},
                {"val_min_score", val_min_score}, {"dedup_radius", dedup_radius},
                {"steps_per_epoch", steps_per_epoch}, {"seed", seed}};
    }
};

struct DetectorEpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_pr_auc = 0.0;
    double lr = 0.0;  // rate used during this epoch
};

struct DetectorTrainResult {
    int best_epoch = 0;
    double best_val_pr_auc = -1.0;
    std::vector<DetectorEpochLog> history;
    bool aborted_nan = false;
};

/// Validation PR-AUC: centroid matching of deduped candidates against ground
/// truth mitoses at the dedup radius, pooled over the validation slides.
inline double validation_pr_auc(const DetectorBackbone& backbone,
                                const dataio::DatasetManifest& manifest,
                                dataio::FrameStore& frames,
                                const dataio::SplitAssignment& split,
                                const DetectorTrainConfig& cfg) {
    std::vector<eval::ScoredSlide> slides;
    for (const auto& slide : manifest.slides) {
        if (!slide.domain.annotated || !split.in_val(slide.slide_id)) continue;
        eval::ScoredSlide scored;
        for (const auto& ann : slide.annotations) {
            if (ann.label == AnnotationLabel::kMitosis) scored.gts.push_back(ann.centroid);
        }
        const Frame& frame = frames.get(slide.slide_id);
        for (const auto& det : detect_candidates(backbone, frame.pixels, cfg.val_tile,
                                                 cfg.val_overlap, cfg.val_min_score,
                                                 cfg.dedup_radius)) {
            scored.preds.push_back({det.centroid, det.detector_score});
        }
        slides.push_back(std::move(scored));
    }
    return eval::pooled_pr_curve(slides, cfg.dedup_radius).auc;
}

/// Candidate-detector training harness. Per step: sample a positive patch,
/// apply skew + random dihedral + GAN domain augmentation, update the
/// backbone with only the last `unfrozen_blocks` trainable under the
/// warmup/plateau schedule. Per epoch: validation PR-AUC drives the plateau
/// scheduler and best-checkpoint selection.
inline DetectorTrainResult train_detector(
    const dataio::DatasetManifest& manifest, dataio::FrameStore& frames,
    const dataio::SplitAssignment& split, const DetectorTrainConfig& cfg,
    const gan::DomainTransformSet* tset, DetectorBackbone& backbone,
    const std::filesystem::path& checkpoint_path = {},
    const std::function<void(const DetectorEpochLog&)>& on_epoch = {}) {
    cfg.validate();
    const auto items = dataio::detector_items(manifest, split, dataio::Subset::kTrain);
    if (items.empty()) {
        throw std::runtime_error("train_detector: no boxed training slides");
    }
    if (!tset) {
        std::cerr << "[detector] no domain transform set; training without GAN augmentation\n";
    }

    backbone.set_trainable(last_blocks(backbone.parameter_blocks(), cfg.unfrozen_blocks));
    PlateauScheduler plateau(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience);
    Rng rng(cfg.seed);

    DetectorTrainResult result;
    const long steps_per_epoch =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : static_cast<long>(items.size());
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order(items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_index(i)]);
        }

        double loss_sum = 0.0;
        double lr_used = plateau.current_lr();
        for (long step = 0; step < steps_per_epoch; ++step) {
            const auto& item = items[order[step % order.size()]];
            const Frame& frame = frames.get(item.slide_id);

            PatchSample sample = sample_positive_patch(frame.pixels, item.boxes, rng,
                                                       cfg.patch_size);
            const augment::Shear shear = augment::random_shear(rng, cfg.max_shear);
            ImageU8 patch = augment::apply_shear(sample.patch, shear);
            std::vector<BoundingBox> boxes;
            for (const auto& box : sample.boxes) {
                BoundingBox sheared = shear.apply(box);
                const double x0 = std::max(0.0, sheared.x0);
                const double y0 = std::max(0.0, sheared.y0);
                const double x1 = std::min<double>(cfg.patch_size, sheared.x1);
                const double y1 = std::min<double>(cfg.patch_size, sheared.y1);
                if (x1 > x0 && y1 > y0) boxes.emplace_back(x0, y0, x1, y1);
            }

            const DihedralTransform t = augment::random_dihedral_transform(rng);
            patch = apply_dihedral(patch, t);
            for (auto& box : boxes) box = transform_box(box, t, cfg.patch_size);

            if (tset && !tset->empty()) {
                patch = gan::domain_augment_patch(patch, frame.domain, *tset, rng);
            }

            const double lr = epoch <= cfg.warmup_epochs
                                  ? warmup_lr(step, steps_per_epoch, cfg.lr0)
                                  : plateau.current_lr();
            lr_used = lr;
            const double loss = backbone.train_step(patch, boxes, lr);
            if (!std::isfinite(loss)) {
                result.aborted_nan = true;
                break;
            }
            loss_sum += loss;
        }
        if (result.aborted_nan) break;

        DetectorEpochLog log;
        log.epoch = epoch;
        log.mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
        log.val_pr_auc = validation_pr_auc(backbone, manifest, frames, split, cfg);
        log.lr = lr_used;
        plateau.step(log.val_pr_auc);

        if (log.val_pr_auc > result.best_val_pr_auc) {
            result.best_val_pr_auc = log.val_pr_auc;
            result.best_epoch = epoch;
            if (!checkpoint_path.empty()) backbone.save(checkpoint_path);
        }
        if (on_epoch) on_epoch(log);
        result.history.push_back(log);
    }
    return result;
}

/// Checkpoint sidecar: epoch, validation PR-AUC, config hash.
inline void save_detector_sidecar(const std::filesystem::path& path, const std::string& backbone_id,
                                  const DetectorTrainResult& result,
                                  const DetectorTrainConfig& cfg,
                                  const std::string& config_hash) {
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["backbone"] = backbone_id;
    doc["best_epoch"] = result.best_epoch;
    doc["best_val_pr_auc"] = result.best_val_pr_auc;
    doc["aborted_nan"] = result.aborted_nan;
    doc["config"] = cfg.to_json();
    doc["config_hash"] = config_hash;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_detector_sidecar: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

}  // namespace mito::detector
