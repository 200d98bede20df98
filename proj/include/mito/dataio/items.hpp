#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mito/dataio/manifest.hpp"
#include "mito/dataio/split.hpp"

namespace mito::dataio {

enum class Subset { kTrain, kVal };

/// One detector training frame: a slide with its box-annotated mitoses.
/// Slides with zero mitoses are skipped entirely (no negative patches).
struct DetectorItem {
    std::string slide_id;
    std::vector<BoundingBox> boxes;
};

/// One classifier training example: a patch center with a binary label
/// (1 = mitotic figure, 0 = hard negative).
struct ClassifierItem {
    std::string slide_id;
    Point centroid;
    int label = 0;
};

inline bool in_subset(const SplitAssignment& split, Subset subset, const std::string& id) {
    return subset == Subset::kTrain ? split.in_train(id) : split.in_val(id);
}

inline std::vector<DetectorItem> detector_items(const DatasetManifest& manifest,
                                                const SplitAssignment& split,
                                                Subset subset) {
    std::vector<DetectorItem> items;
    for (const auto& slide : manifest.slides) {
        if (!slide.domain.annotated || !in_subset(split, subset, slide.slide_id)) continue;
        DetectorItem item;
        item.slide_id = slide.slide_id;
        for (const auto& ann : slide.annotations) {
            if (ann.label != AnnotationLabel::kMitosis) continue;
            if (!ann.box) {
                throw std::runtime_error(
                    "detector_items: mitosis annotation " + std::to_string(ann.id) +
                    " on slide " + slide.slide_id +
                    " has no bounding box; run bootstrap-masks first");
            }
            item.boxes.push_back(*ann.box);
        }
        if (!item.boxes.empty()) items.push_back(std::move(item));
    }
    return items;
}

/// Positive and challenge-provided hard-negative patch centers only.
/// Unannotated-scanner slides yield nothing.
inline std::vector<ClassifierItem> classifier_items(const DatasetManifest& manifest,
                                                    const SplitAssignment& split,
                                                    Subset subset) {
    std::vector<ClassifierItem> items;
    for (const auto& slide : manifest.slides) {
        if (!slide.domain.annotated || !in_subset(split, subset, slide.slide_id)) continue;
        for (const auto& ann : slide.annotations) {
            items.push_back({slide.slide_id, ann.centroid,
                             ann.label == AnnotationLabel::kMitosis ? 1 : 0});
        }
    }
    return items;
}

/// Deterministic index-based shard for parallel data-loading workers.
template <typename T>
std::vector<T> shard(const std::vector<T>& items, std::size_t worker, std::size_t num_workers) {
    if (num_workers == 0 || worker >= num_workers) {
        throw std::invalid_argument("shard: requires worker < num_workers");
    }
    std::vector<T> out;
    for (std::size_t i = worker; i < items.size(); i += num_workers) out.push_back(items[i]);
    return out;
}

}  // namespace mito::dataio
