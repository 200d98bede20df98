#pragma once

#include <vector>

#include "mito/classifier/ensemble.hpp"
#include "mito/core/geometry.hpp"
#include "mito/core/types.hpp"

namespace mito::classifier {

/// Second cascade stage: each candidate's centroid patch is extracted,
/// resized and scored by the ensemble; candidates below accept_threshold are
/// dropped. Survivors carry per-member scores and the merged score. No new
/// candidates are ever introduced.
inline std::vector<Detection> refine_detections(const std::vector<Detection>& detections,
                                                const Ensemble& ensemble,
                                                const ImageU8& frame_pixels,
                                                double accept_threshold) {
    const auto members = ensemble.member_ptrs();
    std::vector<Detection> kept;
    for (const Detection& det : detections) {
        const ImageU8 patch = extract_patch(frame_pixels, det.centroid, ensemble.patch_px);
        Detection refined = det;
        refined.classifier_scores.clear();
        refined.merged_score =
            classify_patch(members, ensemble.weights, patch, &refined.classifier_scores);
        if (*refined.merged_score >= accept_threshold) kept.push_back(std::move(refined));
    }
    return kept;
}

}  // namespace mito::classifier
