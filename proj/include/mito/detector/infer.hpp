#pragma once

#include <algorithm>
#include <vector>

#include "mito/core/geometry.hpp"
#include "mito/detector/backbone.hpp"

namespace mito::detector {

/// Greedy-by-score centroid suppression: detections are visited in
/// (score desc, y, x) order and kept only when no already-kept centroid lies
/// within `radius`. Idempotent, equals brute-force greedy suppression.
inline std::vector<Detection> dedup_detections(std::vector<Detection> detections, double radius) {
    std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
        if (a.detector_score != b.detector_score) return a.detector_score > b.detector_score;
        if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
        return a.centroid.x < b.centroid.x;
    });
    std::vector<Detection> kept;
    for (const auto& d : detections) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (distance(d.centroid, k.centroid) <= radius) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

/// Tiled full-frame candidate detection: propose per tile, map boxes back to
/// frame coordinates, drop weak proposals, dedup across overlaps keeping the
/// highest score. detector_score is populated; classifier scores stay empty
/// until refinement.
inline std::vector<Detection> detect_candidates(const DetectorBackbone& backbone,
                                                const ImageU8& frame, int tile, int overlap,
                                                double min_score, double dedup_radius) {
    std::vector<Detection> candidates;
    for (const auto& rect : tile_grid(frame.width(), frame.height(), tile, overlap)) {
        const ImageU8 view = crop(frame, rect);
        for (const auto& proposal : backbone.propose(view)) {
            if (proposal.score < min_score) continue;
            Detection d;
            d.box = BoundingBox(proposal.box.x0 + rect.x, proposal.box.y0 + rect.y,
                                proposal.box.x1 + rect.x, proposal.box.y1 + rect.y);
            d.centroid = d.box.center();
            d.detector_score = proposal.score;
            candidates.push_back(std::move(d));
        }
    }
    return dedup_detections(std::move(candidates), dedup_radius);
}

}  // namespace mito::detector
