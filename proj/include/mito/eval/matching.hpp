#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mito/core/types.hpp"

namespace mito::eval {

/// Centroid matching outcome at a fixed radius. Every prediction appears in
/// exactly one of tp/fp, every ground truth in exactly one of tp/fn.
struct MatchResult {
    struct TruePositive {
        int pred = 0;
        int gt = 0;
        double distance = 0.0;
    };
    std::vector<TruePositive> tp;
    std::vector<int> fp;  // unmatched prediction indices
    std::vector<int> fn;  // unmatched ground-truth indices
    double radius = 0.0;
};

/// Maximum-cardinality one-to-one matching between predictions and ground
/// truths over pairs within `radius`, with ties in cardinality broken by
/// minimal total distance. Implemented as successive shortest augmenting
/// paths (min-cost max-flow on the bipartite graph), so it is order
/// independent and never undercounts true positives.
inline MatchResult match_detections(const std::vector<Point>& preds,
                                    const std::vector<Point>& gts,
                                    double radius) {
    if (radius <= 0.0) throw std::invalid_argument("match_detections: radius must be positive");
    const int np = static_cast<int>(preds.size());
    const int ng = static_cast<int>(gts.size());
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> cost(np, std::vector<double>(ng, kInf));
    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < ng; ++j) {
            const double d = distance(preds[i], gts[j]);
            if (d <= radius) cost[i][j] = d;
        }
    }

    std::vector<int> gt_of_pred(np, -1);
    std::vector<int> pred_of_gt(ng, -1);

    for (;;) {
        // Bellman-Ford over the residual graph from all unmatched preds.
        std::vector<double> dist_pred(np, kInf), dist_gt(ng, kInf);
        std::vector<int> parent_of_gt(ng, -1);
        for (int i = 0; i < np; ++i) {
            if (gt_of_pred[i] == -1) dist_pred[i] = 0.0;
        }
        bool changed = true;
        while (changed) {
            changed = false;
            for (int i = 0; i < np; ++i) {
                if (dist_pred[i] == kInf) continue;
                for (int j = 0; j < ng; ++j) {
                    if (cost[i][j] == kInf || pred_of_gt[j] == i) continue;
                    const double cand = dist_pred[i] + cost[i][j];
                    if (cand < dist_gt[j]) {
                        dist_gt[j] = cand;
                        parent_of_gt[j] = i;
                        changed = true;
                    }
                }
            }
            for (int j = 0; j < ng; ++j) {
                const int i = pred_of_gt[j];
                if (i == -1 || dist_gt[j] == kInf) continue;
                const double cand = dist_gt[j] - cost[i][j];
                if (cand < dist_pred[i]) {
                    dist_pred[i] = cand;
                    changed = true;
                }
            }
        }

        int best_gt = -1;
        for (int j = 0; j < ng; ++j) {
            if (pred_of_gt[j] != -1 || dist_gt[j] == kInf) continue;
            if (best_gt == -1 || dist_gt[j] < dist_gt[best_gt]) best_gt = j;
        }
        if (best_gt == -1) break;

        // Flip matched/unmatched edges along the augmenting path.
        int cur = best_gt;
        for (;;) {
            const int i = parent_of_gt[cur];
            const int old = gt_of_pred[i];
            gt_of_pred[i] = cur;
            pred_of_gt[cur] = i;
            if (old == -1) break;
            cur = old;
        }
    }

    MatchResult result;
    result.radius = radius;
    for (int i = 0; i < np; ++i) {
        if (gt_of_pred[i] == -1) {
            result.fp.push_back(i);
        } else {
            result.tp.push_back({i, gt_of_pred[i], cost[i][gt_of_pred[i]]});
        }
    }
    for (int j = 0; j < ng; ++j) {
        if (pred_of_gt[j] == -1) result.fn.push_back(j);
    }
    return result;
}

}  // namespace mito::eval
