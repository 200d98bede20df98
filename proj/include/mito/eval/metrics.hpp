#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "mito/eval/matching.hpp"

namespace mito::eval {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision/recall/F1 from raw counts with the 0/0 -> 0 convention.
inline Prf prf_from_counts(long tp, long fp, long fn) {
    Prf out;
    out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

inline Prf precision_recall_f1(const MatchResult& m) {
    return prf_from_counts(static_cast<long>(m.tp.size()),
                           static_cast<long>(m.fp.size()),
                           static_cast<long>(m.fn.size()));
}

/// Harmonic mean with the 0/0 -> 0 convention.
inline double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

struct ScoredPoint {
    Point p;
    double score = 0.0;
};

struct PRCurve {
    struct Sample {
        double threshold = 0.0;
        double precision = 0.0;
        double recall = 0.0;
    };
    std::vector<Sample> points;  // threshold descending, recall non-decreasing
    double auc = 0.0;
};

/// Area under the precision-recall step function with interpolated precision
/// (for each recall level, the maximum precision at recall >= r). Points must
/// be ordered by non-decreasing recall, as produced by a descending threshold
/// sweep.
inline double interpolated_pr_auc(const std::vector<PRCurve::Sample>& points) {
    const std::size_t n = points.size();
    std::vector<double> envelope(n, 0.0);
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        running = std::max(running, points[k].precision);
        envelope[k] = running;
    }
    double auc = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        auc += (points[k].recall - prev_recall) * envelope[k];
        prev_recall = points[k].recall;
    }
    return auc;
}

/// One slide's scored predictions and ground-truth centroids.
struct ScoredSlide {
    std::vector<ScoredPoint> preds;
    std::vector<Point> gts;
};

/// Pooled PR curve across slides: sweep the union of scores descending,
/// match per slide at each threshold, pool tp/fp/fn counts.
inline PRCurve pooled_pr_curve(const std::vector<ScoredSlide>& slides, double radius) {
    std::vector<double> thresholds;
    for (const auto& s : slides) {
        for (const auto& sp : s.preds) thresholds.push_back(sp.score);
    }
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    PRCurve curve;
    for (double tau : thresholds) {
        long tp = 0, fp = 0, fn = 0;
        for (const auto& s : slides) {
            std::vector<Point> kept;
            for (const auto& sp : s.preds) {
                if (sp.score >= tau) kept.push_back(sp.p);
            }
            const MatchResult m = match_detections(kept, s.gts, radius);
            tp += static_cast<long>(m.tp.size());
            fp += static_cast<long>(m.fp.size());
            fn += static_cast<long>(m.fn.size());
        }
        const Prf prf = prf_from_counts(tp, fp, fn);
        curve.points.push_back({tau, prf.precision, prf.recall});
    }
    curve.auc = interpolated_pr_auc(curve.points);
    return curve;
}

/// Sweeps the distinct score set descending, matching at each threshold.
inline PRCurve pr_curve(const std::vector<ScoredPoint>& preds,
                        const std::vector<Point>& gts,
                        double radius) {
    for (const auto& sp : preds) {
        if (sp.score < 0.0 || sp.score > 1.0) {
            throw std::invalid_argument("pr_curve: scores must lie in [0,1]");
        }
    }
    std::vector<double> thresholds;
    thresholds.reserve(preds.size());
    for (const auto& sp : preds) thresholds.push_back(sp.score);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    PRCurve curve;
    for (double tau : thresholds) {
        std::vector<Point> kept;
        for (const auto& sp : preds) {
            if (sp.score >= tau) kept.push_back(sp.p);
        }
        const MatchResult m = match_detections(kept, gts, radius);
        const Prf prf = precision_recall_f1(m);
        curve.points.push_back({tau, prf.precision, prf.recall});
    }
    curve.auc = interpolated_pr_auc(curve.points);
    return curve;
}

}  // namespace mito::eval
