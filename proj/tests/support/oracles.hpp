#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mito/core/types.hpp"

namespace testutil {

/// Exhaustive matching oracle: maximize cardinality over all injective
/// pred->gt assignments, then minimize total distance. Only for instances
/// with <= ~6 points per side.
struct BruteMatch {
    int cardinality = 0;
    double total_distance = 0.0;
};

namespace detail {

inline void brute_recurse(const std::vector<std::vector<double>>& cost, std::size_t i,
                          std::vector<bool>& used, int card, double total, BruteMatch& best) {
    if (i == cost.size()) {
        if (card > best.cardinality ||
            (card == best.cardinality && total < best.total_distance - 1e-12)) {
            best.cardinality = card;
            best.total_distance = total;
        }
        return;
    }
    brute_recurse(cost, i + 1, used, card, total, best);
    for (std::size_t j = 0; j < used.size(); ++j) {
        if (used[j] || std::isinf(cost[i][j])) continue;
        used[j] = true;
        brute_recurse(cost, i + 1, used, card + 1, total + cost[i][j], best);
        used[j] = false;
    }
}

}  // namespace detail

inline BruteMatch brute_force_match(const std::vector<mito::Point>& preds,
                                    const std::vector<mito::Point>& gts, double radius) {
    std::vector<std::vector<double>> cost(
        preds.size(),
        std::vector<double>(gts.size(), std::numeric_limits<double>::infinity()));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t j = 0; j < gts.size(); ++j) {
            const double d = mito::distance(preds[i], gts[j]);
            if (d <= radius) cost[i][j] = d;
        }
    }
    BruteMatch best;
    best.total_distance = std::numeric_limits<double>::infinity();
    std::vector<bool> used(gts.size(), false);
    detail::brute_recurse(cost, 0, used, 0, 0.0, best);
    if (best.cardinality == 0) best.total_distance = 0.0;
    return best;
}

}  // namespace testutil
