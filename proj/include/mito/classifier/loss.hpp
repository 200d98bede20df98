#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mito::classifier {

inline constexpr double kFocalEps = 1e-7;

/// Focal loss -alpha * (1 - pt)^gamma * log(pt) with pt = p for y = 1 and
/// 1 - p otherwise. Probabilities exactly at 0 or 1 are clamped by 1e-7.
/// Reduces to cross-entropy at gamma = 0, alpha = 1.
inline double focal_loss(double p, int y, double gamma, double alpha) {
    if (y != 0 && y != 1) throw std::invalid_argument("focal_loss: label must be 0 or 1");
    if (gamma < 0.0 || alpha <= 0.0) {
        throw std::invalid_argument("focal_loss: gamma must be >= 0 and alpha > 0");
    }
    p = std::clamp(p, kFocalEps, 1.0 - kFocalEps);
    const double pt = y == 1 ? p : 1.0 - p;
    return -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
}

/// d(focal_loss)/dp.
inline double focal_loss_dp(double p, int y, double gamma, double alpha) {
    p = std::clamp(p, kFocalEps, 1.0 - kFocalEps);
    const double pt = y == 1 ? p : 1.0 - p;
    double d;
    if (gamma == 0.0) {
        d = -alpha / pt;
    } else {
        d = alpha * (gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt) -
                     std::pow(1.0 - pt, gamma) / pt);
    }
    return y == 1 ? d : -d;
}

/// d(focal_loss)/dlogit for p = sigmoid(logit).
inline double focal_loss_dlogit(double p, int y, double gamma, double alpha) {
    return focal_loss_dp(p, y, gamma, alpha) * p * (1.0 - p);
}

}  // namespace mito::classifier
