#pragma once

#include <cmath>
#include <stdexcept>

namespace mito::classifier {

/// Cosine annealing: lr0 * (1 + cos(pi * epoch / total_epochs)) / 2,
/// from lr0 at epoch 0 down to 0 at epoch total_epochs.
inline double cosine_lr(int epoch, int total_epochs, double lr0) {
    if (total_epochs < 1) throw std::invalid_argument("cosine_lr: total_epochs must be >= 1");
    if (epoch < 0 || epoch > total_epochs) {
        throw std::invalid_argument("cosine_lr: epoch must lie in [0, total_epochs]");
    }
    const double pi = 3.14159265358979323846;
    return lr0 * (1.0 + std::cos(pi * epoch / total_epochs)) / 2.0;
}

}  // namespace mito::classifier
