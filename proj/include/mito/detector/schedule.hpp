#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace mito::detector {

struct PlateauSchedulerState {
    double current_lr = 0.0;
    std::optional<double> best_metric;
    int epochs_since_improvement = 0;
};

/// Plateau-reduction learning rate schedule: if the validation metric does
/// not improve for `patience` epochs, the rate is divided by `factor`. The
/// first observed metric sets the baseline and starts the plateau window, so
/// a constant metric halves the rate exactly at epochs patience, 2*patience,
/// and so on.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, double factor = 2.0, int patience = 5) {
        if (lr0 <= 0.0) throw std::invalid_argument("PlateauScheduler: lr0 must be positive");
        if (factor <= 1.0) throw std::invalid_argument("PlateauScheduler: factor must be > 1");
        if (patience < 1) throw std::invalid_argument("PlateauScheduler: patience must be >= 1");
        factor_ = factor;
        patience_ = patience;
        state_.current_lr = lr0;
    }

    /// Consumes one epoch's validation metric; returns the rate for the next
    /// epoch.
    double step(double metric) {
        if (!std::isfinite(metric)) {
            throw std::invalid_argument("PlateauScheduler: metric must be finite");
        }
        if (!state_.best_metric.has_value()) {
            state_.best_metric = metric;
            state_.epochs_since_improvement = 1;
        } else if (metric > *state_.best_metric) {
            state_.best_metric = metric;
            state_.epochs_since_improvement = 0;
        } else {
            ++state_.epochs_since_improvement;
        }
        if (state_.epochs_since_improvement >= patience_) {
            state_.current_lr /= factor_;
            state_.epochs_since_improvement = 0;
        }
        return state_.current_lr;
    }

    double current_lr() const { return state_.current_lr; }
    const PlateauSchedulerState& state() const { return state_; }

private:
    double factor_ = 2.0;
    int patience_ = 5;
    PlateauSchedulerState state_;
};

/// Linear optimizer warmup across the first epoch: from lr0/steps at step 0
/// up to lr0 at the epoch's final step; lr0 thereafter.
inline double warmup_lr(long step, long steps_in_first_epoch, double lr0) {
    if (step < 0) throw std::invalid_argument("warmup_lr: step must be >= 0");
    if (steps_in_first_epoch < 1) {
        throw std::invalid_argument("warmup_lr: steps_in_first_epoch must be >= 1");
    }
    if (step >= steps_in_first_epoch) return lr0;
    return lr0 * static_cast<double>(step + 1) / static_cast<double>(steps_in_first_epoch);
}

}  // namespace mito::detector
