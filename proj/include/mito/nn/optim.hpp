#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mito/nn/layers.hpp"

namespace mito::nn {

/// Predicate deciding whether a named parameter receives updates. Frozen
/// parameters keep their exact bit pattern (they are skipped entirely).
using TrainableFilter = std::function<bool(const std::string& param_name)>;

inline TrainableFilter trainable_blocks(std::vector<std::string> blocks) {
    return [blocks = std::move(blocks)](const std::string& name) {
        for (const auto& b : blocks) {
            if (name.size() > b.size() && name.compare(0, b.size(), b) == 0 && name[b.size()] == '.') {
                return true;
            }
        }
        return false;
    };
}

inline TrainableFilter trainable_all() {
    return [](const std::string&) { return true; };
}

class Sgd {
public:
    explicit Sgd(double momentum = 0.9, double weight_decay = 0.0)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::vector<ParamRef>& params, double lr, const TrainableFilter& trainable) {
        if (velocity_.size() != params.size()) velocity_.assign(params.size(), {});
        for (std::size_t p = 0; p < params.size(); ++p) {
            if (!trainable(params[p].name)) continue;
            auto& value = *params[p].value;
            auto& grad = *params[p].grad;
            auto& vel = velocity_[p];
            if (vel.size() != value.size()) vel.assign(value.size(), 0.f);
            for (std::size_t i = 0; i < value.size(); ++i) {
                float g = grad[i] + static_cast<float>(weight_decay_) * value[i];
                vel[i] = static_cast<float>(momentum_) * vel[i] + g;
                value[i] -= static_cast<float>(lr) * vel[i];
            }
        }
    }

private:
    double momentum_, weight_decay_;
    std::vector<std::vector<float>> velocity_;
};

/// ADAM with the standard parameters pinned by the build: beta1 = 0.9,
/// beta2 = 0.999, eps = 1e-8 (all configurable).
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamRef>& params, double lr, const TrainableFilter& trainable) {
        if (m_.size() != params.size()) {
            m_.assign(params.size(), {});
            v_.assign(params.size(), {});
            t_.assign(params.size(), 0);
        }
        for (std::size_t p = 0; p < params.size(); ++p) {
            if (!trainable(params[p].name)) continue;
            auto& value = *params[p].value;
            auto& grad = *params[p].grad;
            auto& m = m_[p];
            auto& v = v_[p];
            if (m.size() != value.size()) {
                m.assign(value.size(), 0.f);
                v.assign(value.size(), 0.f);
            }
            // per-parameter step count, so late unfreezing starts bias
            // correction fresh for those tensors
            const double t = static_cast<double>(++t_[p]);
            const double bc1 = 1.0 - std::pow(beta1_, t);
            const double bc2 = 1.0 - std::pow(beta2_, t);
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double g = grad[i];
                m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
                v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
                const double mh = m[i] / bc1;
                const double vh = v[i] / bc2;
                value[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

private:
    double beta1_, beta2_, eps_;
    std::vector<std::vector<float>> m_, v_;
    std::vector<long> t_;
};

}  // namespace mito::nn
