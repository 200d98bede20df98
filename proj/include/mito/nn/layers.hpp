#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mito/core/random.hpp"
#include "mito/nn/tensor.hpp"

namespace mito::nn {

/// Named view into a parameter (or buffer) vector and its gradient.
struct ParamRef {
    std::string name;
    std::vector<float>* value = nullptr;
    std::vector<float>* grad = nullptr;  // null for buffers (BN running stats)
};

/// Minimal layer interface with manual backprop. Training-mode forward caches
/// activations for the following backward; eval-mode forward is pure and
/// re-entrant, so shared models can serve concurrent inference.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamRef>& params,
                         std::vector<ParamRef>& buffers) {}
    virtual void zero_grad() {}
};

class Conv2d : public Layer {
public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad, Rng rng, double init_scale = 1.0)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
          weight_(static_cast<std::size_t>(out_c) * in_c * k * k),
          bias_(out_c, 0.f),
          dweight_(weight_.size(), 0.f), dbias_(out_c, 0.f) {
        // He-style init; init_scale shrinks residual-branch output layers
        const double scale = init_scale * std::sqrt(2.0 / (in_c * k * k));
        for (float& w : weight_) w = static_cast<float>(rng.normal(0.0, scale));
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.c != in_c_) throw std::invalid_argument("Conv2d: channel mismatch");
        const int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
        const int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
        if (oh <= 0 || ow <= 0) throw std::invalid_argument("Conv2d: input too small");
        Tensor y(x.n, out_c_, oh, ow);
        for (int n = 0; n < x.n; ++n) {
            for (int oc = 0; oc < out_c_; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        float acc = bias_[oc];
                        for (int ic = 0; ic < in_c_; ++ic) {
                            for (int ky = 0; ky < k_; ++ky) {
                                const int iy = oy * stride_ - pad_ + ky;
                                if (iy < 0 || iy >= x.h) continue;
                                const float* wrow = &weight_[widx(oc, ic, ky, 0)];
                                for (int kx = 0; kx < k_; ++kx) {
                                    const int ix = ox * stride_ - pad_ + kx;
                                    if (ix < 0 || ix >= x.w) continue;
                                    acc += wrow[kx] * x.at(n, ic, iy, ix);
                                }
                            }
                        }
                        y.at(n, oc, oy, ox) = acc;
                    }
                }
            }
        }
        if (training) cache_ = x;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const Tensor& x = cache_;
        Tensor dx(x.n, x.c, x.h, x.w);
        for (int n = 0; n < x.n; ++n) {
            for (int oc = 0; oc < out_c_; ++oc) {
                for (int oy = 0; oy < dy.h; ++oy) {
                    for (int ox = 0; ox < dy.w; ++ox) {
                        const float g = dy.at(n, oc, oy, ox);
                        dbias_[oc] += g;
                        for (int ic = 0; ic < in_c_; ++ic) {
                            for (int ky = 0; ky < k_; ++ky) {
                                const int iy = oy * stride_ - pad_ + ky;
                                if (iy < 0 || iy >= x.h) continue;
                                for (int kx = 0; kx < k_; ++kx) {
                                    const int ix = ox * stride_ - pad_ + kx;
                                    if (ix < 0 || ix >= x.w) continue;
                                    dweight_[widx(oc, ic, ky, kx)] += g * x.at(n, ic, iy, ix);
                                    dx.at(n, ic, iy, ix) += g * weight_[widx(oc, ic, ky, kx)];
                                }
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& buffers) override {
        params.push_back({prefix + ".weight", &weight_, &dweight_});
        params.push_back({prefix + ".bias", &bias_, &dbias_});
    }

    void zero_grad() override {
        std::fill(dweight_.begin(), dweight_.end(), 0.f);
        std::fill(dbias_.begin(), dbias_.end(), 0.f);
    }

private:
    std::size_t widx(int oc, int ic, int ky, int kx) const {
        return ((static_cast<std::size_t>(oc) * in_c_ + ic) * k_ + ky) * k_ + kx;
    }

    int in_c_, out_c_, k_, stride_, pad_;
    std::vector<float> weight_, bias_, dweight_, dbias_;
    Tensor cache_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override {
        Tensor y = x;
        for (float& v : y.v) v = v > 0.f ? v : 0.f;
        if (training) cache_ = x;
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) {
            if (cache_.v[i] <= 0.f) dx.v[i] = 0.f;
        }
        return dx;
    }

private:
    Tensor cache_;
};

class Tanh : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override {
        Tensor y = x;
        for (float& v : y.v) v = std::tanh(v);
        if (training) cache_ = y;
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) {
            dx.v[i] *= 1.f - cache_.v[i] * cache_.v[i];
        }
        return dx;
    }

private:
    Tensor cache_;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f)
        : c_(channels), eps_(eps), momentum_(momentum),
          gamma_(channels, 1.f), beta_(channels, 0.f),
          dgamma_(channels, 0.f), dbeta_(channels, 0.f),
          running_mean_(channels, 0.f), running_var_(channels, 1.f) {}

    Tensor forward(const Tensor& x, bool training) override {
        if (x.c != c_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
        Tensor y = x;
        if (training) {
            const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
            mean_.assign(c_, 0.f);
            inv_std_.assign(c_, 0.f);
            for (int ci = 0; ci < c_; ++ci) {
                double sum = 0.0;
                for (int n = 0; n < x.n; ++n)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) sum += x.at(n, ci, yy, xx);
                const double mu = sum / m;
                double var = 0.0;
                for (int n = 0; n < x.n; ++n)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const double d = x.at(n, ci, yy, xx) - mu;
                            var += d * d;
                        }
                var /= m;
                mean_[ci] = static_cast<float>(mu);
                inv_std_[ci] = static_cast<float>(1.0 / std::sqrt(var + eps_));
                running_mean_[ci] = (1.f - momentum_) * running_mean_[ci] + momentum_ * mean_[ci];
                running_var_[ci] = (1.f - momentum_) * running_var_[ci] + momentum_ * static_cast<float>(var);
            }
            xhat_ = x;
            for (int n = 0; n < x.n; ++n)
                for (int ci = 0; ci < c_; ++ci)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const float xh = (x.at(n, ci, yy, xx) - mean_[ci]) * inv_std_[ci];
                            xhat_.at(n, ci, yy, xx) = xh;
                            y.at(n, ci, yy, xx) = gamma_[ci] * xh + beta_[ci];
                        }
        } else {
            for (int n = 0; n < x.n; ++n)
                for (int ci = 0; ci < c_; ++ci) {
                    const float inv = 1.f / std::sqrt(running_var_[ci] + eps_);
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            y.at(n, ci, yy, xx) =
                                gamma_[ci] * (x.at(n, ci, yy, xx) - running_mean_[ci]) * inv + beta_[ci];
                        }
                }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t m = static_cast<std::size_t>(dy.n) * dy.h * dy.w;
        Tensor dx = dy;
        for (int ci = 0; ci < c_; ++ci) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < dy.n; ++n)
                for (int yy = 0; yy < dy.h; ++yy)
                    for (int xx = 0; xx < dy.w; ++xx) {
                        const float g = dy.at(n, ci, yy, xx);
                        sum_dy += g;
                        sum_dy_xhat += g * xhat_.at(n, ci, yy, xx);
                    }
            dbeta_[ci] += static_cast<float>(sum_dy);
            dgamma_[ci] += static_cast<float>(sum_dy_xhat);
            const float k = gamma_[ci] * inv_std_[ci] / m;
            for (int n = 0; n < dy.n; ++n)
                for (int yy = 0; yy < dy.h; ++yy)
                    for (int xx = 0; xx < dy.w; ++xx) {
                        dx.at(n, ci, yy, xx) =
                            k * (m * dy.at(n, ci, yy, xx) - static_cast<float>(sum_dy) -
                                 xhat_.at(n, ci, yy, xx) * static_cast<float>(sum_dy_xhat));
                    }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& buffers) override {
        params.push_back({prefix + ".gamma", &gamma_, &dgamma_});
        params.push_back({prefix + ".beta", &beta_, &dbeta_});
        buffers.push_back({prefix + ".running_mean", &running_mean_, nullptr});
        buffers.push_back({prefix + ".running_var", &running_var_, nullptr});
    }

    void zero_grad() override {
        std::fill(dgamma_.begin(), dgamma_.end(), 0.f);
        std::fill(dbeta_.begin(), dbeta_.end(), 0.f);
    }

private:
    int c_;
    float eps_, momentum_;
    std::vector<float> gamma_, beta_, dgamma_, dbeta_;
    std::vector<float> running_mean_, running_var_;
    std::vector<float> mean_, inv_std_;
    Tensor xhat_;
};

/// Inverted dropout; active only in training mode.
class Dropout : public Layer {
public:
    Dropout(float p, Rng rng) : p_(p), rng_(rng) {
        if (p < 0.f || p >= 1.f) throw std::invalid_argument("Dropout: p must be in [0,1)");
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (!training || p_ == 0.f) return x;
        Tensor y = x;
        mask_.assign(x.v.size(), 0.f);
        const float keep = 1.f - p_;
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            if (rng_.uniform() >= p_) {
                mask_[i] = 1.f / keep;
                y.v[i] = x.v[i] * mask_[i];
            } else {
                y.v[i] = 0.f;
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask_[i];
        return dx;
    }

private:
    float p_;
    Rng rng_;
    std::vector<float> mask_;
};

class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool training) override {
        Tensor y(x.n, x.c, 1, 1);
        const float inv = 1.f / static_cast<float>(x.h * x.w);
        for (int n = 0; n < x.n; ++n) {
            for (int c = 0; c < x.c; ++c) {
                float acc = 0.f;
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) acc += x.at(n, c, yy, xx);
                y.at(n, c, 0, 0) = acc * inv;
            }
        }
        if (training) {
            in_h_ = x.h;
            in_w_ = x.w;
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(dy.n, dy.c, in_h_, in_w_);
        const float inv = 1.f / static_cast<float>(in_h_ * in_w_);
        for (int n = 0; n < dy.n; ++n) {
            for (int c = 0; c < dy.c; ++c) {
                const float g = dy.at(n, c, 0, 0) * inv;
                for (int yy = 0; yy < in_h_; ++yy)
                    for (int xx = 0; xx < in_w_; ++xx) dx.at(n, c, yy, xx) = g;
            }
        }
        return dx;
    }

private:
    int in_h_ = 0, in_w_ = 0;
};

/// Fully connected layer over the flattened (c*h*w) features of each sample.
class Linear : public Layer {
public:
    Linear(int in_features, int out_features, Rng rng)
        : in_(in_features), out_(out_features),
          weight_(static_cast<std::size_t>(in_features) * out_features),
          bias_(out_features, 0.f),
          dweight_(weight_.size(), 0.f), dbias_(out_features, 0.f) {
        const double scale = std::sqrt(2.0 / in_features);
        for (float& w : weight_) w = static_cast<float>(rng.normal(0.0, scale));
    }

    Tensor forward(const Tensor& x, bool training) override {
        const int features = x.c * x.h * x.w;
        if (features != in_) throw std::invalid_argument("Linear: feature size mismatch");
        Tensor y(x.n, out_, 1, 1);
        for (int n = 0; n < x.n; ++n) {
            const float* xv = &x.v[static_cast<std::size_t>(n) * in_];
            for (int o = 0; o < out_; ++o) {
                float acc = bias_[o];
                const float* wrow = &weight_[static_cast<std::size_t>(o) * in_];
                for (int i = 0; i < in_; ++i) acc += wrow[i] * xv[i];
                y.at(n, o, 0, 0) = acc;
            }
        }
        if (training) cache_ = x;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const Tensor& x = cache_;
        Tensor dx(x.n, x.c, x.h, x.w);
        for (int n = 0; n < x.n; ++n) {
            const float* xv = &x.v[static_cast<std::size_t>(n) * in_];
            float* dxv = &dx.v[static_cast<std::size_t>(n) * in_];
            for (int o = 0; o < out_; ++o) {
                const float g = dy.at(n, o, 0, 0);
                dbias_[o] += g;
                float* dwrow = &dweight_[static_cast<std::size_t>(o) * in_];
                const float* wrow = &weight_[static_cast<std::size_t>(o) * in_];
                for (int i = 0; i < in_; ++i) {
                    dwrow[i] += g * xv[i];
                    dxv[i] += g * wrow[i];
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& params,
                 std::vector<ParamRef>& buffers) override {
        params.push_back({prefix + ".weight", &weight_, &dweight_});
        params.push_back({prefix + ".bias", &bias_, &dbias_});
    }

    void zero_grad() override {
        std::fill(dweight_.begin(), dweight_.end(), 0.f);
        std::fill(dbias_.begin(), dbias_.end(), 0.f);
    }

private:
    int in_, out_;
    std::vector<float> weight_, bias_, dweight_, dbias_;
    Tensor cache_;
};

/// Layer pipeline with per-layer block tags. Blocks group parameters for the
/// freezing contracts ("last two convolutional blocks", "backbone after 5
/// epochs") and for checkpoint naming.
class Sequential {
public:
    void add(const std::string& block, std::unique_ptr<Layer> layer) {
        blocks_.push_back(block);
        layers_.push_back(std::move(layer));
    }

    Tensor forward(const Tensor& x, bool training) {
        Tensor out = x;
        for (auto& layer : layers_) out = layer->forward(out, training);
        return out;
    }

    Tensor backward(const Tensor& dy) {
        Tensor grad = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            grad = (*it)->backward(grad);
        }
        return grad;
    }

    void zero_grad() {
        for (auto& layer : layers_) layer->zero_grad();
    }

    /// Parameter refs named "<block>.<idx>.<param>".
    void collect(std::vector<ParamRef>& params, std::vector<ParamRef>& buffers) {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->collect(blocks_[i] + "." + std::to_string(i), params, buffers);
        }
    }

    /// Ordered distinct block names.
    std::vector<std::string> block_names() const {
        std::vector<std::string> names;
        for (const auto& b : blocks_) {
            if (names.empty() || names.back() != b) {
                bool seen = false;
                for (const auto& n : names) seen = seen || n == b;
                if (!seen) names.push_back(b);
            }
        }
        return names;
    }

    std::size_t layer_count() const { return layers_.size(); }

private:
    std::vector<std::string> blocks_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace mito::nn
