#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mito/core/image.hpp"

namespace mito::nn {

/// Dense float tensor in NCHW layout. Vectors (n, features) are represented
/// with h = w = 1.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.f)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0) {
            throw std::invalid_argument("Tensor: dimensions must be positive");
        }
    }

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    float& at(int i, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }
    const float& at(int i, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

/// HWC 8-bit image -> 1CHW float tensor, scaled to [0, 1].
inline Tensor tensor_from_image(const ImageU8& img) {
    Tensor t(1, img.channels(), img.height(), img.width());
    constexpr float kScale = 1.f / 255.f;
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                t.at(0, c, y, x) = img.at(x, y, c) * kScale;
            }
        }
    }
    return t;
}

inline Tensor tensor_from_image(const ImageF32& img) {
    Tensor t(1, img.channels(), img.height(), img.width());
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                t.at(0, c, y, x) = img.at(x, y, c);
            }
        }
    }
    return t;
}

/// Stacks same-shaped 1CHW tensors into one batch.
inline Tensor stack(const std::vector<Tensor>& items) {
    if (items.empty()) throw std::invalid_argument("stack: empty batch");
    const Tensor& first = items.front();
    Tensor out(static_cast<int>(items.size()), first.c, first.h, first.w);
    std::size_t offset = 0;
    for (const Tensor& t : items) {
        if (t.n != 1 || t.c != first.c || t.h != first.h || t.w != first.w) {
            throw std::invalid_argument("stack: mismatched shapes");
        }
        std::copy(t.v.begin(), t.v.end(), out.v.begin() + offset);
        offset += t.v.size();
    }
    return out;
}

/// Channel plane of sample `i` as a float image (e.g. probability maps).
inline ImageF32 image_from_channel(const Tensor& t, int i, int ci) {
    ImageF32 out(t.w, t.h, 1);
    for (int y = 0; y < t.h; ++y) {
        for (int x = 0; x < t.w; ++x) {
            out.at(x, y, 0) = t.at(i, ci, y, x);
        }
    }
    return out;
}

}  // namespace mito::nn
