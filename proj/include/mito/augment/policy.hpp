#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mito/augment/ops.hpp"
#include "mito/core/geometry.hpp"
#include "mito/core/random.hpp"

namespace mito::augment {

/// One named policy operation. The magnitude m in [0, 10] maps linearly onto
/// the op's parameter range with m = 0 at the identity parameter; random
/// draws (sign choices) come from the supplied rng.
struct AugmentOp {
    std::string name;
    std::function<ImageU8(const ImageU8&, double m, Rng&)> apply;
};

namespace detail {

inline double signed_span(double m, double max_value, Rng& rng) {
    const double magnitude = m / 10.0 * max_value;
    return rng.bernoulli(0.5) ? magnitude : -magnitude;
}

}  // namespace detail

/// Tailored H&E op pool; every op maps m monotonically onto its range.
inline std::vector<AugmentOp> default_hne_ops() {
    std::vector<AugmentOp> ops;
    ops.push_back({"hue", [](const ImageU8& img, double m, Rng& rng) {
                       return hue_shift(img, detail::signed_span(m, 36.0, rng));
                   }});
    ops.push_back({"saturation", [](const ImageU8& img, double m, Rng& rng) {
                       return saturation_scale(img, 1.0 + detail::signed_span(m, 0.5, rng));
                   }});
    ops.push_back({"brightness", [](const ImageU8& img, double m, Rng& rng) {
                       return brightness_scale(img, 1.0 + detail::signed_span(m, 0.3, rng));
                   }});
    ops.push_back({"contrast", [](const ImageU8& img, double m, Rng& rng) {
                       return contrast_scale(img, 1.0 + detail::signed_span(m, 0.5, rng));
                   }});
    ops.push_back({"blur", [](const ImageU8& img, double m, Rng&) {
                       return gaussian_blur(img, m / 10.0 * 2.0);
                   }});
    ops.push_back({"sharpen", [](const ImageU8& img, double m, Rng&) {
                       return sharpen(img, m / 10.0 * 1.0);
                   }});
    ops.push_back({"hed", [](const ImageU8& img, double m, Rng& rng) {
                       std::array<double, 3> scale, bias;
                       for (int s = 0; s < 3; ++s) {
                           scale[s] = 1.0 + detail::signed_span(m, 0.15, rng);
                           bias[s] = detail::signed_span(m, 0.03, rng);
                       }
                       return hed_perturb(img, scale, bias);
                   }});
    return ops;
}

struct AugmentPolicy {
    int n = 3;              // operations applied per image
    double m = 7.0;         // global magnitude on the 0..10 scale
    std::vector<AugmentOp> op_pool = default_hne_ops();

    void validate() const {
        if (n < 0) throw std::invalid_argument("AugmentPolicy: n must be >= 0");
        if (m < 0.0 || m > 10.0) throw std::invalid_argument("AugmentPolicy: m must be in [0,10]");
    }

    /// Restrict the pool to the named ops (config override).
    void select_ops(const std::vector<std::string>& names) {
        std::vector<AugmentOp> chosen;
        for (const auto& want : names) {
            bool found = false;
            for (const auto& op : op_pool) {
                if (op.name == want) {
                    chosen.push_back(op);
                    found = true;
                    break;
                }
            }
            if (!found) throw std::invalid_argument("AugmentPolicy: unknown op \"" + want + "\"");
        }
        op_pool = std::move(chosen);
    }
};

/// Samples n ops uniformly with replacement and applies them in sequence at
/// the policy magnitude.
inline ImageU8 hne_randaugment(const ImageU8& raster, const AugmentPolicy& policy, Rng& rng) {
    policy.validate();
    if (raster.channels() != 3) {
        throw std::invalid_argument("hne_randaugment: RGB raster required");
    }
    if (policy.n > 0 && policy.op_pool.empty()) {
        throw std::invalid_argument("hne_randaugment: empty op pool with n > 0");
    }
    ImageU8 out = raster;
    for (int i = 0; i < policy.n; ++i) {
        const AugmentOp& op = policy.op_pool[rng.uniform_index(policy.op_pool.size())];
        out = op.apply(out, policy.m, rng);
    }
    return out;
}

/// One of the 8 square symmetries, uniformly at random.
inline DihedralTransform random_dihedral_transform(Rng& rng) {
    return DihedralTransform(static_cast<int>(rng.uniform_index(DihedralTransform::kCount)));
}

template <typename T>
Image<T> random_dihedral(const Image<T>& raster, Rng& rng) {
    return apply_dihedral(raster, random_dihedral_transform(rng));
}

// ---------------------------------------------------------------------------
// Skew
// ---------------------------------------------------------------------------

/// Origin-anchored shear: (x, y) -> (x + sx*y, y + sy*x). Boxes and masks are
/// transformed with the identical map as the pixels.
struct Shear {
    double sx = 0.0;
    double sy = 0.0;

    Point apply(const Point& p) const { return {p.x + sx * p.y, p.y + sy * p.x}; }

    /// Axis-aligned hull of the four sheared corners.
    BoundingBox apply(const BoundingBox& box) const {
        const Point c0 = apply({box.x0, box.y0});
        const Point c1 = apply({box.x1, box.y0});
        const Point c2 = apply({box.x0, box.y1});
        const Point c3 = apply({box.x1, box.y1});
        return BoundingBox(std::min({c0.x, c1.x, c2.x, c3.x}), std::min({c0.y, c1.y, c2.y, c3.y}),
                           std::max({c0.x, c1.x, c2.x, c3.x}), std::max({c0.y, c1.y, c2.y, c3.y}));
    }

    bool is_identity() const { return sx == 0.0 && sy == 0.0; }
};

inline Shear random_shear(Rng& rng, double max_shear) {
    if (max_shear < 0.0) throw std::invalid_argument("random_shear: max_shear must be >= 0");
    if (max_shear == 0.0) return {};
    return {rng.uniform(-max_shear, max_shear), rng.uniform(-max_shear, max_shear)};
}

/// Inverse-mapped bilinear resampling with reflected borders; output keeps
/// the input size.
template <typename T>
Image<T> apply_shear(const Image<T>& raster, const Shear& shear) {
    if (shear.is_identity()) return raster;
    const double det = 1.0 - shear.sx * shear.sy;
    if (std::fabs(det) < 1e-9) throw std::invalid_argument("apply_shear: degenerate shear");
    Image<T> out(raster.width(), raster.height(), raster.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const double px = x + 0.5, py = y + 0.5;
            const double src_x = (px - shear.sx * py) / det;
            const double src_y = (py - shear.sy * px) / det;
            const double u = src_x - 0.5, v = src_y - 0.5;
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const float fx = static_cast<float>(u - x0);
            const float fy = static_cast<float>(v - y0);
            for (int c = 0; c < raster.channels(); ++c) {
                auto at = [&](int xi, int yi) {
                    return static_cast<float>(raster.at(reflect_index(xi, raster.width()),
                                                        reflect_index(yi, raster.height()), c));
                };
                const float top = lerp(at(x0, y0), at(x0 + 1, y0), fx);
                const float bot = lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), fx);
                const float val = lerp(top, bot, fy);
                if constexpr (std::is_integral_v<T>) {
                    out.at(x, y, c) = static_cast<T>(std::clamp(val + 0.5f, 0.f, 255.f));
                } else {
                    out.at(x, y, c) = static_cast<T>(val);
                }
            }
        }
    }
    return out;
}

template <typename T>
Image<T> random_skew(const Image<T>& raster, Rng& rng, double max_shear) {
    return apply_shear(raster, random_shear(rng, max_shear));
}

}  // namespace mito::augment
