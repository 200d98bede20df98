#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mito/core/image.hpp"
#include "mito/core/random.hpp"

namespace mito::augment {

namespace detail {

inline std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

struct Hsv {
    double h;  // [0, 1)
    double s;  // [0, 1]
    double v;  // [0, 1]
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    Hsv out{0.0, mx > 0 ? d / mx : 0.0, mx};
    if (d > 0) {
        if (mx == r) {
            out.h = std::fmod((g - b) / d, 6.0);
        } else if (mx == g) {
            out.h = (b - r) / d + 2.0;
        } else {
            out.h = (r - g) / d + 4.0;
        }
        out.h /= 6.0;
        if (out.h < 0) out.h += 1.0;
    }
    return out;
}

inline void hsv_to_rgb(const Hsv& in, double& r, double& g, double& b) {
    const double h = in.h * 6.0;
    const int i = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = in.v * (1.0 - in.s);
    const double q = in.v * (1.0 - in.s * f);
    const double t = in.v * (1.0 - in.s * (1.0 - f));
    switch (i) {
        case 0: r = in.v; g = t; b = p; break;
        case 1: r = q; g = in.v; b = p; break;
        case 2: r = p; g = in.v; b = t; break;
        case 3: r = p; g = q; b = in.v; break;
        case 4: r = t; g = p; b = in.v; break;
        default: r = in.v; g = p; b = q; break;
    }
}

}  // namespace detail

/// Rotates hue by `degrees` in HSV space.
inline ImageU8 hue_shift(const ImageU8& img, double degrees) {
    if (degrees == 0.0) return img;
    ImageU8 out = img;
    const double delta = degrees / 360.0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            detail::Hsv hsv = detail::rgb_to_hsv(img.at(x, y, 0) / 255.0,
                                                 img.at(x, y, 1) / 255.0,
                                                 img.at(x, y, 2) / 255.0);
            hsv.h = std::fmod(hsv.h + delta + 1.0, 1.0);
            double r, g, b;
            detail::hsv_to_rgb(hsv, r, g, b);
            out.at(x, y, 0) = detail::clamp_u8(r * 255.0);
            out.at(x, y, 1) = detail::clamp_u8(g * 255.0);
            out.at(x, y, 2) = detail::clamp_u8(b * 255.0);
        }
    }
    return out;
}

inline ImageU8 saturation_scale(const ImageU8& img, double factor) {
    if (factor == 1.0) return img;
    ImageU8 out = img;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            detail::Hsv hsv = detail::rgb_to_hsv(img.at(x, y, 0) / 255.0,
                                                 img.at(x, y, 1) / 255.0,
                                                 img.at(x, y, 2) / 255.0);
            hsv.s = std::clamp(hsv.s * factor, 0.0, 1.0);
            double r, g, b;
            detail::hsv_to_rgb(hsv, r, g, b);
            out.at(x, y, 0) = detail::clamp_u8(r * 255.0);
            out.at(x, y, 1) = detail::clamp_u8(g * 255.0);
            out.at(x, y, 2) = detail::clamp_u8(b * 255.0);
        }
    }
    return out;
}

inline ImageU8 brightness_scale(const ImageU8& img, double factor) {
    if (factor == 1.0) return img;
    ImageU8 out = img;
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        out.data()[i] = detail::clamp_u8(img.data()[i] * factor);
    }
    return out;
}

/// Scales deviation from the image's mean intensity.
inline ImageU8 contrast_scale(const ImageU8& img, double factor) {
    if (factor == 1.0) return img;
    double mean = 0.0;
    for (const auto v : img.data()) mean += v;
    mean /= static_cast<double>(img.data().size());
    ImageU8 out = img;
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        out.data()[i] = detail::clamp_u8(mean + (img.data()[i] - mean) * factor);
    }
    return out;
}

/// Separable Gaussian blur with symmetric-reflect borders; sigma 0 is the
/// identity.
inline ImageU8 gaussian_blur(const ImageU8& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    const int w = img.width(), h = img.height(), nc = img.channels();
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * nc);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * img.at(reflect_index(x + i, w), y, c);
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * nc + c] = acc;
            }
        }
    }
    ImageU8 out = img;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = reflect_index(y + i, h);
                    acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * nc + c];
                }
                out.at(x, y, c) = detail::clamp_u8(acc);
            }
        }
    }
    return out;
}

/// Unsharp masking: in + amount * (in - blur(in)).
inline ImageU8 sharpen(const ImageU8& img, double amount) {
    if (amount == 0.0) return img;
    const ImageU8 blurred = gaussian_blur(img, 1.0);
    ImageU8 out = img;
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        out.data()[i] = detail::clamp_u8(img.data()[i] +
                                         amount * (static_cast<double>(img.data()[i]) -
                                                   blurred.data()[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// HED stain-space perturbation
// ---------------------------------------------------------------------------

/// Ruifrok-Johnston H&E-DAB stain deconvolution constants (rows are the
/// optical-density unit vectors of hematoxylin, eosin and DAB).
struct HedMatrix {
    std::array<std::array<double, 3>, 3> stain;    // row-normalized
    std::array<std::array<double, 3>, 3> inverse;  // OD -> concentrations

    static const HedMatrix& get() {
        static const HedMatrix m = build();
        return m;
    }

private:
    static HedMatrix build() {
        HedMatrix m;
        m.stain = {{{0.65, 0.70, 0.29}, {0.07, 0.99, 0.11}, {0.27, 0.57, 0.78}}};
        for (auto& row : m.stain) {
            const double norm = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
            for (auto& v : row) v /= norm;
        }
        const auto& a = m.stain;
        const double det =
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
            a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
            a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        const double inv_det = 1.0 / det;
        // inverse[i][j] = cofactor(j, i) / det
        m.inverse = {{{(a[1][1] * a[2][2] - a[1][2] * a[2][1]) * inv_det,
                       (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * inv_det,
                       (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * inv_det},
                      {(a[1][2] * a[2][0] - a[1][0] * a[2][2]) * inv_det,
                       (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * inv_det,
                       (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * inv_det},
                      {(a[1][0] * a[2][1] - a[1][1] * a[2][0]) * inv_det,
                       (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * inv_det,
                       (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * inv_det}}};
        return m;
    }
};

/// Deconvolves into stain concentrations, applies per-channel scale and bias,
/// recomposes. scale = (1,1,1), bias = (0,0,0) is the identity.
inline ImageU8 hed_perturb(const ImageU8& img, const std::array<double, 3>& scale,
                           const std::array<double, 3>& bias) {
    if (scale == std::array<double, 3>{1.0, 1.0, 1.0} &&
        bias == std::array<double, 3>{0.0, 0.0, 0.0}) {
        return img;
    }
    const HedMatrix& m = HedMatrix::get();
    ImageU8 out = img;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double od[3];
            for (int c = 0; c < 3; ++c) {
                // +0.5/256 keeps intensity strictly positive for the log.
                od[c] = -std::log10((img.at(x, y, c) + 0.5) / 256.0);
            }
            double conc[3];
            for (int s = 0; s < 3; ++s) {
                conc[s] = od[0] * m.inverse[0][s] + od[1] * m.inverse[1][s] +
                          od[2] * m.inverse[2][s];
                conc[s] = conc[s] * scale[s] + bias[s];
            }
            for (int c = 0; c < 3; ++c) {
                const double od_new = conc[0] * m.stain[0][c] + conc[1] * m.stain[1][c] +
                                      conc[2] * m.stain[2][c];
                out.at(x, y, c) = detail::clamp_u8(std::pow(10.0, -od_new) * 256.0 - 0.5);
            }
        }
    }
    return out;
}

}  // namespace mito::augment
