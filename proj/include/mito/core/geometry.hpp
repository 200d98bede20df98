#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "mito/core/image.hpp"
#include "mito/core/types.hpp"

namespace mito {

// ---------------------------------------------------------------------------
// Patch extraction and resizing
// ---------------------------------------------------------------------------

/// size x size crop centered on `center` (rounded to the nearest pixel).
/// Out-of-frame area is filled by symmetric reflection; interior crops equal
/// the plain crop pointwise. Throws if the center lies outside the raster.
template <typename T>
Image<T> extract_patch(const Image<T>& raster, const Point& center, int size) {
    if (size <= 0) throw std::invalid_argument("extract_patch: size must be positive");
    if (center.x < 0 || center.x >= raster.width() ||
        center.y < 0 || center.y >= raster.height()) {
        throw std::invalid_argument("extract_patch: center outside frame bounds");
    }
    const int cx = static_cast<int>(std::lround(center.x));
    const int cy = static_cast<int>(std::lround(center.y));
    const int x0 = cx - size / 2;
    const int y0 = cy - size / 2;

    Image<T> out(size, size, raster.channels());
    for (int y = 0; y < size; ++y) {
        const int sy = reflect_index(y0 + y, raster.height());
        for (int x = 0; x < size; ++x) {
            const int sx = reflect_index(x0 + x, raster.width());
            for (int c = 0; c < raster.channels(); ++c) {
                out.at(x, y, c) = raster.at(sx, sy, c);
            }
        }
    }
    return out;
}

inline ImageU8 extract_patch(const Frame& frame, const Point& center, int size) {
    return extract_patch(frame.pixels, center, size);
}

inline float lerp(float a, float b, float t) { return a + (b - a) * t; }

namespace detail {

/// Half-pixel source coordinate for bilinear sampling, clamped to the grid.
inline void sample_coords(int out_idx, int out_size, int in_size,
                          int& i0, int& i1, float& frac) {
    const double scale = static_cast<double>(in_size) / out_size;
    double pos = (out_idx + 0.5) * scale - 0.5;
    if (pos < 0.0) pos = 0.0;
    const double last = in_size - 1;
    if (pos > last) pos = last;
    i0 = static_cast<int>(pos);
    if (i0 > in_size - 1) i0 = in_size - 1;
    i1 = i0 + 1 < in_size ? i0 + 1 : i0;
    frac = static_cast<float>(pos - i0);
}

}  // namespace detail

/// Bilinear resize of a square patch to target x target. Uses half-pixel
/// coordinate mapping; constant inputs are preserved exactly and all outputs
/// stay inside the input value range.
template <typename T>
Image<T> resize_patch(const Image<T>& patch, int target) {
    if (patch.width() != patch.height()) {
        throw std::invalid_argument("resize_patch: input must be square");
    }
    if (target <= 0) throw std::invalid_argument("resize_patch: target must be positive");
    if (target == patch.width()) return patch;

    const int in = patch.width();
    Image<T> out(target, target, patch.channels());
    std::vector<int> x0(target), x1(target);
    std::vector<float> fx(target);
    for (int x = 0; x < target; ++x) detail::sample_coords(x, target, in, x0[x], x1[x], fx[x]);

    for (int y = 0; y < target; ++y) {
        int y0, y1;
        float fy;
        detail::sample_coords(y, target, in, y0, y1, fy);
        for (int x = 0; x < target; ++x) {
            for (int c = 0; c < patch.channels(); ++c) {
                const float top = lerp(static_cast<float>(patch.at(x0[x], y0, c)),
                                       static_cast<float>(patch.at(x1[x], y0, c)), fx[x]);
                const float bot = lerp(static_cast<float>(patch.at(x0[x], y1, c)),
                                       static_cast<float>(patch.at(x1[x], y1, c)), fx[x]);
                const float v = lerp(top, bot, fy);
                if constexpr (std::is_integral_v<T>) {
                    out.at(x, y, c) = static_cast<T>(v + 0.5f);
                } else {
                    out.at(x, y, c) = static_cast<T>(v);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tiling
// ---------------------------------------------------------------------------

struct TileRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool operator==(const TileRect& other) const {
        return x == other.x && y == other.y && width == other.width && height == other.height;
    }
};

/// 1-D tile origins with stride tile - overlap; the last origin is clamped so
/// the tile ends at the frame edge. A tile not smaller than the frame yields {0}.
inline std::vector<int> tile_origins(int length, int tile, int overlap) {
    if (tile <= 0 || overlap < 0 || tile <= overlap) {
        throw std::invalid_argument("tile_origins: requires tile > overlap >= 0");
    }
    std::vector<int> origins;
    if (tile >= length) {
        origins.push_back(0);
        return origins;
    }
    const int stride = tile - overlap;
    for (int x = 0;; x += stride) {
        if (x + tile >= length) {
            origins.push_back(length - tile);
            break;
        }
        origins.push_back(x);
    }
    return origins;
}

/// Row-major tile rectangles covering a frame. Tiles never exceed frame
/// bounds; a tile larger than the frame is clamped to the frame extent.
inline std::vector<TileRect> tile_grid(int frame_width, int frame_height, int tile, int overlap) {
    if (frame_width <= 0 || frame_height <= 0) {
        throw std::invalid_argument("tile_grid: frame dimensions must be positive");
    }
    const auto xs = tile_origins(frame_width, tile, overlap);
    const auto ys = tile_origins(frame_height, tile, overlap);
    const int tw = std::min(tile, frame_width);
    const int th = std::min(tile, frame_height);
    std::vector<TileRect> rects;
    rects.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) {
            rects.push_back({x, y, tw, th});
        }
    }
    return rects;
}

template <typename T>
Image<T> crop(const Image<T>& raster, const TileRect& rect) {
    if (rect.x < 0 || rect.y < 0 || rect.width <= 0 || rect.height <= 0 ||
        rect.x + rect.width > raster.width() || rect.y + rect.height > raster.height()) {
        throw std::invalid_argument("crop: rect outside raster bounds");
    }
    Image<T> out(rect.width, rect.height, raster.channels());
    for (int y = 0; y < rect.height; ++y) {
        for (int x = 0; x < rect.width; ++x) {
            for (int c = 0; c < raster.channels(); ++c) {
                out.at(x, y, c) = raster.at(rect.x + x, rect.y + y, c);
            }
        }
    }
    return out;
}

template <typename T>
std::vector<std::pair<TileRect, Image<T>>> tile_frame(const Image<T>& raster, int tile, int overlap) {
    std::vector<std::pair<TileRect, Image<T>>> out;
    for (const auto& rect : tile_grid(raster.width(), raster.height(), tile, overlap)) {
        out.emplace_back(rect, crop(raster, rect));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dihedral group of the square
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Image<T> rot90cw(const Image<T>& in) {
    const int n = in.width();
    Image<T> out(in.height(), in.width(), in.channels());
    (void)n;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < in.channels(); ++c) {
                out.at(x, y, c) = in.at(y, in.height() - 1 - x, c);
            }
        }
    }
    return out;
}

template <typename T>
Image<T> hflip(const Image<T>& in) {
    Image<T> out(in.width(), in.height(), in.channels());
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            for (int c = 0; c < in.channels(); ++c) {
                out.at(x, y, c) = in.at(in.width() - 1 - x, y, c);
            }
        }
    }
    return out;
}

}  // namespace detail

/// Applies one of the 8 square symmetries as an exact pixel permutation.
/// Restricted to square rasters (90/270-degree rotations do not preserve
/// rectangular shapes).
template <typename T>
Image<T> apply_dihedral(const Image<T>& raster, const DihedralTransform& t) {
    if (raster.width() != raster.height()) {
        throw std::invalid_argument("apply_dihedral: raster must be square");
    }
    Image<T> out = raster;
    if (t.index >= 4) out = detail::hflip(out);
    for (int r = 0; r < t.index % 4; ++r) out = detail::rot90cw(out);
    return out;
}

/// Continuous-coordinate companion of apply_dihedral for a square frame of
/// side n: pixel (i, j) occupies [i, i+1) x [j, j+1), so the point map for a
/// clockwise quarter turn is (x, y) -> (n - y, x).
inline Point transform_point(const Point& p, const DihedralTransform& t, int n) {
    Point q = p;
    if (t.index >= 4) q = {n - q.x, q.y};
    for (int r = 0; r < t.index % 4; ++r) q = {n - q.y, q.x};
    return q;
}

inline BoundingBox transform_box(const BoundingBox& box, const DihedralTransform& t, int n) {
    const Point a = transform_point({box.x0, box.y0}, t, n);
    const Point b = transform_point({box.x1, box.y1}, t, n);
    return BoundingBox(std::min(a.x, b.x), std::min(a.y, b.y),
                       std::max(a.x, b.x), std::max(a.y, b.y));
}

/// Group composition: returns the transform equivalent to applying `first`
/// and then `second` (useful for verifying closure).
inline DihedralTransform compose(const DihedralTransform& first, const DihedralTransform& second) {
    // Track where a probe square ends up; identify the composite by action on
    // a 2x2 raster with distinct entries.
    Image<int> probe(2, 2, 1);
    probe.at(0, 0) = 0; probe.at(1, 0) = 1; probe.at(0, 1) = 2; probe.at(1, 1) = 3;
    const Image<int> target = apply_dihedral(apply_dihedral(probe, first), second);
    for (int k = 0; k < DihedralTransform::kCount; ++k) {
        if (apply_dihedral(probe, DihedralTransform(k)) == target) return DihedralTransform(k);
    }
    throw std::logic_error("compose: dihedral group not closed");
}

}  // namespace mito
