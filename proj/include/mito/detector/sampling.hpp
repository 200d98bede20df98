#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mito/core/geometry.hpp"
#include "mito/core/image.hpp"
#include "mito/core/random.hpp"
#include "mito/core/types.hpp"

namespace mito::detector {

struct PatchSample {
    ImageU8 patch;
    std::vector<BoundingBox> boxes;  // patch coordinates, fully inside the patch
    int origin_x = 0;                // patch coords + origin = frame coords, exactly
    int origin_y = 0;
};

namespace detail {

/// Crop with arbitrary (possibly negative) origin; out-of-frame area filled
/// by symmetric reflection.
inline ImageU8 crop_reflect(const ImageU8& raster, int ox, int oy, int size) {
    ImageU8 out(size, size, raster.channels());
    for (int y = 0; y < size; ++y) {
        const int sy = reflect_index(oy + y, raster.height());
        for (int x = 0; x < size; ++x) {
            const int sx = reflect_index(ox + x, raster.width());
            for (int c = 0; c < raster.channels(); ++c) {
                out.at(x, y, c) = raster.at(sx, sy, c);
            }
        }
    }
    return out;
}

/// Origin interval along one axis keeping [b0, b1] fully inside a
/// size-length window, clamped into the frame when it fits.
inline std::pair<int, int> origin_range(double b0, double b1, int frame_len, int size) {
    int lo = static_cast<int>(std::ceil(b1)) - size;
    int hi = static_cast<int>(std::floor(b0));
    if (frame_len >= size) {
        lo = std::max(lo, 0);
        hi = std::min(hi, frame_len - size);
    } else {
        // Frame smaller than the patch: center it, reflection fills the rest.
        lo = hi = (frame_len - size) / 2;
    }
    if (lo > hi) {
        throw std::invalid_argument("sample_positive_patch: box does not fit in the patch");
    }
    return {lo, hi};
}

}  // namespace detail

/// Samples a training patch guaranteed to contain at least one complete
/// mitosis box: an anchor box is drawn uniformly, then the patch origin is
/// drawn uniformly over all positions keeping that box fully inside. All
/// other boxes fully inside the window are carried along; frames smaller
/// than the patch are reflection-padded.
inline PatchSample sample_positive_patch(const ImageU8& frame,
                                         const std::vector<BoundingBox>& boxes, Rng& rng,
                                         int size) {
    if (boxes.empty()) {
        throw std::invalid_argument("sample_positive_patch: frame has no mitosis boxes");
    }
    if (size <= 0) throw std::invalid_argument("sample_positive_patch: size must be positive");

    const BoundingBox& anchor = boxes[rng.uniform_index(boxes.size())];
    const auto [x_lo, x_hi] = detail::origin_range(anchor.x0, anchor.x1, frame.width(), size);
    const auto [y_lo, y_hi] = detail::origin_range(anchor.y0, anchor.y1, frame.height(), size);
    const int ox = x_lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(x_hi - x_lo) + 1));
    const int oy = y_lo + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(y_hi - y_lo) + 1));

    PatchSample sample;
    sample.origin_x = ox;
    sample.origin_y = oy;
    sample.patch = detail::crop_reflect(frame, ox, oy, size);
    for (const auto& box : boxes) {
        if (box.x0 >= ox && box.y0 >= oy && box.x1 <= ox + size && box.y1 <= oy + size) {
            sample.boxes.push_back(BoundingBox(box.x0 - ox, box.y0 - oy,
                                               box.x1 - ox, box.y1 - oy));
        }
    }
    return sample;
}

}  // namespace mito::detector
