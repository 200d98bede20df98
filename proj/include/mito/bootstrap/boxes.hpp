#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mito/core/image.hpp"
#include "mito/core/types.hpp"
#include "mito/dataio/manifest.hpp"

namespace mito::bootstrap {

/// Largest 8-connected component of a thresholded soft mask.
struct ComponentInfo {
    BoundingBox box;  // tight pixel-extent box
    int area = 0;

    bool contains(int x, int y) const {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
        return member_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> member_;
};

/// Finds the largest connected component of pixels >= threshold
/// (8-connectivity; size ties broken by first appearance in row-major scan).
/// Empty thresholded masks yield nullopt — the "difficult" outcome.
inline std::optional<ComponentInfo> largest_component(const ImageF32& mask, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("largest_component: threshold must be in (0,1)");
    }
    const int w = mask.width(), h = mask.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, 0);
    int best_area = 0;
    int best_label = 0;
    int next_label = 0;
    std::vector<std::pair<int, int>> stack;

    auto flood = [&](int sx, int sy, int id, std::uint8_t* member) {
        int area = 0;
        stack.clear();
        stack.emplace_back(sx, sy);
        label[static_cast<std::size_t>(sy) * w + sx] = id;
        while (!stack.empty()) {
            const auto [cx, cy] = stack.back();
            stack.pop_back();
            if (member) member[static_cast<std::size_t>(cy) * w + cx] = 1;
            ++area;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = cx + dx, ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    auto& l = label[static_cast<std::size_t>(ny) * w + nx];
                    if (l == id || mask.at(nx, ny) < threshold) continue;
                    l = id;
                    stack.emplace_back(nx, ny);
                }
            }
        }
        return area;
    };

    std::pair<int, int> best_seed{-1, -1};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y) < threshold || label[static_cast<std::size_t>(y) * w + x] != 0) {
                continue;
            }
            const int area = flood(x, y, ++next_label, nullptr);
            if (area > best_area) {
                best_area = area;
                best_label = next_label;
                best_seed = {x, y};
            }
        }
    }
    if (best_label == 0) return std::nullopt;

    ComponentInfo info;
    info.width_ = w;
    info.height_ = h;
    info.member_.assign(static_cast<std::size_t>(w) * h, 0);
    info.area = flood(best_seed.first, best_seed.second, best_label + 1, info.member_.data());

    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!info.member_[static_cast<std::size_t>(y) * w + x]) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    info.box = BoundingBox(x0, y0, x1 + 1, y1 + 1);
    return info;
}

/// Tight box over the largest component; nullopt flags a difficult case.
inline std::optional<BoundingBox> mask_to_box(const ImageF32& mask, double threshold) {
    const auto comp = largest_component(mask, threshold);
    if (!comp) return std::nullopt;
    return comp->box;
}

struct BoxStatistics {
    double mean_diagonal = 0.0;
    double std_diagonal = 0.0;  // population standard deviation
    long count = 0;
};

/// Mean and population standard deviation of annotation box diagonals.
inline BoxStatistics box_statistics(const dataio::DatasetManifest& manifest) {
    std::vector<double> diagonals;
    for (const auto& slide : manifest.slides) {
        for (const auto& ann : slide.annotations) {
            if (ann.box) diagonals.push_back(ann.box->diagonal());
        }
    }
    if (diagonals.empty()) {
        throw std::runtime_error("box_statistics: manifest contains no bounding boxes");
    }
    BoxStatistics stats;
    stats.count = static_cast<long>(diagonals.size());
    for (double d : diagonals) stats.mean_diagonal += d;
    stats.mean_diagonal /= static_cast<double>(diagonals.size());
    for (double d : diagonals) {
        const double dev = d - stats.mean_diagonal;
        stats.std_diagonal += dev * dev;
    }
    stats.std_diagonal = std::sqrt(stats.std_diagonal / static_cast<double>(diagonals.size()));
    return stats;
}

}  // namespace mito::bootstrap
