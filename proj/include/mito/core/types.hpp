#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mito/core/image.hpp"

namespace mito {

/// A slide-scanner appearance domain. Four devices are built in; further
/// domains can be registered by name for unseen-scanner experiments.
struct ScannerDomain {
    std::string name;
    bool annotated = true;

    bool operator==(const ScannerDomain& other) const { return name == other.name; }
    bool operator!=(const ScannerDomain& other) const { return name != other.name; }
    bool operator<(const ScannerDomain& other) const { return name < other.name; }

    static ScannerDomain XR() { return {"XR", true}; }
    static ScannerDomain S360() { return {"S360", true}; }
    static ScannerDomain CS2() { return {"CS2", true}; }
    static ScannerDomain GT450() { return {"GT450", false}; }  // no annotations available

    static const std::array<ScannerDomain, 4>& builtin() {
        static const std::array<ScannerDomain, 4> domains = {XR(), S360(), CS2(), GT450()};
        return domains;
    }

    /// Resolves a name against the built-in set; unknown names become open
    /// extension domains, annotated unless stated otherwise.
    static ScannerDomain from_name(const std::string& name, bool annotated_if_unknown = true) {
        for (const auto& d : builtin()) {
            if (d.name == name) return d;
        }
        return {name, annotated_if_unknown};
    }
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point& other) const { return x == other.x && y == other.y; }
};

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned box in continuous pixel coordinates; pixel (i, j) occupies
/// [i, i+1) x [j, j+1), so a single-pixel box at (5, 7) is (5, 7, 6, 8).
struct BoundingBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    BoundingBox() = default;
    BoundingBox(double x0_, double y0_, double x1_, double y1_)
        : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
        if (!(x1 > x0) || !(y1 > y0)) {
            throw std::invalid_argument("BoundingBox: requires x1 > x0 and y1 > y0");
        }
    }

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double diagonal() const { return std::hypot(x1 - x0, y1 - y0); }
    Point center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }

    bool contains(const Point& p) const {
        return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
    }

    bool operator==(const BoundingBox& other) const {
        return x0 == other.x0 && y0 == other.y0 && x1 == other.x1 && y1 == other.y1;
    }
};

enum class AnnotationLabel { kMitosis, kHardNegative };

inline std::string to_string(AnnotationLabel label) {
    return label == AnnotationLabel::kMitosis ? "mitotic figure" : "hard negative";
}

struct MitosisAnnotation {
    std::int64_t id = 0;
    Point centroid;
    AnnotationLabel label = AnnotationLabel::kMitosis;
    std::optional<BoundingBox> box;
    std::optional<ImageF32> mask;        // soft mask in [0,1], aligned to `box`
    std::string mask_path;               // relative raster path when persisted
};

/// An H&E image region with scanner-domain label.
struct Frame {
    ImageU8 pixels;                      // RGB, 8 bit per channel
    ScannerDomain domain;
    std::string slide_id;
    double microns_per_pixel = 0.0;      // carried as metadata only

    int width() const { return pixels.width(); }
    int height() const { return pixels.height(); }

    bool contains(const Point& p) const {
        return p.x >= 0 && p.x < width() && p.y >= 0 && p.y < height();
    }
};

/// One cascade candidate with its per-stage scores.
struct Detection {
    Point centroid;
    BoundingBox box;
    double detector_score = 0.0;
    std::vector<double> classifier_scores;      // one per ensemble member
    std::optional<double> merged_score;         // defined only after ensemble merge

    bool operator==(const Detection& other) const {
        return centroid == other.centroid && box == other.box &&
               detector_score == other.detector_score &&
               classifier_scores == other.classifier_scores &&
               merged_score == other.merged_score;
    }
};

/// One of the 8 symmetries of the square. Index encoding:
/// 0..3 = rotation by 90deg clockwise, `index` times;
/// 4..7 = horizontal flip followed by rotation by 90deg clockwise, `index - 4` times.
struct DihedralTransform {
    int index = 0;

    explicit DihedralTransform(int idx = 0) : index(idx) {
        if (idx < 0 || idx > 7) {
            throw std::invalid_argument("DihedralTransform: index must be in 0..7");
        }
    }

    /// Rotations invert to the opposite rotation; every flipped element is an involution.
    DihedralTransform inverse() const {
        if (index < 4) return DihedralTransform((4 - index) % 4);
        return DihedralTransform(index);
    }

    bool operator==(const DihedralTransform& other) const { return index == other.index; }

    static constexpr int kCount = 8;
};

}  // namespace mito
