#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mito/bootstrap/boxes.hpp"
#include "mito/bootstrap/tta.hpp"
#include "mito/dataio/image_io.hpp"
#include "mito/dataio/manifest.hpp"

namespace mito::bootstrap {

/// Manually annotated seed masks, keyed by (slide_id, annotation_id). Each
/// raster is a binary patch-sized mask centered on the annotation centroid.
struct SeedMaskSet {
    struct Entry {
        std::string slide_id;
        std::int64_t annotation_id = 0;
        ImageU8 mask;  // 1 channel, values 0/255
    };
    std::vector<Entry> entries;

    const Entry* find(const std::string& slide_id, std::int64_t annotation_id) const {
        for (const auto& e : entries) {
            if (e.slide_id == slide_id && e.annotation_id == annotation_id) return &e;
        }
        return nullptr;
    }
};

/// Loads `{slide_id}_{annotation_id}.png` rasters from a directory. Entries
/// must reference existing mitosis annotations.
inline SeedMaskSet load_seed_masks(const std::filesystem::path& dir,
                                   const dataio::DatasetManifest& manifest) {
    SeedMaskSet seeds;
    if (!std::filesystem::exists(dir)) {
        throw std::runtime_error("load_seed_masks: no such directory " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const std::string stem = file.stem().string();
        const auto sep = stem.rfind('_');
        if (sep == std::string::npos) {
            throw std::runtime_error("load_seed_masks: bad file name " + file.string() +
                                     " (expected {slide_id}_{annotation_id}.png)");
        }
        SeedMaskSet::Entry e;
        e.slide_id = stem.substr(0, sep);
        e.annotation_id = std::stoll(stem.substr(sep + 1));
        const dataio::SlideRecord* slide = manifest.find(e.slide_id);
        bool known = false;
        if (slide) {
            for (const auto& ann : slide->annotations) {
                known = known || (ann.id == e.annotation_id &&
                                  ann.label == AnnotationLabel::kMitosis);
            }
        }
        if (!known) {
            throw std::runtime_error("load_seed_masks: " + file.string() +
                                     " references no mitosis annotation");
        }
        e.mask = dataio::read_png(file);
        if (e.mask.channels() != 1) {
            throw std::runtime_error("load_seed_masks: mask must be grayscale: " + file.string());
        }
        seeds.entries.push_back(std::move(e));
    }
    return seeds;
}

/// Segmentation backbone that can be fit on the seed set.
class TrainableSegmentationBackbone : public SegmentationBackbone {
public:
    /// (patch, binary target mask) pairs; throws on training failure.
    virtual void train(const std::vector<std::pair<ImageU8, ImageF32>>& examples) = 0;
};

using SegmentationBackboneFactory = std::function<std::unique_ptr<TrainableSegmentationBackbone>()>;

struct BootstrapConfig {
    int patch_size = 128;     // > 3 sigma above the expected box diagonal
    double threshold = 0.5;   // mask binarization
    int min_area = 9;         // thresholded area below this is "difficult"
};

struct DifficultCase {
    std::string slide_id;
    std::int64_t annotation_id = 0;
    std::string patch_path;  // inspection patch, when exported
};

struct BootstrapResult {
    dataio::DatasetManifest manifest;
    std::vector<DifficultCase> difficult;
    BoxStatistics stats;  // over the boxes present after bootstrapping
};

namespace detail {

inline ImageF32 mask_to_float(const ImageU8& mask) {
    ImageF32 out(mask.width(), mask.height(), 1);
    for (std::size_t i = 0; i < mask.data().size(); ++i) {
        out.data()[i] = mask.data()[i] >= 128 ? 1.f : 0.f;
    }
    return out;
}

struct PatchOrigin {
    int x = 0;
    int y = 0;
};

inline PatchOrigin patch_origin(const Point& centroid, int size) {
    return {static_cast<int>(std::lround(centroid.x)) - size / 2,
            static_cast<int>(std::lround(centroid.y)) - size / 2};
}

/// Component box in patch coordinates -> frame coordinates, clamped to the
/// frame (reflect-padded patches can reach outside it).
inline std::optional<BoundingBox> box_to_frame(const BoundingBox& in_patch,
                                               const PatchOrigin& origin, int frame_w,
                                               int frame_h) {
    const double x0 = std::max(0.0, in_patch.x0 + origin.x);
    const double y0 = std::max(0.0, in_patch.y0 + origin.y);
    const double x1 = std::min(static_cast<double>(frame_w), in_patch.x1 + origin.x);
    const double y1 = std::min(static_cast<double>(frame_h), in_patch.y1 + origin.y);
    if (!(x1 > x0 && y1 > y0)) return std::nullopt;
    return BoundingBox(x0, y0, x1, y1);
}

}  // namespace detail

/// Grows boxes (and soft masks) for every mitosis annotation: trains the
/// segmentation backbone on the seed set, then runs 8-fold TTA around each
/// remaining known centroid. Cases whose mask is empty, smaller than
/// min_area, or missing the centroid are flagged difficult for manual
/// completion. Centroids and labels are never modified.
inline BootstrapResult bootstrap_dataset(const dataio::DatasetManifest& manifest,
                                         dataio::FrameStore& frames,
                                         const SeedMaskSet& seed_masks,
                                         const SegmentationBackboneFactory& backbone_factory,
                                         const BootstrapConfig& cfg = {},
                                         const std::filesystem::path& difficult_patch_dir = {}) {
    if (seed_masks.entries.empty()) {
        throw std::invalid_argument("bootstrap_dataset: seed mask set is empty");
    }
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
        throw std::invalid_argument("bootstrap_dataset: threshold must be in (0,1)");
    }

    // Assemble training pairs from the seed set.
    std::vector<std::pair<ImageU8, ImageF32>> examples;
    for (const auto& entry : seed_masks.entries) {
        const dataio::SlideRecord* slide = manifest.find(entry.slide_id);
        if (!slide) {
            throw std::runtime_error("bootstrap_dataset: seed mask for unknown slide " +
                                     entry.slide_id);
        }
        const MitosisAnnotation* ann = nullptr;
        for (const auto& a : slide->annotations) {
            if (a.id == entry.annotation_id) ann = &a;
        }
        if (!ann || ann->label != AnnotationLabel::kMitosis) {
            throw std::runtime_error("bootstrap_dataset: seed mask references no mitosis " +
                                     entry.slide_id + "_" + std::to_string(entry.annotation_id));
        }
        if (entry.mask.width() != cfg.patch_size || entry.mask.height() != cfg.patch_size) {
            throw std::runtime_error("bootstrap_dataset: seed mask size must match patch_size");
        }
        const Frame& frame = frames.get(entry.slide_id);
        examples.emplace_back(extract_patch(frame, ann->centroid, cfg.patch_size),
                              detail::mask_to_float(entry.mask));
    }

    auto backbone = backbone_factory();
    backbone->train(examples);  // training failure propagates and aborts

    BootstrapResult result;
    result.manifest = manifest;
    if (!difficult_patch_dir.empty()) std::filesystem::create_directories(difficult_patch_dir);

    for (auto& slide : result.manifest.slides) {
        for (auto& ann : slide.annotations) {
            if (ann.label != AnnotationLabel::kMitosis) continue;
            const detail::PatchOrigin origin = detail::patch_origin(ann.centroid, cfg.patch_size);
            ImageF32 soft;
            if (const auto* seed = seed_masks.find(slide.slide_id, ann.id)) {
                soft = detail::mask_to_float(seed->mask);
            } else {
                const Frame& frame = frames.get(slide.slide_id);
                soft = tta_segment(*backbone, extract_patch(frame, ann.centroid, cfg.patch_size));
            }

            const auto comp = largest_component(soft, cfg.threshold);
            const int px = static_cast<int>(std::floor(ann.centroid.x)) - origin.x;
            const int py = static_cast<int>(std::floor(ann.centroid.y)) - origin.y;
            std::optional<BoundingBox> frame_box;
            if (comp && comp->area >= cfg.min_area && comp->contains(px, py)) {
                frame_box = detail::box_to_frame(comp->box, origin, slide.width, slide.height);
            }
            if (frame_box && frame_box->contains(ann.centroid)) {
                ann.box = frame_box;
                ann.mask = soft;
            } else {
                DifficultCase difficult;
                difficult.slide_id = slide.slide_id;
                difficult.annotation_id = ann.id;
                if (!difficult_patch_dir.empty()) {
                    const Frame& frame = frames.get(slide.slide_id);
                    const auto path = difficult_patch_dir /
                                      (slide.slide_id + "_" + std::to_string(ann.id) + ".png");
                    dataio::write_png(path, extract_patch(frame, ann.centroid, cfg.patch_size));
                    difficult.patch_path = path.string();
                }
                result.difficult.push_back(std::move(difficult));
            }
        }
    }

    bool any_box = false;
    for (const auto& slide : result.manifest.slides) {
        for (const auto& ann : slide.annotations) any_box = any_box || ann.box.has_value();
    }
    if (any_box) result.stats = box_statistics(result.manifest);
    return result;
}

inline void save_difficult_list(const std::vector<DifficultCase>& difficult,
                                const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& d : difficult) {
        doc.push_back({{"slide_id", d.slide_id},
                       {"annotation_id", d.annotation_id},
                       {"patch_path", d.patch_path}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_difficult_list: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

/// Merges manually completed masks (same file contract as seed masks) back
/// into the manifest, replacing the external annotation-tool step.
inline int merge_manual_masks(dataio::DatasetManifest& manifest,
                              const std::filesystem::path& dir, const BootstrapConfig& cfg = {}) {
    const SeedMaskSet masks = load_seed_masks(dir, manifest);
    int merged = 0;
    for (const auto& entry : masks.entries) {
        for (auto& slide : manifest.slides) {
            if (slide.slide_id != entry.slide_id) continue;
            for (auto& ann : slide.annotations) {
                if (ann.id != entry.annotation_id) continue;
                const ImageF32 soft = detail::mask_to_float(entry.mask);
                const auto box = mask_to_box(soft, cfg.threshold);
                if (!box) {
                    throw std::runtime_error("merge_manual_masks: empty mask for " +
                                             entry.slide_id + "_" +
                                             std::to_string(entry.annotation_id));
                }
                const detail::PatchOrigin origin =
                    detail::patch_origin(ann.centroid, entry.mask.width());
                ann.box = detail::box_to_frame(*box, origin, slide.width, slide.height);
                ann.mask = soft;
                ++merged;
            }
        }
    }
    return merged;
}

}  // namespace mito::bootstrap
