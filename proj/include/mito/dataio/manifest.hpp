#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/core/types.hpp"
#include "mito/dataio/image_io.hpp"

namespace mito::dataio {

struct SlideRecord {
    std::string slide_id;
    ScannerDomain domain;
    std::string image_path;  // relative to the manifest directory unless absolute
    int width = 0;
    int height = 0;
    double microns_per_pixel = 0.0;
    std::vector<MitosisAnnotation> annotations;

    int mitosis_count() const {
        int n = 0;
        for (const auto& a : annotations) {
            if (a.label == AnnotationLabel::kMitosis) ++n;
        }
        return n;
    }
};

/// Dataset manifest: one JSON document with `images` and `annotations`
/// arrays keyed by integer ids (category 1 = mitotic figure, 2 = hard
/// negative), mirroring the object-detection distribution format.
struct DatasetManifest {
    std::vector<SlideRecord> slides;
    std::filesystem::path root;  // directory resolving relative image/mask paths

    const SlideRecord* find(const std::string& slide_id) const {
        for (const auto& s : slides) {
            if (s.slide_id == slide_id) return &s;
        }
        return nullptr;
    }

    std::filesystem::path resolve(const std::string& rel) const {
        std::filesystem::path p(rel);
        return p.is_absolute() ? p : root / p;
    }

    std::vector<ScannerDomain> domains() const {
        std::vector<ScannerDomain> out;
        for (const auto& s : slides) {
            if (std::find(out.begin(), out.end(), s.domain) == out.end()) {
                out.push_back(s.domain);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

namespace detail {

inline AnnotationLabel label_from_category(int category_id, const std::string& context) {
    if (category_id == 1) return AnnotationLabel::kMitosis;
    if (category_id == 2) return AnnotationLabel::kHardNegative;
    throw std::runtime_error("manifest: unknown category id " + std::to_string(category_id) +
                             " in " + context);
}

inline void validate_categories(const nlohmann::json& doc) {
    if (!doc.contains("categories")) return;
    for (const auto& cat : doc.at("categories")) {
        const int id = cat.at("id").get<int>();
        const std::string name = cat.at("name").get<std::string>();
        if ((id == 1 && name != "mitotic figure") || (id == 2 && name != "hard negative") ||
            (id != 1 && id != 2)) {
            throw std::runtime_error("manifest: unknown label \"" + name + "\" (category id " +
                                     std::to_string(id) + ")");
        }
    }
}

}  // namespace detail

/// Loads and validates a manifest. Every annotation is checked against its
/// frame bounds and the two-class label vocabulary; unannotated scanners must
/// not carry annotations.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in);

    detail::validate_categories(doc);

    DatasetManifest manifest;
    manifest.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    std::map<std::string, bool> annotated_override;
    if (doc.contains("scanners")) {
        for (const auto& sc : doc.at("scanners")) {
            annotated_override[sc.at("name").get<std::string>()] =
                sc.value("annotated", true);
        }
    }

    std::map<std::int64_t, std::size_t> slide_by_image_id;
    std::set<std::string> seen_ids;
    for (const auto& im : doc.value("images", nlohmann::json::array())) {
        SlideRecord slide;
        slide.slide_id = im.at("slide_id").get<std::string>();
        if (!seen_ids.insert(slide.slide_id).second) {
            throw std::runtime_error("load_manifest: duplicate slide_id " + slide.slide_id);
        }
        const std::string scanner = im.at("scanner").get<std::string>();
        slide.domain = ScannerDomain::from_name(scanner);
        if (auto it = annotated_override.find(scanner); it != annotated_override.end()) {
            slide.domain.annotated = it->second;
        }
        slide.image_path = im.value("file_name", "");
        slide.width = im.at("width").get<int>();
        slide.height = im.at("height").get<int>();
        slide.microns_per_pixel = im.value("microns_per_pixel", 0.0);
        if (slide.width <= 0 || slide.height <= 0) {
            throw std::runtime_error("load_manifest: non-positive frame size for slide " +
                                     slide.slide_id);
        }
        slide_by_image_id[im.at("id").get<std::int64_t>()] = manifest.slides.size();
        manifest.slides.push_back(std::move(slide));
    }

    for (const auto& an : doc.value("annotations", nlohmann::json::array())) {
        const std::int64_t image_id = an.at("image_id").get<std::int64_t>();
        const auto it = slide_by_image_id.find(image_id);
        if (it == slide_by_image_id.end()) {
            throw std::runtime_error("load_manifest: annotation " +
                                     an.at("id").dump() + " references unknown image id " +
                                     std::to_string(image_id));
        }
        SlideRecord& slide = manifest.slides[it->second];

        MitosisAnnotation ann;
        ann.id = an.at("id").get<std::int64_t>();
        ann.label = detail::label_from_category(an.at("category_id").get<int>(),
                                                "annotation " + std::to_string(ann.id));
        const auto& ctr = an.at("centroid");
        ann.centroid = {ctr.at(0).get<double>(), ctr.at(1).get<double>()};
        if (ann.centroid.x < 0 || ann.centroid.x >= slide.width ||
            ann.centroid.y < 0 || ann.centroid.y >= slide.height) {
            throw std::runtime_error("load_manifest: centroid out of bounds on slide " +
                                     slide.slide_id);
        }
        if (an.contains("bbox")) {
            const auto& bb = an.at("bbox");
            ann.box = BoundingBox(bb.at(0).get<double>(), bb.at(1).get<double>(),
                                  bb.at(2).get<double>(), bb.at(3).get<double>());
            if (!ann.box->contains(ann.centroid)) {
                throw std::runtime_error("load_manifest: centroid outside bbox on slide " +
                                         slide.slide_id);
            }
        }
        ann.mask_path = an.value("mask_path", "");
        slide.annotations.push_back(std::move(ann));
    }

    for (const auto& slide : manifest.slides) {
        if (!slide.domain.annotated && !slide.annotations.empty()) {
            throw std::runtime_error("load_manifest: unannotated scanner " + slide.domain.name +
                                     " carries annotations on slide " + slide.slide_id);
        }
    }
    return manifest;
}

inline void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["categories"] = nlohmann::json::array({
        {{"id", 1}, {"name", "mitotic figure"}},
        {{"id", 2}, {"name", "hard negative"}},
    });

    std::map<std::string, bool> scanners;
    for (const auto& slide : manifest.slides) scanners[slide.domain.name] = slide.domain.annotated;
    doc["scanners"] = nlohmann::json::array();
    for (const auto& [name, annotated] : scanners) {
        doc["scanners"].push_back({{"name", name}, {"annotated", annotated}});
    }

    doc["images"] = nlohmann::json::array();
    doc["annotations"] = nlohmann::json::array();
    std::int64_t image_id = 0;
    for (const auto& slide : manifest.slides) {
        ++image_id;
        doc["images"].push_back({
            {"id", image_id},
            {"slide_id", slide.slide_id},
            {"file_name", slide.image_path},
            {"width", slide.width},
            {"height", slide.height},
            {"scanner", slide.domain.name},
            {"microns_per_pixel", slide.microns_per_pixel},
        });
        for (const auto& ann : slide.annotations) {
            nlohmann::json a = {
                {"id", ann.id},
                {"image_id", image_id},
                {"category_id", ann.label == AnnotationLabel::kMitosis ? 1 : 2},
                {"centroid", {ann.centroid.x, ann.centroid.y}},
            };
            if (ann.box) a["bbox"] = {ann.box->x0, ann.box->y0, ann.box->x1, ann.box->y1};
            if (!ann.mask_path.empty()) a["mask_path"] = ann.mask_path;
            doc["annotations"].push_back(std::move(a));
        }
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

/// Access to frame pixels keyed by slide id.
class FrameStore {
public:
    virtual ~FrameStore() = default;
    virtual const Frame& get(const std::string& slide_id) = 0;
};

/// Loads frames from the manifest's image files, caching them in memory.
class DirectoryFrameStore : public FrameStore {
public:
    explicit DirectoryFrameStore(const DatasetManifest& manifest) : manifest_(manifest) {}

    const Frame& get(const std::string& slide_id) override {
        auto it = cache_.find(slide_id);
        if (it != cache_.end()) return it->second;
        const SlideRecord* slide = manifest_.find(slide_id);
        if (!slide) throw std::runtime_error("FrameStore: unknown slide " + slide_id);
        Frame frame;
        frame.pixels = ensure_rgb(read_image(manifest_.resolve(slide->image_path)));
        if (frame.pixels.width() != slide->width || frame.pixels.height() != slide->height) {
            throw std::runtime_error("FrameStore: image size disagrees with manifest for slide " +
                                     slide_id);
        }
        frame.domain = slide->domain;
        frame.slide_id = slide_id;
        frame.microns_per_pixel = slide->microns_per_pixel;
        return cache_.emplace(slide_id, std::move(frame)).first->second;
    }

private:
    const DatasetManifest& manifest_;
    std::map<std::string, Frame> cache_;
};

/// In-memory frames (tests, synthetic corpora).
class MemoryFrameStore : public FrameStore {
public:
    void put(Frame frame) { frames_[frame.slide_id] = std::move(frame); }

    const Frame& get(const std::string& slide_id) override {
        auto it = frames_.find(slide_id);
        if (it == frames_.end()) throw std::runtime_error("FrameStore: unknown slide " + slide_id);
        return it->second;
    }

private:
    std::map<std::string, Frame> frames_;
};

}  // namespace mito::dataio
