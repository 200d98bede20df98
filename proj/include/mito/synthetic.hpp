#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mito/core/geometry.hpp"
#include "mito/core/random.hpp"
#include "mito/core/types.hpp"
#include "mito/dataio/image_io.hpp"
#include "mito/dataio/manifest.hpp"

namespace mito::synthetic {

/// Synthetic two-domain H&E look-alike corpus for demos and end-to-end
/// verification: high-contrast elliptical "mitoses", same-colored ring
/// look-alikes annotated as hard negatives, and off-color distractor blobs,
/// rendered over textured background in two global color domains.
struct SynthConfig {
    int frames_per_domain = 6;
    int frame_size = 600;
    int min_mitoses = 3;
    int max_mitoses = 7;
    int rings_per_frame = 4;   // hard-negative look-alikes
    int blobs_per_frame = 4;   // unannotated off-color distractors
    bool with_boxes = true;    // attach ground-truth boxes to mitoses
    std::uint64_t seed = 0;
};

struct SynthCorpus {
    dataio::DatasetManifest manifest;
    std::map<std::string, Frame> frames;

    void fill_store(dataio::MemoryFrameStore& store) const {
        for (const auto& [id, frame] : frames) store.put(frame);
    }
};

namespace detail {

struct Rgb {
    double r, g, b;
};

/// Domain "synthB" differs from "synthA" by a global color transform, the
/// kind of shift a per-pixel residual generator can learn.
inline Rgb domain_shift(const Rgb& c, bool shifted) {
    if (!shifted) return c;
    return {c.r * 0.80 + 10.0, c.g * 0.95 + 4.0, c.b * 1.08 + 6.0};
}

inline void put_pixel(ImageU8& img, int x, int y, const Rgb& c) {
    img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(c.r, 0.0, 255.0));
    img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(c.g, 0.0, 255.0));
    img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(c.b, 0.0, 255.0));
}

struct Ellipse {
    double cx, cy, a, b, theta;

    bool inside(double x, double y, double scale = 1.0) const {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / (a * scale);
        const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / (b * scale);
        return u * u + v * v <= 1.0;
    }
};

}  // namespace detail

inline SynthCorpus generate_corpus(const SynthConfig& cfg) {
    SynthCorpus corpus;
    Rng master(cfg.seed);

    const std::vector<std::pair<std::string, bool>> domains = {{"synthA", false},
                                                               {"synthB", true}};
    for (const auto& [domain_name, shifted] : domains) {
        for (int f = 0; f < cfg.frames_per_domain; ++f) {
            Rng rng = master.derive(domain_name + "_" + std::to_string(f));
            const int n = cfg.frame_size;

            dataio::SlideRecord slide;
            slide.slide_id = domain_name + "_" + std::to_string(f);
            slide.domain = ScannerDomain::from_name(domain_name);
            slide.width = slide.height = n;
            slide.microns_per_pixel = 0.25;
            slide.image_path = "images/" + slide.slide_id + ".png";

            Frame frame;
            frame.slide_id = slide.slide_id;
            frame.domain = slide.domain;
            frame.microns_per_pixel = slide.microns_per_pixel;
            frame.pixels = ImageU8(n, n, 3);

            // Textured background with a mild diagonal gradient.
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    const double g = 8.0 * (x + y) / (2.0 * n);
                    detail::Rgb c{228 + g + rng.normal(0, 4), 200 + g + rng.normal(0, 4),
                                  214 + g + rng.normal(0, 4)};
                    detail::put_pixel(frame.pixels, x, y, detail::domain_shift(c, shifted));
                }
            }

            // Non-overlapping object placement.
            std::vector<Point> taken;
            auto place = [&](double margin) {
                for (int attempt = 0; attempt < 500; ++attempt) {
                    Point p{rng.uniform(margin, n - margin), rng.uniform(margin, n - margin)};
                    bool ok = true;
                    for (const auto& q : taken) ok = ok && distance(p, q) > 44.0;
                    if (ok) {
                        taken.push_back(p);
                        return p;
                    }
                }
                throw std::runtime_error("generate_corpus: cannot place objects");
            };

            std::int64_t next_id = 0;
            const int mitoses = cfg.min_mitoses +
                                static_cast<int>(rng.uniform_index(
                                    static_cast<std::size_t>(cfg.max_mitoses - cfg.min_mitoses) + 1));
            for (int m = 0; m < mitoses; ++m) {
                const Point c = place(30.0);
                const detail::Ellipse e{c.x, c.y, rng.uniform(4.5, 7.0), rng.uniform(3.5, 5.5),
                                        rng.uniform(0.0, 3.14159)};
                double x0 = n, y0 = n, x1 = 0, y1 = 0;
                for (int y = static_cast<int>(c.y) - 12; y <= static_cast<int>(c.y) + 12; ++y) {
                    for (int x = static_cast<int>(c.x) - 12; x <= static_cast<int>(c.x) + 12; ++x) {
                        if (x < 0 || y < 0 || x >= n || y >= n) continue;
                        if (!e.inside(x + 0.5, y + 0.5)) continue;
                        detail::Rgb col{92 + rng.normal(0, 6), 48 + rng.normal(0, 5),
                                        122 + rng.normal(0, 6)};
                        detail::put_pixel(frame.pixels, x, y, detail::domain_shift(col, shifted));
                        x0 = std::min(x0, static_cast<double>(x));
                        y0 = std::min(y0, static_cast<double>(y));
                        x1 = std::max(x1, x + 1.0);
                        y1 = std::max(y1, y + 1.0);
                    }
                }
                MitosisAnnotation ann;
                ann.id = ++next_id;
                ann.centroid = c;
                ann.label = AnnotationLabel::kMitosis;
                if (cfg.with_boxes && x1 > x0) ann.box = BoundingBox(x0, y0, x1, y1);
                slide.annotations.push_back(ann);
            }

            for (int r = 0; r < cfg.rings_per_frame; ++r) {
                const Point c = place(30.0);
                const double radius = rng.uniform(6.0, 8.5);
                for (int y = static_cast<int>(c.y) - 12; y <= static_cast<int>(c.y) + 12; ++y) {
                    for (int x = static_cast<int>(c.x) - 12; x <= static_cast<int>(c.x) + 12; ++x) {
                        if (x < 0 || y < 0 || x >= n || y >= n) continue;
                        const double d = std::hypot(x + 0.5 - c.x, y + 0.5 - c.y);
                        if (d <= radius && d >= radius * 0.62) {
                            detail::Rgb col{92 + rng.normal(0, 6), 48 + rng.normal(0, 5),
                                            122 + rng.normal(0, 6)};
                            detail::put_pixel(frame.pixels, x, y,
                                              detail::domain_shift(col, shifted));
                        }
                    }
                }
                MitosisAnnotation ann;
                ann.id = ++next_id;
                ann.centroid = c;
                ann.label = AnnotationLabel::kHardNegative;
                slide.annotations.push_back(ann);
            }

            for (int b = 0; b < cfg.blobs_per_frame; ++b) {
                const Point c = place(20.0);
                const detail::Ellipse e{c.x, c.y, rng.uniform(4.0, 7.0), rng.uniform(4.0, 7.0),
                                        rng.uniform(0.0, 3.14159)};
                for (int y = static_cast<int>(c.y) - 12; y <= static_cast<int>(c.y) + 12; ++y) {
                    for (int x = static_cast<int>(c.x) - 12; x <= static_cast<int>(c.x) + 12; ++x) {
                        if (x < 0 || y < 0 || x >= n || y >= n) continue;
                        if (!e.inside(x + 0.5, y + 0.5)) continue;
                        detail::Rgb col{150 + rng.normal(0, 6), 176 + rng.normal(0, 5),
                                        168 + rng.normal(0, 6)};
                        detail::put_pixel(frame.pixels, x, y, detail::domain_shift(col, shifted));
                    }
                }
            }

            corpus.manifest.slides.push_back(std::move(slide));
            corpus.frames[frame.slide_id] = std::move(frame);
        }
    }
    return corpus;
}

/// Writes images/ PNGs plus manifest.json so the corpus is consumable by the
/// CLI exactly like real data.
inline void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    for (const auto& slide : corpus.manifest.slides) {
        dataio::write_png(dir / slide.image_path, corpus.frames.at(slide.slide_id).pixels);
    }
    dataio::DatasetManifest manifest = corpus.manifest;
    manifest.root = dir;
    dataio::save_manifest(manifest, dir / "manifest.json");
}

/// Emits {slide_id}_{annotation_id}.png binary masks for the first `count`
/// mitoses, standing in for the manual seed-annotation step. The mask is
/// recovered from the rendered frame by color distance to the mitosis stain.
inline int write_seed_masks(const SynthCorpus& corpus, const std::filesystem::path& dir,
                            int count, int patch_size = 64) {
    std::filesystem::create_directories(dir);
    int written = 0;
    for (const auto& slide : corpus.manifest.slides) {
        const Frame& frame = corpus.frames.at(slide.slide_id);
        const bool shifted = slide.domain.name == "synthB";
        for (const auto& ann : slide.annotations) {
            if (written >= count) return written;
            if (ann.label != AnnotationLabel::kMitosis) continue;
            const ImageU8 patch = extract_patch(frame, ann.centroid, patch_size);
            const detail::Rgb stain = detail::domain_shift({92, 48, 122}, shifted);
            ImageU8 mask(patch_size, patch_size, 1, 0);
            for (int y = 0; y < patch_size; ++y) {
                for (int x = 0; x < patch_size; ++x) {
                    const double d = std::hypot(patch.at(x, y, 0) - stain.r,
                                                patch.at(x, y, 1) - stain.g) +
                                     std::fabs(patch.at(x, y, 2) - stain.b);
                    if (d < 60.0) mask.at(x, y) = 255;
                }
            }
            dataio::write_png(dir / (slide.slide_id + "_" + std::to_string(ann.id) + ".png"),
                              mask);
            ++written;
        }
    }
    return written;
}

}  // namespace mito::synthetic
