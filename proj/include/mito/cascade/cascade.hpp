#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mito/backbones/convseg.hpp"
#include "mito/classifier/ensemble.hpp"
#include "mito/classifier/refine.hpp"
#include "mito/dataio/image_io.hpp"
#include "mito/detector/infer.hpp"
#include "mito/eval/report.hpp"

namespace mito::cascade {

struct CascadeConfig {
    std::string detector_dir;   // detector.weights + detector.json
    std::string ensemble_path;  // ensemble descriptor JSON
    int tile = 512;
    int overlap = 64;
    double min_score = 0.05;       // recall-oriented candidate cut
    double dedup_radius = 15.0;
    double accept_threshold = 0.5; // ensemble operating point
    int workers = 1;
};

struct CascadeModels {
    std::unique_ptr<detector::DetectorBackbone> detector;
    classifier::Ensemble ensemble;
};

/// Loads and validates both stages up front: missing artifacts or
/// incompatible checkpoint versions fail here, before any image is touched.
inline CascadeModels load_cascade_models(const CascadeConfig& cfg) {
    const std::filesystem::path det_dir(cfg.detector_dir);
    const auto sidecar_path = det_dir / "detector.json";
    if (!std::filesystem::exists(sidecar_path) ||
        !std::filesystem::exists(det_dir / "detector.weights")) {
        throw std::runtime_error("cascade: detector checkpoint missing in " + cfg.detector_dir);
    }
    std::ifstream in(sidecar_path);
    const nlohmann::json sidecar = nlohmann::json::parse(in);
    if (sidecar.value("format_version", 0) != 1) {
        throw std::runtime_error("cascade: incompatible detector checkpoint version in " +
                                 cfg.detector_dir);
    }
    CascadeModels models;
    models.detector = backbones::make_detector_backbone(sidecar.at("backbone").get<std::string>());
    models.detector->load(det_dir / "detector.weights");
    models.ensemble = classifier::load_ensemble(cfg.ensemble_path);
    return models;
}

/// End-to-end inference for one frame: candidate detection, ensemble
/// refinement, final detections sorted by descending merged score. The
/// output score is the merged classifier score; the detector score rides
/// along as metadata.
inline std::vector<Detection> run_cascade(const Frame& frame, const CascadeModels& models,
                                          const CascadeConfig& cfg) {
    const std::vector<Detection> candidates =
        detector::detect_candidates(*models.detector, frame.pixels, cfg.tile, cfg.overlap,
                                    cfg.min_score, cfg.dedup_radius);
    std::vector<Detection> final = classifier::refine_detections(
        candidates, models.ensemble, frame.pixels, cfg.accept_threshold);
    std::sort(final.begin(), final.end(), [](const Detection& a, const Detection& b) {
        if (*a.merged_score != *b.merged_score) return *a.merged_score > *b.merged_score;
        if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
        return a.centroid.x < b.centroid.x;
    });
    return final;
}

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

}  // namespace detail

/// Batch entrypoint: one record per image in the directory (lexicographic
/// order, which fixes the output order and makes reruns byte-identical).
/// Unreadable files produce per-file error records and the batch continues.
inline eval::Results run_batch(const std::filesystem::path& input_dir,
                               const CascadeModels& models, const CascadeConfig& cfg) {
    if (!std::filesystem::is_directory(input_dir)) {
        throw std::runtime_error("run_batch: no such directory " + input_dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
        if (entry.is_regular_file() && detail::is_image_file(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    eval::Results results(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= files.size()) return;
            eval::SlideResult record;
            record.slide_id = files[i].stem().string();
            try {
                Frame frame;
                frame.pixels = dataio::ensure_rgb(dataio::read_image(files[i]));
                frame.slide_id = record.slide_id;
                frame.domain = ScannerDomain{"unknown", false};
                for (const auto& det : run_cascade(frame, models, cfg)) {
                    record.points.push_back({det.centroid, *det.merged_score});
                }
            } catch (const std::exception& e) {
                record.points.clear();
                record.error = e.what();
            }
            results[i] = std::move(record);
        }
    };

    const int workers = std::max(1, cfg.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return results;
}

}  // namespace mito::cascade
