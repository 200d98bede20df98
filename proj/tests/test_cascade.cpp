#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "mito/cascade/cascade.hpp"
#include "mito/core/random.hpp"

#include "support/tmpdir.hpp"

using namespace mito;
using namespace mito::cascade;

namespace {

/// Proposes a fixed box at every bright-red pixel (tile-local coordinates).
class DotDetector : public detector::DetectorBackbone {
public:
    std::vector<detector::Proposal> propose(const ImageU8& raster) const override {
        std::vector<detector::Proposal> out;
        for (int y = 0; y < raster.height(); ++y) {
            for (int x = 0; x < raster.width(); ++x) {
                if (raster.at(x, y, 0) == 255 && raster.at(x, y, 2) == 0) {
                    detector::Proposal p;
                    p.box = BoundingBox(std::max(0, x - 3), std::max(0, y - 3),
                                        std::min(raster.width(), x + 3),
                                        std::min(raster.height(), y + 3));
                    p.score = raster.at(x, y, 1) / 255.0;
                    out.push_back(p);
                }
            }
        }
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.score > b.score; });
        return out;
    }
    std::vector<std::string> parameter_blocks() const override { return {"b1", "b2", "b3"}; }
    void set_trainable(const std::vector<std::string>&) override {}
    std::vector<float> block_parameters(const std::string&) const override { return {}; }
    double train_step(const ImageU8&, const std::vector<BoundingBox>&, double) override {
        return 0.0;
    }
    void save(const std::filesystem::path&) override {}
    void load(const std::filesystem::path&) override {}
    std::string id() const override { return "dotstub"; }
};

class ConstantScorer : public classifier::PatchScorer {
public:
    explicit ConstantScorer(double p) : p_(p) {}
    double prob(const ImageU8&) const override { return p_; }

private:
    double p_;
};

CascadeModels stub_models(double score_a, double score_b) {
    CascadeModels models;
    models.detector = std::make_unique<DotDetector>();
    models.ensemble.members.push_back(std::make_shared<ConstantScorer>(score_a));
    models.ensemble.members.push_back(std::make_shared<ConstantScorer>(score_b));
    models.ensemble.weights.w = {0.5, 0.5};
    models.ensemble.patch_px = 16;
    return models;
}

Frame dot_frame(const std::vector<std::pair<Point, double>>& dots, int size = 160) {
    Frame frame;
    frame.slide_id = "stub";
    frame.domain = ScannerDomain::XR();
    frame.pixels = ImageU8(size, size, 3, 30);
    for (const auto& [p, score] : dots) {
        frame.pixels.at(static_cast<int>(p.x), static_cast<int>(p.y), 0) = 255;
        frame.pixels.at(static_cast<int>(p.x), static_cast<int>(p.y), 1) =
            static_cast<std::uint8_t>(score * 255);
        frame.pixels.at(static_cast<int>(p.x), static_cast<int>(p.y), 2) = 0;
    }
    return frame;
}

CascadeConfig stub_config() {
    CascadeConfig cfg;
    cfg.tile = 160;
    cfg.overlap = 0;
    cfg.min_score = 0.05;
    cfg.dedup_radius = 8.0;
    cfg.accept_threshold = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("run_cascade on a blank frame returns nothing", "[cascade]") {
    const CascadeModels models = stub_models(1.0, 1.0);
    const Frame blank = dot_frame({});
    REQUIRE(run_cascade(blank, models, stub_config()).empty());
}

TEST_CASE("run_cascade keeps all k candidates when the ensemble says 1.0", "[cascade]") {
    const CascadeModels models = stub_models(1.0, 1.0);
    const Frame frame = dot_frame({{{30, 30}, 0.9}, {{80, 40}, 0.8}, {{120, 100}, 0.7}});
    const auto dets = run_cascade(frame, models, stub_config());
    REQUIRE(dets.size() == 3);
    for (const auto& d : dets) {
        REQUIRE(*d.merged_score == 1.0);
        REQUIRE(d.classifier_scores == std::vector<double>{1.0, 1.0});
    }

    CascadeConfig reject = stub_config();
    reject.accept_threshold = 1.0 + 1e-9;
    REQUIRE(run_cascade(frame, models, reject).empty());
}

TEST_CASE("final detections are a subset of detector candidates", "[cascade]") {
    const CascadeModels models = stub_models(0.7, 0.5);  // merged 0.6
    const Frame frame = dot_frame({{{30, 30}, 0.9}, {{100, 110}, 0.6}});
    const CascadeConfig cfg = stub_config();

    const auto candidates = detector::detect_candidates(*models.detector, frame.pixels, cfg.tile,
                                                        cfg.overlap, cfg.min_score,
                                                        cfg.dedup_radius);
    const auto final = run_cascade(frame, models, cfg);
    REQUIRE_FALSE(final.empty());
    for (const auto& f : final) {
        bool found = false;
        for (const auto& c : candidates) {
            found = found || (c.centroid == f.centroid && c.detector_score == f.detector_score);
        }
        REQUIRE(found);  // refinement never invents candidates
    }
}

TEST_CASE("results are sorted by descending merged score", "[cascade]") {
    // Distinct member scores per dot are impossible with constant scorers,
    // so check the sort on equal scores (tie-break: y then x) plus the
    // threshold monotonicity end to end.
    const CascadeModels models = stub_models(0.9, 0.3);  // merged 0.6 for all
    const Frame frame = dot_frame({{{120, 100}, 0.9}, {{30, 30}, 0.8}, {{80, 30}, 0.7}});
    CascadeConfig cfg = stub_config();
    const auto dets = run_cascade(frame, models, cfg);
    REQUIRE(dets.size() == 3);
    REQUIRE(dets[0].centroid.y <= dets[1].centroid.y);

    std::size_t prev = dets.size();
    for (double tau : {0.55, 0.65}) {
        cfg.accept_threshold = tau;
        const auto kept = run_cascade(frame, models, cfg);
        REQUIRE(kept.size() <= prev);
        prev = kept.size();
    }
}

TEST_CASE("run_batch writes one record per frame in listing order", "[cascade]") {
    testutil::TmpDir tmp("batch");
    std::filesystem::create_directories(tmp / "frames");

    const CascadeModels models = stub_models(1.0, 0.8);  // merged 0.9
    CascadeConfig cfg = stub_config();

    // Empty directory -> empty results array.
    REQUIRE(run_batch(tmp / "frames", models, cfg).empty());

    dataio::write_png(tmp.path() / "frames" / "b_frame.png",
                      dot_frame({{{40, 40}, 0.9}}).pixels);
    dataio::write_png(tmp.path() / "frames" / "a_frame.png",
                      dot_frame({{{30, 30}, 0.9}, {{90, 90}, 0.8}}).pixels);

    const eval::Results results = run_batch(tmp / "frames", models, cfg);
    REQUIRE(results.size() == 2);
    REQUIRE(results[0].slide_id == "a_frame");
    REQUIRE(results[1].slide_id == "b_frame");
    REQUIRE(results[0].points.size() == 2);
    REQUIRE(results[1].points.size() == 1);
    REQUIRE(results[1].points[0].p.x == Catch::Approx(40.0).margin(1.0));

    // Round-trip through the results file format.
    save_results(results, tmp / "results.json");
    const eval::Results back = eval::load_results(tmp / "results.json");
    REQUIRE(back.size() == results.size());
    REQUIRE(back[0].points.size() == results[0].points.size());
    REQUIRE(back[0].points[1].score == results[0].points[1].score);
}

TEST_CASE("run_batch is deterministic and byte-identical across reruns and workers",
          "[cascade]") {
    testutil::TmpDir tmp("determ");
    std::filesystem::create_directories(tmp / "frames");
    Rng rng(130);
    for (int f = 0; f < 5; ++f) {
        std::vector<std::pair<Point, double>> dots;
        for (int d = 0; d < 4; ++d) {
            dots.push_back({{10.0 + rng.uniform_index(140), 10.0 + rng.uniform_index(140)},
                            0.3 + 0.6 * rng.uniform()});
        }
        dataio::write_png(tmp.path() / "frames" / ("f" + std::to_string(f) + ".png"),
                          dot_frame(dots).pixels);
    }
    const CascadeModels models = stub_models(0.9, 0.7);
    CascadeConfig cfg = stub_config();

    cfg.workers = 1;
    save_results(run_batch(tmp / "frames", models, cfg), tmp / "r1.json");
    cfg.workers = 3;
    save_results(run_batch(tmp / "frames", models, cfg), tmp / "r2.json");

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    REQUIRE(slurp(tmp / "r1.json") == slurp(tmp / "r2.json"));
}

TEST_CASE("run_batch records per-file errors and continues", "[cascade]") {
    testutil::TmpDir tmp("errors");
    std::filesystem::create_directories(tmp / "frames");
    dataio::write_png(tmp.path() / "frames" / "good.png", dot_frame({{{50, 50}, 0.9}}).pixels);
    std::ofstream bad(tmp.path() / "frames" / "corrupt.png", std::ios::binary);
    bad << "not a png at all";
    bad.close();

    const CascadeModels models = stub_models(1.0, 1.0);
    const eval::Results results = run_batch(tmp / "frames", models, stub_config());
    REQUIRE(results.size() == 2);
    REQUIRE(results[0].slide_id == "corrupt");
    REQUIRE_FALSE(results[0].error.empty());
    REQUIRE(results[1].slide_id == "good");
    REQUIRE(results[1].error.empty());
    REQUIRE(results[1].points.size() == 1);
}

TEST_CASE("load_cascade_models validates artifacts before processing", "[cascade]") {
    testutil::TmpDir tmp("models");
    CascadeConfig cfg = stub_config();
    cfg.detector_dir = (tmp / "missing").string();
    cfg.ensemble_path = (tmp / "ens.json").string();
    REQUIRE_THROWS_WITH(load_cascade_models(cfg),
                        Catch::Matchers::ContainsSubstring("detector checkpoint"));

    // Wrong format version in an otherwise complete checkpoint.
    std::filesystem::create_directories(tmp / "det");
    backbones::ConvSegDetectorConfig dcfg;
    dcfg.width = 4;
    backbones::ConvSegDetector det(dcfg);
    det.save(tmp.path() / "det" / "detector.weights");
    {
        std::ofstream sidecar(tmp.path() / "det" / "detector.json");
        sidecar << R"({"format_version": 99, "backbone": "convseg4"})";
    }
    cfg.detector_dir = (tmp / "det").string();
    REQUIRE_THROWS_WITH(load_cascade_models(cfg),
                        Catch::Matchers::ContainsSubstring("incompatible"));

    // Compatible checkpoint + ensemble loads.
    {
        std::ofstream sidecar(tmp.path() / "det" / "detector.json");
        sidecar << R"({"format_version": 1, "backbone": "convseg4"})";
    }
    backbones::ClassifierMember member("resnet", 16, 8, 6, 131);
    classifier::save_member_checkpoint(tmp / "member_a", member, {});
    classifier::save_ensemble_descriptor(tmp / "ens.json", {"member_a"}, {{1.0}}, 0.5, 16);
    const CascadeModels models = load_cascade_models(cfg);
    REQUIRE(models.detector->id() == "convseg4");
    REQUIRE(models.ensemble.members.size() == 1);
}
