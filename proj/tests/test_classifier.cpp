#include <catch2/catch_amalgamated.hpp>

#include "mito/classifier/ensemble.hpp"
#include "mito/classifier/loss.hpp"
#include "mito/classifier/refine.hpp"
#include "mito/classifier/schedule.hpp"
#include "mito/classifier/train.hpp"

#include "support/tmpdir.hpp"

using namespace mito;
using namespace mito::classifier;
using mito::backbones::ClassifierMember;

TEST_CASE("focal loss closed-form cases", "[classifier]") {
    // gamma=0, alpha=1 is plain cross-entropy: -ln(0.5) = ln 2.
    REQUIRE(focal_loss(0.5, 1, 0.0, 1.0) == Catch::Approx(std::log(2.0)).margin(1e-9));
    REQUIRE(focal_loss(0.999999, 1, 2.0, 1.0) < 1e-10);
    // Spot value: 0.01 * (-ln 0.9) = 1.0536e-3.
    REQUIRE(focal_loss(0.9, 1, 2.0, 1.0) == Catch::Approx(1.0536e-3).margin(1e-6));
    // Clamped endpoints stay finite.
    REQUIRE(std::isfinite(focal_loss(0.0, 1, 2.0, 0.75)));
    REQUIRE(std::isfinite(focal_loss(1.0, 0, 2.0, 0.75)));
    REQUIRE_THROWS_AS(focal_loss(0.5, 2, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("focal loss reduces to cross-entropy on a 10x10 grid", "[classifier]") {
    for (int i = 1; i <= 10; ++i) {
        const double p = i / 11.0;
        for (int y = 0; y <= 1; ++y) {
            const double ce = y == 1 ? -std::log(p) : -std::log(1.0 - p);
            CAPTURE(p, y);
            REQUIRE(focal_loss(p, y, 0.0, 1.0) == Catch::Approx(ce).margin(1e-6));
        }
    }
}

TEST_CASE("focal loss gradient matches finite differences", "[classifier]") {
    const double eps = 1e-6;
    for (double gamma : {0.0, 1.0, 2.0}) {
        for (double alpha : {1.0, 0.75}) {
            for (double p : {0.1, 0.35, 0.65, 0.9}) {
                for (int y = 0; y <= 1; ++y) {
                    const double numeric = (focal_loss(p + eps, y, gamma, alpha) -
                                            focal_loss(p - eps, y, gamma, alpha)) /
                                           (2 * eps);
                    CAPTURE(gamma, alpha, p, y);
                    REQUIRE(focal_loss_dp(p, y, gamma, alpha) ==
                            Catch::Approx(numeric).margin(1e-4));
                }
            }
        }
    }
}

TEST_CASE("cosine annealing endpoints, midpoint and symmetry", "[classifier]") {
    const double lr0 = 2e-5;
    REQUIRE(cosine_lr(0, 100, lr0) == lr0);
    REQUIRE(cosine_lr(100, 100, lr0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(cosine_lr(50, 100, lr0) == Catch::Approx(1e-5).margin(1e-12));
    for (int e = 0; e <= 100; ++e) {
        REQUIRE(cosine_lr(e, 100, lr0) + cosine_lr(100 - e, 100, lr0) ==
                Catch::Approx(lr0).margin(1e-15));
    }
    REQUIRE_THROWS_AS(cosine_lr(-1, 100, lr0), std::invalid_argument);
    REQUIRE_THROWS_AS(cosine_lr(101, 100, lr0), std::invalid_argument);
}

TEST_CASE("ensemble merge arithmetic", "[classifier]") {
    REQUIRE(merge_scores({0.3, 0.8}, {{1.0, 0.0}}) == Catch::Approx(0.3));
    REQUIRE(merge_scores({0.2, 0.8}, {{0.5, 0.5}}) == Catch::Approx(0.5));
    // Constant stubs (0.9, 0.1) with equal weights merge to 0.5.
    REQUIRE(merge_scores({0.9, 0.1}, {{0.5, 0.5}}) == Catch::Approx(0.5));
    REQUIRE_THROWS_AS(merge_scores({0.5}, {{0.5, 0.5}}), std::invalid_argument);
    REQUIRE_THROWS_AS(merge_scores({0.5, 0.5}, {{0.0, 0.0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(merge_scores({0.5, 0.5}, {{-0.1, 1.0}}), std::invalid_argument);
}

TEST_CASE("merge matches the dot-product oracle and ignores weight scaling", "[classifier]") {
    Rng rng(110);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(5);
        std::vector<double> probs, weights;
        for (std::size_t i = 0; i < n; ++i) {
            probs.push_back(rng.uniform());
            weights.push_back(rng.uniform(0.01, 2.0));
        }
        double wsum = 0.0;
        for (double w : weights) wsum += w;
        double oracle = 0.0;
        for (std::size_t i = 0; i < n; ++i) oracle += probs[i] * weights[i] / wsum;

        const double merged = merge_scores(probs, {weights});
        REQUIRE(merged == Catch::Approx(oracle).margin(1e-12));
        REQUIRE(merged >= 0.0);
        REQUIRE(merged <= 1.0);

        std::vector<double> scaled = weights;
        for (double& w : scaled) w *= 7.25;
        REQUIRE(merge_scores(probs, {scaled}) == Catch::Approx(merged).margin(1e-12));
    }
}

namespace {

/// Two-class toy corpus: dark purple blobs (mitosis) vs pale patches (hard
/// negative), two slides for train and one for validation.
struct ClassifierFixture {
    dataio::DatasetManifest manifest;
    dataio::MemoryFrameStore frames;
    dataio::SplitAssignment split;

    ClassifierFixture() {
        Rng rng(111);
        for (int s = 0; s < 3; ++s) {
            dataio::SlideRecord slide;
            slide.slide_id = "c" + std::to_string(s);
            slide.domain = ScannerDomain::XR();
            slide.width = slide.height = 200;

            Frame frame;
            frame.slide_id = slide.slide_id;
            frame.domain = slide.domain;
            frame.pixels = ImageU8(200, 200, 3);
            for (int y = 0; y < 200; ++y) {
                for (int x = 0; x < 200; ++x) {
                    frame.pixels.at(x, y, 0) = static_cast<std::uint8_t>(225 + rng.uniform_index(20));
                    frame.pixels.at(x, y, 1) = static_cast<std::uint8_t>(195 + rng.uniform_index(20));
                    frame.pixels.at(x, y, 2) = static_cast<std::uint8_t>(210 + rng.uniform_index(20));
                }
            }
            std::int64_t id = 0;
            for (int i = 0; i < 4; ++i) {
                const double cx = 30 + 45 * i, cy = 50;
                for (int y = 0; y < 200; ++y) {
                    for (int x = 0; x < 200; ++x) {
                        if (std::hypot(x - cx, y - cy) < 6.0) {
                            frame.pixels.at(x, y, 0) = 90;
                            frame.pixels.at(x, y, 1) = 45;
                            frame.pixels.at(x, y, 2) = 120;
                        }
                    }
                }
                MitosisAnnotation pos;
                pos.id = ++id;
                pos.centroid = {cx, cy};
                pos.label = AnnotationLabel::kMitosis;
                slide.annotations.push_back(pos);

                MitosisAnnotation neg;
                neg.id = ++id;
                neg.centroid = {cx, 150.0};
                neg.label = AnnotationLabel::kHardNegative;
                slide.annotations.push_back(neg);
            }
            manifest.slides.push_back(slide);
            frames.put(std::move(frame));
            if (s < 2) {
                split.train.insert(slide.slide_id);
            } else {
                split.val.insert(slide.slide_id);
            }
        }
    }
};

ClassifierTrainConfig tiny_config() {
    ClassifierTrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 8;
    cfg.lr0 = 5e-3;  // random-init trunks need a larger rate than the paper's pretrained setup
    cfg.unfreeze_backbone_after = 5;
    cfg.patch_px = 20;
    cfg.resize_to = 16;
    cfg.seed = 112;
    return cfg;
}

}  // namespace

TEST_CASE("member backbone is bit-identical through epoch 5 and moves at epoch 6",
          "[classifier]") {
    ClassifierFixture fx;
    ClassifierTrainConfig cfg = tiny_config();
    ClassifierMember member("resnet", cfg.resize_to, 8, 6, 113);
    const std::vector<float> init = member.backbone_parameters();

    augment::AugmentPolicy policy;
    policy.n = 1;
    policy.m = 3.0;

    std::vector<std::pair<int, bool>> backbone_moved;
    const ClassifierTrainResult result = train_member(
        fx.manifest, fx.frames, fx.split, cfg, nullptr, policy, member, {},
        [&](const ClassifierEpochLog& log) {
            backbone_moved.emplace_back(log.epoch, member.backbone_parameters() != init);
        });
    REQUIRE_FALSE(result.aborted_nan);
    REQUIRE(backbone_moved.size() == 8);
    for (const auto& [epoch, moved] : backbone_moved) {
        CAPTURE(epoch);
        if (epoch <= 5) {
            REQUIRE_FALSE(moved);  // frozen: exact bit pattern
        }
    }
    REQUIRE(backbone_moved[5].second);  // epoch 6 fine-tunes the trunk
}

TEST_CASE("member selection is the argmax of validation F1", "[classifier]") {
    ClassifierFixture fx;
    ClassifierTrainConfig cfg = tiny_config();
    cfg.epochs = 20;
    cfg.lr0 = 1e-2;
    ClassifierMember member("densenet", cfg.resize_to, 8, 6, 114);
    augment::AugmentPolicy policy;
    policy.n = 1;
    policy.m = 2.0;

    const ClassifierTrainResult result =
        train_member(fx.manifest, fx.frames, fx.split, cfg, nullptr, policy, member);
    REQUIRE(result.history.size() == 20);
    double best = -1.0;
    int best_epoch = 0;
    for (const auto& log : result.history) {
        if (log.val_f1 > best) {
            best = log.val_f1;
            best_epoch = log.epoch;
        }
    }
    REQUIRE(result.best_epoch == best_epoch);
    REQUIRE(result.best_val_f1 == best);
    // The toy classes are separable; the best member should be usable.
    REQUIRE(result.best_val_f1 >= 0.7);
}

TEST_CASE("train_member demands positive items", "[classifier]") {
    ClassifierFixture fx;
    for (auto& slide : fx.manifest.slides) {
        std::vector<MitosisAnnotation> negatives;
        for (auto& ann : slide.annotations) {
            if (ann.label == AnnotationLabel::kHardNegative) negatives.push_back(ann);
        }
        slide.annotations = negatives;
    }
    ClassifierTrainConfig cfg = tiny_config();
    ClassifierMember member("resnet", cfg.resize_to, 8, 6, 115);
    augment::AugmentPolicy policy;
    REQUIRE_THROWS_WITH(
        train_member(fx.manifest, fx.frames, fx.split, cfg, nullptr, policy, member),
        Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("member checkpoints and the ensemble descriptor round-trip", "[classifier]") {
    testutil::TmpDir tmp("ens");
    ClassifierMember a("resnet", 16, 8, 6, 116);
    ClassifierMember b("densenet", 16, 8, 6, 117);
    save_member_checkpoint(tmp / "member_a", a, {{"best_val_f1", 0.9}});
    save_member_checkpoint(tmp / "member_b", b, {{"best_val_f1", 0.8}});

    save_ensemble_descriptor(tmp / "ens.json", {"member_a", "member_b"}, {{0.5, 0.5}}, 0.5, 20);
    const Ensemble ens = load_ensemble(tmp / "ens.json");
    REQUIRE(ens.members.size() == 2);
    REQUIRE(ens.accept_threshold == 0.5);
    REQUIRE(ens.patch_px == 20);

    Rng rng(118);
    ImageU8 patch(20, 20, 3);
    for (auto& v : patch.data()) v = static_cast<std::uint8_t>(rng.uniform_index(256));
    const double direct = classify_patch({&a, &b}, ens.weights, patch);
    const double loaded = classify_patch(ens.member_ptrs(), ens.weights, patch);
    REQUIRE(loaded == Catch::Approx(direct).margin(1e-12));

    const auto sidecar = read_member_sidecar(tmp / "member_a");
    REQUIRE(sidecar.at("best_val_f1").get<double>() == 0.9);
}

TEST_CASE("refine_detections thresholds candidates without inventing new ones", "[classifier]") {
    Ensemble ens;
    ens.members.push_back(std::make_unique<ClassifierMember>("resnet", 16, 8, 6, 119));
    ens.members.push_back(std::make_unique<ClassifierMember>("densenet", 16, 8, 6, 120));
    ens.weights.w = {0.5, 0.5};
    ens.patch_px = 20;

    Rng rng(121);
    ImageU8 frame(120, 120, 3);
    for (auto& v : frame.data()) v = static_cast<std::uint8_t>(rng.uniform_index(256));

    std::vector<Detection> candidates;
    for (int i = 0; i < 5; ++i) {
        Detection d;
        d.centroid = {20.0 + 20 * i, 60.0};
        d.box = BoundingBox(d.centroid.x - 4, d.centroid.y - 4, d.centroid.x + 4, d.centroid.y + 4);
        d.detector_score = 0.5 + 0.1 * i;
        candidates.push_back(d);
    }

    const auto all = refine_detections(candidates, ens, frame, 0.0);
    REQUIRE(all.size() == candidates.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        REQUIRE(all[i].centroid == candidates[i].centroid);  // subset of candidates
        REQUIRE(all[i].classifier_scores.size() == 2);
        REQUIRE(all[i].merged_score.has_value());
        REQUIRE(*all[i].merged_score >= 0.0);
        REQUIRE(*all[i].merged_score <= 1.0);
        REQUIRE(all[i].detector_score == candidates[i].detector_score);
    }

    const auto none = refine_detections(candidates, ens, frame, 1.0 + 1e-9);
    REQUIRE(none.empty());

    // Monotonicity: raising the threshold never increases survivors.
    std::size_t prev = all.size();
    for (double tau : {0.2, 0.4, 0.6, 0.8}) {
        const auto kept = refine_detections(candidates, ens, frame, tau);
        REQUIRE(kept.size() <= prev);
        prev = kept.size();
    }
}
