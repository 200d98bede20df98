#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "mito/core/random.hpp"
#include "mito/eval/matching.hpp"
#include "mito/eval/metrics.hpp"
#include "mito/eval/report.hpp"

#include "support/tmpdir.hpp"

using namespace mito;
using namespace mito::eval;

#include "support/oracles.hpp"

namespace {

std::vector<Point> random_points(Rng& rng, std::size_t n, double extent) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(0, extent), rng.uniform(0, extent)});
    return pts;
}

}  // namespace

TEST_CASE("match_detections trivial cases", "[eval]") {
    const MatchResult none = match_detections({}, {{1, 1}, {2, 2}}, 5.0);
    REQUIRE(none.tp.empty());
    REQUIRE(none.fp.empty());
    REQUIRE(none.fn.size() == 2);

    const std::vector<Point> gts = {{10, 10}, {40, 40}, {70, 10}};
    const MatchResult exact = match_detections(gts, gts, 1.0);
    REQUIRE(exact.tp.size() == 3);
    REQUIRE(exact.fp.empty());
    REQUIRE(exact.fn.empty());
    for (const auto& t : exact.tp) REQUIRE(t.distance == 0.0);

    REQUIRE_THROWS_AS(match_detections({}, {}, 0.0), std::invalid_argument);
}

TEST_CASE("match_detections prefers cardinality over greedy distance", "[eval]") {
    // Greedy nearest-first would match pred0 to gt0 and strand pred1.
    const std::vector<Point> preds = {{0, 0}, {1, 0}};
    const std::vector<Point> gts = {{0.4, 0}, {10, 0}};
    const MatchResult m = match_detections(preds, gts, 9.4);
    REQUIRE(m.tp.size() == 2);
}

TEST_CASE("match_detections equals exhaustive optimum on random instances", "[eval]") {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const auto preds = random_points(rng, rng.uniform_index(7), 20.0);
        const auto gts = random_points(rng, rng.uniform_index(7), 20.0);
        const double radius = rng.uniform(1.0, 15.0);
        const MatchResult m = match_detections(preds, gts, radius);
        const testutil::BruteMatch brute = testutil::brute_force_match(preds, gts, radius);
        CAPTURE(trial, preds.size(), gts.size(), radius);
        REQUIRE(static_cast<int>(m.tp.size()) == brute.cardinality);
        double total = 0.0;
        for (const auto& t : m.tp) total += t.distance;
        REQUIRE(total == Catch::Approx(brute.total_distance).margin(1e-9));
        // Structural invariants.
        REQUIRE(m.tp.size() + m.fp.size() == preds.size());
        REQUIRE(m.tp.size() + m.fn.size() == gts.size());
        for (const auto& t : m.tp) REQUIRE(t.distance <= radius);
    }
}

TEST_CASE("matching symmetry: swapping sides swaps fp and fn", "[eval]") {
    Rng rng(78);
    for (int trial = 0; trial < 50; ++trial) {
        const auto preds = random_points(rng, 1 + rng.uniform_index(6), 15.0);
        const auto gts = random_points(rng, 1 + rng.uniform_index(6), 15.0);
        const MatchResult ab = match_detections(preds, gts, 6.0);
        const MatchResult ba = match_detections(gts, preds, 6.0);
        REQUIRE(ab.tp.size() == ba.tp.size());
        REQUIRE(ab.fp.size() == ba.fn.size());
        REQUIRE(ab.fn.size() == ba.fp.size());
    }
}

TEST_CASE("precision/recall/F1 formulas and conventions", "[eval]") {
    // Paper triple: the reported precision/recall reproduce the reported F1.
    REQUIRE(f1_score(0.7820, 0.7349) == Catch::Approx(0.7577).margin(5e-5));

    const Prf zero = prf_from_counts(0, 3, 4);
    REQUIRE(zero.f1 == 0.0);

    const Prf empty = prf_from_counts(0, 0, 0);
    REQUIRE(empty.precision == 0.0);
    REQUIRE(empty.recall == 0.0);
    REQUIRE(empty.f1 == 0.0);

    for (double x : {0.2, 0.5, 0.9}) REQUIRE(f1_score(x, x) == Catch::Approx(x));
}

TEST_CASE("f1 bound properties", "[eval]") {
    Rng rng(79);
    for (int trial = 0; trial < 200; ++trial) {
        const long tp = static_cast<long>(rng.uniform_index(20));
        const long fp = static_cast<long>(rng.uniform_index(20));
        const long fn = static_cast<long>(rng.uniform_index(20));
        const Prf prf = prf_from_counts(tp, fp, fn);
        REQUIRE(prf.f1 <= std::sqrt(prf.precision * prf.recall) + 1e-12);
        REQUIRE(prf.f1 <= std::min(2 * prf.precision, 2 * prf.recall) + 1e-12);
    }
}

TEST_CASE("pr_curve endpoints: perfect and hopeless detectors", "[eval]") {
    const std::vector<Point> gts = {{5, 5}, {50, 50}, {90, 10}};
    std::vector<ScoredPoint> perfect;
    for (const auto& g : gts) perfect.push_back({g, 1.0});
    REQUIRE(pr_curve(perfect, gts, 5.0).auc == Catch::Approx(1.0));

    std::vector<ScoredPoint> hopeless = {{{200, 200}, 0.9}, {{300, 300}, 0.4}};
    REQUIRE(pr_curve(hopeless, gts, 5.0).auc == 0.0);
}

TEST_CASE("pr_curve reproduces the hand-integrated 5-point step function", "[eval]") {
    // gts on a line; tp at scores .9/.7/.5, fp at .8/.6.
    const std::vector<Point> gts = {{0, 0}, {100, 0}, {200, 0}};
    const std::vector<ScoredPoint> preds = {
        {{0, 0}, 0.9}, {{50, 50}, 0.8}, {{100, 0}, 0.7}, {{150, 50}, 0.6}, {{200, 0}, 0.5},
    };
    const PRCurve curve = pr_curve(preds, gts, 10.0);
    REQUIRE(curve.points.size() == 5);
    // Hand integration of the interpolated step function:
    //   [0,1/3]x1 + (1/3,2/3]x(2/3) + (2/3,1]x(3/5) = 34/45.
    REQUIRE(curve.auc == Catch::Approx(34.0 / 45.0).margin(1e-9));
}

TEST_CASE("pr auc invariant under strictly monotone score transforms", "[eval]") {
    Rng rng(80);
    const auto gts = random_points(rng, 6, 50.0);
    std::vector<ScoredPoint> preds;
    for (int i = 0; i < 12; ++i) {
        preds.push_back({{rng.uniform(0, 50), rng.uniform(0, 50)}, rng.uniform()});
    }
    const double base = pr_curve(preds, gts, 8.0).auc;
    std::vector<ScoredPoint> cubed = preds;
    for (auto& sp : cubed) sp.score = sp.score * sp.score * sp.score;
    REQUIRE(pr_curve(cubed, gts, 8.0).auc == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("evaluate_results micro-average equals pooled recount", "[eval]") {
    dataio::DatasetManifest manifest;
    auto make_slide = [&](const std::string& id, const std::string& scanner,
                          std::vector<Point> mitoses) {
        dataio::SlideRecord s;
        s.slide_id = id;
        s.domain = ScannerDomain::from_name(scanner);
        s.width = 1000;
        s.height = 1000;
        std::int64_t aid = 0;
        for (const auto& p : mitoses) {
            MitosisAnnotation a;
            a.id = ++aid;
            a.centroid = p;
            a.label = AnnotationLabel::kMitosis;
            s.annotations.push_back(a);
        }
        manifest.slides.push_back(std::move(s));
    };
    make_slide("s1", "XR", {{10, 10}, {500, 500}});
    make_slide("s2", "S360", {{100, 100}});

    Results results;
    results.push_back({"s1", {{{10, 10}, 0.9}, {{900, 900}, 0.8}}, ""});   // 1 tp, 1 fp, 1 fn
    results.push_back({"s2", {{{101, 100}, 0.7}}, ""});                    // 1 tp

    const EvalReport report = evaluate_results(results, manifest, 30.0);
    REQUIRE(report.overall.tp == 2);
    REQUIRE(report.overall.fp == 1);
    REQUIRE(report.overall.fn == 1);
    const Prf pooled = prf_from_counts(2, 1, 1);
    REQUIRE(report.overall.prf.f1 == Catch::Approx(pooled.f1));
    REQUIRE(report.per_scanner.at("XR").tp == 1);
    REQUIRE(report.per_scanner.at("S360").fn == 0);

    // Unknown slide id is an error that names the offender.
    Results bad = results;
    bad.push_back({"mystery", {}, ""});
    REQUIRE_THROWS_WITH(evaluate_results(bad, manifest, 30.0),
                        Catch::Matchers::ContainsSubstring("mystery"));
}

TEST_CASE("evaluate_results notes the degenerate empty case", "[eval]") {
    dataio::DatasetManifest manifest;
    dataio::SlideRecord s;
    s.slide_id = "empty";
    s.domain = ScannerDomain::XR();
    s.width = 100;
    s.height = 100;
    manifest.slides.push_back(s);

    Results results;
    results.push_back({"empty", {}, ""});
    const EvalReport report = evaluate_results(results, manifest, 30.0);
    REQUIRE(report.overall.prf.f1 == 0.0);
    REQUIRE_FALSE(report.note.empty());
}

TEST_CASE("results files round-trip through JSON", "[eval]") {
    testutil::TmpDir tmp("results");
    Results results;
    results.push_back({"a", {{{1.5, 2.25}, 0.75}, {{7, 9}, 0.5}}, ""});
    results.push_back({"b", {}, "unreadable image"});
    save_results(results, tmp / "r.json");
    const Results back = load_results(tmp / "r.json");
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].points.size() == 2);
    REQUIRE(back[0].points[1].p.x == 7.0);
    REQUIRE(back[0].points[0].score == 0.75);
    REQUIRE(back[1].error == "unreadable image");
}
