#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/dataio/manifest.hpp"
#include "mito/eval/metrics.hpp"

namespace mito::eval {

/// One record per processed frame in a cascade results file.
struct SlideResult {
    std::string slide_id;
    std::vector<ScoredPoint> points;
    std::string error;  // non-empty when the frame could not be processed
};

using Results = std::vector<SlideResult>;

inline nlohmann::json results_to_json(const Results& results) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json rec;
        rec["slide_id"] = r.slide_id;
        if (!r.error.empty()) {
            rec["error"] = r.error;
        } else {
            rec["points"] = nlohmann::json::array();
            for (const auto& sp : r.points) {
                rec["points"].push_back({{"x", sp.p.x}, {"y", sp.p.y}, {"score", sp.score}});
            }
        }
        doc.push_back(std::move(rec));
    }
    return doc;
}

inline void save_results(const Results& results, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_results: cannot open " + path.string());
    out << results_to_json(results).dump(2) << "\n";
}

inline Results load_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_results: cannot open " + path.string());
    const nlohmann::json doc = nlohmann::json::parse(in);
    Results results;
    for (const auto& rec : doc) {
        SlideResult r;
        r.slide_id = rec.at("slide_id").get<std::string>();
        r.error = rec.value("error", "");
        if (r.error.empty()) {
            for (const auto& pt : rec.value("points", nlohmann::json::array())) {
                r.points.push_back({{pt.at("x").get<double>(), pt.at("y").get<double>()},
                                    pt.at("score").get<double>()});
            }
        }
        results.push_back(std::move(r));
    }
    return results;
}

struct GroupMetrics {
    long tp = 0, fp = 0, fn = 0;
    Prf prf;
    double pr_auc = 0.0;
    long slides = 0;
};

struct EvalReport {
    GroupMetrics overall;
    std::map<std::string, GroupMetrics> per_scanner;
    double radius = 0.0;
    std::vector<std::string> skipped;  // slides with per-file errors
    std::string note;
};

namespace detail {

struct SlideEval {
    const SlideResult* result = nullptr;
    std::vector<Point> gts;
    std::string scanner;
};

/// Micro-averaged metrics: tp/fp/fn pooled across slides before computing
/// precision/recall/F1; PR-AUC from a pooled descending threshold sweep with
/// per-slide matching.
inline GroupMetrics group_metrics(const std::vector<const SlideEval*>& group, double radius) {
    GroupMetrics gm;
    gm.slides = static_cast<long>(group.size());
    for (const auto* se : group) {
        std::vector<Point> pts;
        for (const auto& sp : se->result->points) pts.push_back(sp.p);
        const MatchResult m = match_detections(pts, se->gts, radius);
        gm.tp += static_cast<long>(m.tp.size());
        gm.fp += static_cast<long>(m.fp.size());
        gm.fn += static_cast<long>(m.fn.size());
    }
    gm.prf = prf_from_counts(gm.tp, gm.fp, gm.fn);

    std::vector<ScoredSlide> scored;
    for (const auto* se : group) scored.push_back({se->result->points, se->gts});
    gm.pr_auc = pooled_pr_curve(scored, radius).auc;
    return gm;
}

}  // namespace detail

/// Scores a results file against manifest ground truth (mitotic figures
/// only). Metrics are micro-averaged over the slides present in the results;
/// records with per-file errors are listed and skipped.
inline EvalReport evaluate_results(const Results& results,
                                   const dataio::DatasetManifest& manifest,
                                   double radius) {
    std::vector<detail::SlideEval> evals;
    EvalReport report;
    report.radius = radius;
    for (const auto& r : results) {
        const dataio::SlideRecord* slide = manifest.find(r.slide_id);
        if (!slide) {
            throw std::runtime_error("evaluate_results: unknown slide_id \"" + r.slide_id +
                                     "\" in results");
        }
        if (!r.error.empty()) {
            report.skipped.push_back(r.slide_id);
            continue;
        }
        detail::SlideEval se;
        se.result = &r;
        se.scanner = slide->domain.name;
        for (const auto& ann : slide->annotations) {
            if (ann.label == AnnotationLabel::kMitosis) se.gts.push_back(ann.centroid);
        }
        evals.push_back(std::move(se));
    }

    std::vector<const detail::SlideEval*> all;
    std::map<std::string, std::vector<const detail::SlideEval*>> by_scanner;
    for (const auto& se : evals) {
        all.push_back(&se);
        by_scanner[se.scanner].push_back(&se);
    }
    report.overall = detail::group_metrics(all, radius);
    for (const auto& [scanner, group] : by_scanner) {
        report.per_scanner[scanner] = detail::group_metrics(group, radius);
    }
    if (report.overall.tp + report.overall.fp + report.overall.fn == 0) {
        report.note = "no predictions and no ground truth; metrics are 0 by the 0/0 convention";
    }
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    auto group = [](const GroupMetrics& gm) {
        return nlohmann::json{{"tp", gm.tp},           {"fp", gm.fp},
                              {"fn", gm.fn},           {"precision", gm.prf.precision},
                              {"recall", gm.prf.recall}, {"f1", gm.prf.f1},
                              {"pr_auc", gm.pr_auc},   {"slides", gm.slides}};
    };
    nlohmann::json doc;
    doc["radius"] = report.radius;
    doc["overall"] = group(report.overall);
    doc["per_scanner"] = nlohmann::json::object();
    for (const auto& [scanner, gm] : report.per_scanner) doc["per_scanner"][scanner] = group(gm);
    if (!report.skipped.empty()) doc["skipped"] = report.skipped;
    if (!report.note.empty()) doc["note"] = report.note;
    return doc;
}

inline std::string format_report(const EvalReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    auto row = [&os](const std::string& name, const GroupMetrics& gm) {
        os << std::left << std::setw(12) << name << std::right
           << std::setw(7) << gm.slides << std::setw(7) << gm.tp << std::setw(7) << gm.fp
           << std::setw(7) << gm.fn << std::setw(11) << gm.prf.precision
           << std::setw(11) << gm.prf.recall << std::setw(11) << gm.prf.f1
           << std::setw(11) << gm.pr_auc << "\n";
    };
    os << std::left << std::setw(12) << "scanner" << std::right
       << std::setw(7) << "slides" << std::setw(7) << "tp" << std::setw(7) << "fp"
       << std::setw(7) << "fn" << std::setw(11) << "precision" << std::setw(11) << "recall"
       << std::setw(11) << "f1" << std::setw(11) << "pr-auc" << "\n";
    for (const auto& [scanner, gm] : report.per_scanner) row(scanner, gm);
    row("overall", report.overall);
    if (!report.skipped.empty()) {
        os << "skipped (per-file errors):";
        for (const auto& id : report.skipped) os << " " << id;
        os << "\n";
    }
    if (!report.note.empty()) os << "note: " << report.note << "\n";
    return os.str();
}

}  // namespace mito::eval
