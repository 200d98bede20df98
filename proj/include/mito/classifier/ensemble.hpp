#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mito/backbones/classifier_nets.hpp"
#include "mito/classifier/scorer.hpp"

namespace mito::classifier {

/// Non-negative member weights, normalized to sum 1 before use. Scaling all
/// weights by a positive constant therefore never changes merged scores.
struct EnsembleWeights {
    std::vector<double> w;

    std::vector<double> normalized() const {
        if (w.empty()) throw std::invalid_argument("EnsembleWeights: empty");
        double sum = 0.0;
        for (double v : w) {
            if (v < 0.0) throw std::invalid_argument("EnsembleWeights: weights must be >= 0");
            sum += v;
        }
        if (sum <= 0.0) throw std::invalid_argument("EnsembleWeights: weights sum to zero");
        std::vector<double> out = w;
        for (double& v : out) v /= sum;
        return out;
    }
};

/// Weighted average of member probabilities: the ensemble merge is linear in
/// the member outputs.
inline double merge_scores(const std::vector<double>& member_probs,
                           const EnsembleWeights& weights) {
    if (member_probs.size() != weights.w.size()) {
        throw std::invalid_argument("merge_scores: member/weight count mismatch");
    }
    const std::vector<double> norm = weights.normalized();
    double merged = 0.0;
    for (std::size_t i = 0; i < member_probs.size(); ++i) {
        merged += norm[i] * member_probs[i];
    }
    return merged;
}

/// Runs every member on one centroid patch and merges.
inline double classify_patch(const std::vector<const PatchScorer*>& members,
                             const EnsembleWeights& weights, const ImageU8& patch,
                             std::vector<double>* member_scores = nullptr) {
    if (members.size() != weights.w.size()) {
        throw std::invalid_argument("classify_patch: member/weight count mismatch");
    }
    std::vector<double> probs;
    for (const auto* member : members) probs.push_back(member->prob(patch));
    if (member_scores) *member_scores = probs;
    return merge_scores(probs, weights);
}

/// Loaded classifier ensemble plus its operating point.
struct Ensemble {
    std::vector<std::shared_ptr<PatchScorer>> members;
    EnsembleWeights weights;
    double accept_threshold = 0.5;
    int patch_px = 80;

    std::vector<const PatchScorer*> member_ptrs() const {
        std::vector<const PatchScorer*> out;
        for (const auto& m : members) out.push_back(m.get());
        return out;
    }
};

// ---------------------------------------------------------------------------
// Member checkpoints and the ensemble descriptor
// ---------------------------------------------------------------------------

struct MemberDescriptor {
    std::string family;
    int input_size = 224;
    int backbone_width = 12;
    int head_channels = 8;
    std::uint64_t seed = 0;
};

inline void save_member_checkpoint(const std::filesystem::path& dir,
                                   backbones::ClassifierMember& member,
                                   const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    member.save(dir / "member.weights");
    nlohmann::json sidecar = extra;
    sidecar["format_version"] = 1;
    sidecar["family"] = member.family();
    sidecar["input_size"] = member.input_size();
    sidecar["backbone_width"] = member.backbone_width();
    sidecar["head_channels"] = member.head_channels();
    std::ofstream out(dir / "member.json");
    if (!out) throw std::runtime_error("save_member_checkpoint: cannot write sidecar");
    out << sidecar.dump(2) << "\n";
}

inline std::unique_ptr<backbones::ClassifierMember> load_member_checkpoint(
    const std::filesystem::path& dir) {
    std::ifstream in(dir / "member.json");
    if (!in) throw std::runtime_error("load_member_checkpoint: no sidecar in " + dir.string());
    const nlohmann::json sidecar = nlohmann::json::parse(in);
    auto member = std::make_unique<backbones::ClassifierMember>(
        sidecar.at("family").get<std::string>(), sidecar.at("input_size").get<int>(),
        sidecar.at("backbone_width").get<int>(), sidecar.at("head_channels").get<int>(),
        sidecar.value("seed", 0ull));
    member->load(dir / "member.weights");
    return member;
}

inline nlohmann::json read_member_sidecar(const std::filesystem::path& dir) {
    std::ifstream in(dir / "member.json");
    if (!in) throw std::runtime_error("read_member_sidecar: no sidecar in " + dir.string());
    return nlohmann::json::parse(in);
}

/// Ensemble descriptor: member checkpoint paths, weights, operating point.
inline void save_ensemble_descriptor(const std::filesystem::path& path,
                                     const std::vector<std::string>& member_dirs,
                                     const EnsembleWeights& weights, double accept_threshold,
                                     int patch_px, const std::string& config_hash = "") {
    if (member_dirs.size() != weights.w.size()) {
        throw std::invalid_argument("save_ensemble_descriptor: member/weight count mismatch");
    }
    weights.normalized();  // validates
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["members"] = member_dirs;
    doc["weights"] = weights.w;
    doc["accept_threshold"] = accept_threshold;
    doc["patch_px"] = patch_px;
    if (!config_hash.empty()) doc["config_hash"] = config_hash;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_ensemble_descriptor: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

inline Ensemble load_ensemble(const std::filesystem::path& descriptor_path) {
    std::ifstream in(descriptor_path);
    if (!in) throw std::runtime_error("load_ensemble: cannot open " + descriptor_path.string());
    const nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.value("format_version", 0) != 1) {
        throw std::runtime_error("load_ensemble: incompatible descriptor version in " +
                                 descriptor_path.string());
    }
    Ensemble ens;
    const auto base = descriptor_path.has_parent_path() ? descriptor_path.parent_path()
                                                        : std::filesystem::path(".");
    for (const auto& rel : doc.at("members")) {
        std::filesystem::path dir(rel.get<std::string>());
        if (!dir.is_absolute()) dir = base / dir;
        ens.members.push_back(load_member_checkpoint(dir));
    }
    ens.weights.w = doc.at("weights").get<std::vector<double>>();
    if (ens.weights.w.size() != ens.members.size()) {
        throw std::runtime_error("load_ensemble: member/weight count mismatch");
    }
    ens.accept_threshold = doc.value("accept_threshold", 0.5);
    ens.patch_px = doc.value("patch_px", 80);
    return ens;
}

}  // namespace mito::classifier
