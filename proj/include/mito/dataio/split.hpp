#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/core/random.hpp"
#include "mito/dataio/manifest.hpp"

namespace mito::dataio {

struct SplitAssignment {
    std::set<std::string> train;
    std::set<std::string> val;

    bool in_train(const std::string& id) const { return train.count(id) > 0; }
    bool in_val(const std::string& id) const { return val.count(id) > 0; }
};

/// Per annotated scanner, slides are ordered by mitosis count (ties broken by
/// a seed-keyed hash, then slide id) and the validation slides are taken at
/// evenly spaced quantiles of that ordering, so validation always spans the
/// non-mitotic-to-highly-mitotic range. Unannotated-scanner slides all go to
/// train (they feed GAN training only).
inline SplitAssignment stratified_split(const DatasetManifest& manifest,
                                        int val_per_scanner,
                                        std::uint64_t seed) {
    if (val_per_scanner < 1) {
        throw std::invalid_argument("stratified_split: val_per_scanner must be >= 1");
    }
    SplitAssignment split;
    for (const auto& domain : manifest.domains()) {
        std::vector<const SlideRecord*> slides;
        for (const auto& s : manifest.slides) {
            if (s.domain == domain) slides.push_back(&s);
        }
        if (!domain.annotated) {
            for (const auto* s : slides) split.train.insert(s->slide_id);
            continue;
        }
        const int n = static_cast<int>(slides.size());
        if (n < val_per_scanner) {
            throw std::runtime_error("stratified_split: scanner " + domain.name + " has " +
                                     std::to_string(n) + " slides, needs >= " +
                                     std::to_string(val_per_scanner));
        }
        std::sort(slides.begin(), slides.end(),
                  [seed](const SlideRecord* a, const SlideRecord* b) {
                      const int ca = a->mitosis_count(), cb = b->mitosis_count();
                      if (ca != cb) return ca < cb;
                      const std::uint64_t ha = mix64(seed ^ fnv1a64(a->slide_id));
                      const std::uint64_t hb = mix64(seed ^ fnv1a64(b->slide_id));
                      if (ha != hb) return ha < hb;
                      return a->slide_id < b->slide_id;
                  });

        std::set<int> val_indices;
        if (val_per_scanner == 1) {
            val_indices.insert((n - 1) / 2);
        } else {
            for (int i = 0; i < val_per_scanner; ++i) {
                val_indices.insert(static_cast<int>(
                    static_cast<long long>(i) * (n - 1) / (val_per_scanner - 1)));
            }
        }
        for (int i = 0; i < n; ++i) {
            if (val_indices.count(i)) {
                split.val.insert(slides[i]->slide_id);
            } else {
                split.train.insert(slides[i]->slide_id);
            }
        }
    }
    return split;
}

inline void save_split(const SplitAssignment& split, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["train"] = std::vector<std::string>(split.train.begin(), split.train.end());
    doc["val"] = std::vector<std::string>(split.val.begin(), split.val.end());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_split: cannot open " + path.string());
    out << doc.dump(2) << "\n";
}

inline SplitAssignment load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_split: cannot open " + path.string());
    const nlohmann::json doc = nlohmann::json::parse(in);
    SplitAssignment split;
    for (const auto& id : doc.at("train")) split.train.insert(id.get<std::string>());
    for (const auto& id : doc.at("val")) split.val.insert(id.get<std::string>());
    return split;
}

}  // namespace mito::dataio
