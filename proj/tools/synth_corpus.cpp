// Generates the synthetic two-domain demo corpus (PNG frames + manifest)
// used by the README walkthrough and the verification suites.

#include <CLI11.hpp>

#include <iostream>

#include "mito/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mito-synth: synthetic two-domain demo corpus generator"};
    std::string out = "synth_data";
    std::string seeds_out;
    int seed_count = 0;
    bool no_boxes = false;
    mito::synthetic::SynthConfig cfg;
    app.add_option("--out", out, "output directory");
    app.add_option("--frames", cfg.frames_per_domain, "frames per domain");
    app.add_option("--size", cfg.frame_size, "frame side length in pixels");
    app.add_option("--seed", cfg.seed, "corpus seed");
    app.add_flag("--no-boxes", no_boxes,
                 "omit ground-truth boxes (exercise the bootstrap workflow)");
    app.add_option("--seeds", seed_count, "also write this many seed masks");
    app.add_option("--seeds-out", seeds_out, "seed mask directory (default <out>/seeds)");
    CLI11_PARSE(app, argc, argv);

    cfg.with_boxes = !no_boxes;
    const auto corpus = mito::synthetic::generate_corpus(cfg);
    mito::synthetic::write_corpus(corpus, out);
    long mitoses = 0, negatives = 0;
    for (const auto& slide : corpus.manifest.slides) {
        for (const auto& ann : slide.annotations) {
            (ann.label == mito::AnnotationLabel::kMitosis ? mitoses : negatives)++;
        }
    }
    std::cout << "wrote " << corpus.manifest.slides.size() << " frames (" << mitoses
              << " mitoses, " << negatives << " hard negatives) to " << out << "\n";
    if (seed_count > 0) {
        const auto dir = seeds_out.empty() ? std::filesystem::path(out) / "seeds"
                                           : std::filesystem::path(seeds_out);
        const int written = mito::synthetic::write_seed_masks(corpus, dir, seed_count);
        std::cout << "wrote " << written << " seed masks to " << dir << "\n";
    }
    return 0;
}
