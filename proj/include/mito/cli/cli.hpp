#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "mito/backbones/classifier_nets.hpp"
#include "mito/backbones/convseg.hpp"
#include "mito/bootstrap/bootstrap.hpp"
#include "mito/cascade/cascade.hpp"
#include "mito/classifier/train.hpp"
#include "mito/config.hpp"
#include "mito/detector/train.hpp"
#include "mito/domaingan/train.hpp"
#include "mito/eval/report.hpp"
#include "mito/synthetic.hpp"
#include "mito/version.hpp"

namespace mito::cli {

namespace detail {

inline void write_run_record(const std::filesystem::path& path, const std::string& command,
                             const Config& cfg, std::uint64_t seed) {
    nlohmann::json doc;
    doc["command"] = command;
    doc["config_hash"] = cfg.hash();
    doc["seed"] = seed;
    doc["version"] = kVersion;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write run record " + path.string());
    out << doc.dump(2) << "\n";
}

inline gan::GanTrainConfig gan_config(const Config& c, std::uint64_t seed) {
    gan::GanTrainConfig g;
    g.cycle_weight = c.get_double("gan", "cycle_weight", g.cycle_weight);
    g.iterations = static_cast<int>(c.get_int("gan", "iterations", g.iterations));
    g.learning_rate = c.get_double("gan", "learning_rate", g.learning_rate);
    g.beta1 = c.get_double("gan", "beta1", g.beta1);
    g.beta2 = c.get_double("gan", "beta2", g.beta2);
    g.batch_size = static_cast<int>(c.get_int("gan", "batch_size", g.batch_size));
    g.patch_size = static_cast<int>(c.get_int("gan", "patch_size", g.patch_size));
    g.generator_width = static_cast<int>(c.get_int("gan", "generator_width", g.generator_width));
    g.discriminator_width =
        static_cast<int>(c.get_int("gan", "discriminator_width", g.discriminator_width));
    g.log_every = static_cast<int>(c.get_int("gan", "log_every", g.log_every));
    g.seed = c.get_u64("gan", "seed", seed);
    return g;
}

inline detector::DetectorTrainConfig detector_config(const Config& c, std::uint64_t seed) {
    detector::DetectorTrainConfig d;
    d.patch_size = static_cast<int>(c.get_int("detector", "patch_size", d.patch_size));
    d.lr0 = c.get_double("detector", "lr0", d.lr0);
    d.plateau_factor = c.get_double("detector", "plateau_factor", d.plateau_factor);
    d.plateau_patience =
        static_cast<int>(c.get_int("detector", "plateau_patience", d.plateau_patience));
    d.warmup_epochs = static_cast<int>(c.get_int("detector", "warmup_epochs", d.warmup_epochs));
    d.unfrozen_blocks =
        static_cast<int>(c.get_int("detector", "unfrozen_blocks", d.unfrozen_blocks));
    d.max_epochs = static_cast<int>(c.get_int("detector", "max_epochs", d.max_epochs));
    d.momentum = c.get_double("detector", "momentum", d.momentum);
    d.weight_decay = c.get_double("detector", "weight_decay", d.weight_decay);
    d.max_shear = c.get_double("detector", "max_shear", d.max_shear);
    d.val_tile = static_cast<int>(c.get_int("detector", "val_tile", d.val_tile));
    d.val_overlap = static_cast<int>(c.get_int("detector", "val_overlap", d.val_overlap));
    d.val_min_score = c.get_double("detector", "val_min_score", d.val_min_score);
    d.dedup_radius = c.get_double("detector", "dedup_radius", d.dedup_radius);
    d.steps_per_epoch = c.get_int("detector", "steps_per_epoch", d.steps_per_epoch);
    d.seed = c.get_u64("detector", "seed", seed);
    return d;
}

inline classifier::ClassifierTrainConfig classifier_config(const Config& c, std::uint64_t seed) {
    classifier::ClassifierTrainConfig k;
    k.batch_size = static_cast<int>(c.get_int("classifier", "batch_size", k.batch_size));
    k.epochs = static_cast<int>(c.get_int("classifier", "epochs", k.epochs));
    k.lr0 = c.get_double("classifier", "lr0", k.lr0);
    k.focal_gamma = c.get_double("classifier", "focal_gamma", k.focal_gamma);
    k.focal_alpha = c.get_double("classifier", "focal_alpha", k.focal_alpha);
    k.unfreeze_backbone_after = static_cast<int>(
        c.get_int("classifier", "unfreeze_backbone_after", k.unfreeze_backbone_after));
    k.patch_px = static_cast<int>(c.get_int("classifier", "patch_px", k.patch_px));
    k.resize_to = static_cast<int>(c.get_int("classifier", "resize_to", k.resize_to));
    k.seed = c.get_u64("classifier", "seed", seed);
    return k;
}

inline augment::AugmentPolicy augment_policy(const Config& c) {
    augment::AugmentPolicy p;
    p.n = static_cast<int>(c.get_int("augment", "n", p.n));
    p.m = c.get_double("augment", "m", p.m);
    const std::string ops = c.get("augment", "ops", "");
    if (!ops.empty()) {
        std::vector<std::string> names;
        std::string cur;
        for (char ch : ops + ",") {
            if (ch == ',') {
                if (!cur.empty()) names.push_back(cur);
                cur.clear();
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                cur += ch;
            }
        }
        p.select_ops(names);
    }
    return p;
}

inline cascade::CascadeConfig cascade_config(const Config& c) {
    cascade::CascadeConfig k;
    k.detector_dir = c.get("cascade", "detector", k.detector_dir);
    k.ensemble_path = c.get("cascade", "ensemble", k.ensemble_path);
    k.tile = static_cast<int>(c.get_int("cascade", "tile", k.tile));
    k.overlap = static_cast<int>(c.get_int("cascade", "overlap", k.overlap));
    k.min_score = c.get_double("cascade", "min_score", k.min_score);
    k.dedup_radius = c.get_double("cascade", "dedup_radius", k.dedup_radius);
    k.accept_threshold = c.get_double("cascade", "accept_threshold", k.accept_threshold);
    k.workers = static_cast<int>(c.get_int("cascade", "workers", k.workers));
    return k;
}

/// Random patch of one domain's frames, normalized for GAN training.
inline gan::PatchStream domain_patch_stream(const dataio::DatasetManifest& manifest,
                                            dataio::FrameStore& frames,
                                            const ScannerDomain& domain, int patch_size,
                                            std::shared_ptr<Rng> rng) {
    auto slide_ids = std::make_shared<std::vector<std::string>>();
    for (const auto& slide : manifest.slides) {
        if (slide.domain == domain) slide_ids->push_back(slide.slide_id);
    }
    if (slide_ids->empty()) {
        throw std::runtime_error("no slides for scanner domain " + domain.name);
    }
    return [&manifest, &frames, slide_ids, patch_size, rng]() {
        const std::string& id = (*slide_ids)[rng->uniform_index(slide_ids->size())];
        const Frame& frame = frames.get(id);
        const double cx = rng->uniform(0.0, frame.width() - 1e-9);
        const double cy = rng->uniform(0.0, frame.height() - 1e-9);
        return gan::normalize_image(extract_patch(frame.pixels, Point{cx, cy}, patch_size));
    };
}

inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".png" || ext == ".tif" || ext == ".tiff")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

inline dataio::SplitAssignment resolve_split(const dataio::DatasetManifest& manifest,
                                             const std::string& split_path, const Config& cfg,
                                             std::uint64_t seed) {
    if (!split_path.empty()) return dataio::load_split(split_path);
    const int per_scanner = static_cast<int>(cfg.get_int("split", "val_per_scanner", 5));
    return dataio::stratified_split(manifest, per_scanner,
                                    cfg.get_u64("split", "seed", seed));
}

}  // namespace detail

/// Multi-command entrypoint; returns the process exit code.
/// 0 = success, 1 = runtime/config failure, 2 = usage error.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"mitocascade: domain-robust mitosis detection cascade"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags (--seed, --config, --workers) after the subcommand
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 1;
    app.add_option("--config", config_path, "run configuration file (key = value sections)");
    app.add_option("--seed", seed, "global seed; section-level seeds override");
    app.add_option("--workers", workers, "worker threads for batch stages");

    auto load_config = [&]() {
        return config_path.empty() ? Config() : Config::parse_file(config_path);
    };

    // ---------------------------------------------------------------- split
    auto* sc_split = app.add_subcommand("split", "45/5-style per-scanner stratified split");
    auto split_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_split->add_option("--manifest", (*split_opts)["manifest"], "dataset manifest")->required();
    (*split_opts)["out"] = "split.json";
    sc_split->add_option("--out", (*split_opts)["out"], "output split file");
    auto val_per_scanner = std::make_shared<int>(5);
    sc_split->add_option("--val-per-scanner", *val_per_scanner, "validation slides per scanner");
    sc_split->callback([&, split_opts, val_per_scanner]() {
        const auto manifest = dataio::load_manifest((*split_opts)["manifest"]);
        const auto split = dataio::stratified_split(manifest, *val_per_scanner, seed);
        dataio::save_split(split, (*split_opts)["out"]);
        std::cout << "split: " << split.train.size() << " train / " << split.val.size()
                  << " val slides -> " << (*split_opts)["out"] << "\n";
    });

    // ------------------------------------------------------------- gan-train
    auto* sc_gan = app.add_subcommand("gan-train", "train one residual Cycle-GAN domain pair");
    auto gan_pair = std::make_shared<std::vector<std::string>>();
    auto gan_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_gan->add_option("--pair", *gan_pair, "source and target scanner names")
        ->expected(2)
        ->required();
    sc_gan->add_option("--manifest", (*gan_opts)["manifest"], "dataset manifest")->required();
    (*gan_opts)["out"] = "gan";
    sc_gan->add_option("--out", (*gan_opts)["out"], "checkpoint directory");
    auto gan_iters = std::make_shared<int>(0);
    sc_gan->add_option("--iterations", *gan_iters, "override [gan] iterations");
    sc_gan->callback([&, gan_pair, gan_opts, gan_iters]() {
        const Config cfg = load_config();
        gan::GanTrainConfig gcfg = detail::gan_config(cfg, seed);
        if (*gan_iters > 0) gcfg.iterations = *gan_iters;

        const auto manifest = dataio::load_manifest((*gan_opts)["manifest"]);
        dataio::DirectoryFrameStore frames(manifest);
        ScannerDomain a, b;
        bool found_a = false, found_b = false;
        for (const auto& d : manifest.domains()) {
            if (d.name == (*gan_pair)[0]) {
                a = d;
                found_a = true;
            }
            if (d.name == (*gan_pair)[1]) {
                b = d;
                found_b = true;
            }
        }
        if (!found_a || !found_b) {
            throw std::runtime_error("gan-train: pair names not found in the manifest");
        }

        auto rng = std::make_shared<Rng>(Rng(gcfg.seed).derive("stream").seed());
        const auto stream_a =
            detail::domain_patch_stream(manifest, frames, a, gcfg.patch_size, rng);
        const auto stream_b =
            detail::domain_patch_stream(manifest, frames, b, gcfg.patch_size, rng);

        const std::filesystem::path out_dir((*gan_opts)["out"]);
        std::filesystem::create_directories(out_dir);
        std::ofstream metrics(out_dir / (a.name + "_" + b.name + "_metrics.csv"));
        metrics << "iteration,loss_g,loss_d,cycle,mean_abs_residual\n";
        auto result = gan::train_pair(a, b, stream_a, stream_b, gcfg,
                                      [&](const gan::GanIterationLog& log) {
                                          metrics << log.iteration << "," << log.loss_g << ","
                                                  << log.loss_d << "," << log.cycle << ","
                                                  << log.mean_abs_residual << "\n";
                                      });
        gan::save_pair_checkpoints(out_dir, a, b, result, gcfg);
        detail::write_run_record(out_dir / ("run_" + a.name + "_" + b.name + ".json"),
                                 "gan-train", cfg, gcfg.seed);
        if (result.aborted_nan) {
            throw std::runtime_error("gan-train: diverged (NaN); last finite state checkpointed");
        }
        std::cout << "gan-train: " << a.name << " <-> " << b.name << " done after "
                  << result.iterations_run << " iterations; mean |residual| = "
                  << result.history.back().mean_abs_residual << "\n";
    });

    // ------------------------------------------------------------- gan-apply
    auto* sc_apply = app.add_subcommand("gan-apply", "batch-apply one directed generator");
    auto apply_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_apply->add_option("--src", (*apply_opts)["src"], "source scanner name")->required();
    sc_apply->add_option("--dst", (*apply_opts)["dst"], "target scanner name")->required();
    sc_apply->add_option("--in", (*apply_opts)["in"], "input image directory")->required();
    sc_apply->add_option("--out", (*apply_opts)["out"], "output directory")->required();
    (*apply_opts)["gan"] = "gan";
    sc_apply->add_option("--gan-dir", (*apply_opts)["gan"], "checkpoint directory");
    sc_apply->callback([&, apply_opts]() {
        const auto tset = gan::load_transform_set((*apply_opts)["gan"]);
        const ScannerDomain src = ScannerDomain::from_name((*apply_opts)["src"]);
        const ScannerDomain dst = ScannerDomain::from_name((*apply_opts)["dst"]);
        const gan::ResidualGenerator& g = tset.get(src, dst);
        std::filesystem::create_directories((*apply_opts)["out"]);
        int count = 0;
        for (const auto& file : detail::list_images((*apply_opts)["in"])) {
            const ImageU8 img = dataio::ensure_rgb(dataio::read_image(file));
            dataio::write_png(std::filesystem::path((*apply_opts)["out"]) /
                                  (file.stem().string() + ".png"),
                              g.apply(img));
            ++count;
        }
        std::cout << "gan-apply: " << count << " images " << src.name << " -> " << dst.name
                  << "\n";
    });

    // -------------------------------------------------------------- gan-grid
    auto* sc_grid = app.add_subcommand("gan-grid",
                                       "all-domains transfer grid (originals on the diagonal)");
    auto grid_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_grid->add_option("--manifest", (*grid_opts)["manifest"], "dataset manifest")->required();
    (*grid_opts)["gan"] = "gan";
    sc_grid->add_option("--gan-dir", (*grid_opts)["gan"], "checkpoint directory");
    (*grid_opts)["out"] = "grid.png";
    sc_grid->add_option("--out", (*grid_opts)["out"], "output montage path");
    auto grid_patch = std::make_shared<int>(96);
    sc_grid->add_option("--patch", *grid_patch, "patch size per cell");
    sc_grid->callback([&, grid_opts, grid_patch]() {
        const auto manifest = dataio::load_manifest((*grid_opts)["manifest"]);
        dataio::DirectoryFrameStore frames(manifest);
        const auto tset = gan::load_transform_set((*grid_opts)["gan"]);
        const auto domains = manifest.domains();
        if (domains.empty()) throw std::runtime_error("gan-grid: empty manifest");

        const int cell = *grid_patch;
        const int sep = 2;
        const int n = static_cast<int>(domains.size());
        ImageU8 grid(n * cell + (n + 1) * sep, n * cell + (n + 1) * sep, 3, 255);
        for (int row = 0; row < n; ++row) {
            const dataio::SlideRecord* slide = nullptr;
            for (const auto& s : manifest.slides) {
                if (s.domain == domains[row] && (!slide || s.slide_id < slide->slide_id)) {
                    slide = &s;
                }
            }
            const Frame& frame = frames.get(slide->slide_id);
            const ImageU8 patch = extract_patch(
                frame.pixels, Point{frame.width() / 2.0, frame.height() / 2.0}, cell);
            for (int col = 0; col < n; ++col) {
                const ImageU8 cell_img = tset.get(domains[row], domains[col]).apply(patch);
                const int ox = sep + col * (cell + sep);
                const int oy = sep + row * (cell + sep);
                for (int y = 0; y < cell; ++y) {
                    for (int x = 0; x < cell; ++x) {
                        for (int c = 0; c < 3; ++c) {
                            grid.at(ox + x, oy + y, c) = cell_img.at(x, y, c);
                        }
                    }
                }
            }
        }
        dataio::write_png((*grid_opts)["out"], grid);
        std::cout << "gan-grid: " << n << "x" << n << " grid -> " << (*grid_opts)["out"] << "\n";
    });

    // -------------------------------------------------------- bootstrap-masks
    auto* sc_boot = app.add_subcommand("bootstrap-masks",
                                       "grow boxes/masks for centroid annotations");
    auto boot_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_boot->add_option("--manifest", (*boot_opts)["manifest"], "dataset manifest")->required();
    sc_boot->add_option("--seeds", (*boot_opts)["seeds"],
                        "seed mask directory ({slide}_{annotation}.png)");
    sc_boot->add_option("--out", (*boot_opts)["out"], "output manifest path")->required();
    sc_boot->add_option("--difficult", (*boot_opts)["difficult"], "difficult work-list JSON");
    sc_boot->add_option("--patches", (*boot_opts)["patches"], "inspection patch directory");
    sc_boot->add_option("--merge-manual", (*boot_opts)["manual"],
                        "merge completed masks from this directory instead of bootstrapping");
    sc_boot->callback([&, boot_opts]() {
        const Config cfg = load_config();
        bootstrap::BootstrapConfig bcfg;
        bcfg.patch_size = static_cast<int>(cfg.get_int("bootstrap", "patch_size", 128));
        bcfg.threshold = cfg.get_double("bootstrap", "threshold", 0.5);
        bcfg.min_area = static_cast<int>(cfg.get_int("bootstrap", "min_area", 9));

        auto manifest = dataio::load_manifest((*boot_opts)["manifest"]);
        if (!(*boot_opts)["manual"].empty()) {
            const int merged =
                bootstrap::merge_manual_masks(manifest, (*boot_opts)["manual"], bcfg);
            dataio::save_manifest(manifest, (*boot_opts)["out"]);
            std::cout << "bootstrap-masks: merged " << merged << " manual masks -> "
                      << (*boot_opts)["out"] << "\n";
            return;
        }
        if ((*boot_opts)["seeds"].empty()) {
            throw std::runtime_error("bootstrap-masks: --seeds is required unless merging");
        }

        dataio::DirectoryFrameStore frames(manifest);
        const auto seeds = bootstrap::load_seed_masks((*boot_opts)["seeds"], manifest);
        backbones::ConvSegSegmenterConfig scfg;
        scfg.width = static_cast<int>(cfg.get_int("bootstrap", "width", scfg.width));
        scfg.epochs = static_cast<int>(cfg.get_int("bootstrap", "epochs", scfg.epochs));
        scfg.lr = cfg.get_double("bootstrap", "lr", scfg.lr);
        scfg.seed = cfg.get_u64("bootstrap", "seed", seed);
        auto factory = [&scfg]() {
            return std::make_unique<backbones::ConvSegSegmenter>(scfg);
        };
        const auto result = bootstrap::bootstrap_dataset(manifest, frames, seeds, factory, bcfg,
                                                         (*boot_opts)["patches"]);
        dataio::save_manifest(result.manifest, (*boot_opts)["out"]);
        if (!(*boot_opts)["difficult"].empty()) {
            bootstrap::save_difficult_list(result.difficult, (*boot_opts)["difficult"]);
        }
        detail::write_run_record((*boot_opts)["out"] + ".run.json", "bootstrap-masks", cfg,
                                 scfg.seed);
        std::cout << "bootstrap-masks: " << result.stats.count << " boxes, diagonal "
                  << result.stats.mean_diagonal << " +- " << result.stats.std_diagonal
                  << " px; " << result.difficult.size() << " difficult -> "
                  << (*boot_opts)["out"] << "\n";
    });

    // ---------------------------------------------------------- detector-train
    auto* sc_det = app.add_subcommand("detector-train", "train the candidate detector stage");
    auto det_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_det->add_option("--manifest", (*det_opts)["manifest"], "boxed dataset manifest")
        ->required();
    sc_det->add_option("--split", (*det_opts)["split"], "split file (default: stratified)");
    sc_det->add_option("--gan-dir", (*det_opts)["gan"], "domain transform checkpoints");
    sc_det->add_option("--out", (*det_opts)["out"], "checkpoint directory")->required();
    sc_det->callback([&, det_opts]() {
        const Config cfg = load_config();
        const detector::DetectorTrainConfig dcfg = detail::detector_config(cfg, seed);
        const auto manifest = dataio::load_manifest((*det_opts)["manifest"]);
        dataio::DirectoryFrameStore frames(manifest);
        const auto split = detail::resolve_split(manifest, (*det_opts)["split"], cfg, seed);

        gan::DomainTransformSet tset;
        if (!(*det_opts)["gan"].empty()) tset = gan::load_transform_set((*det_opts)["gan"]);

        backbones::ConvSegDetectorConfig bcfg;
        bcfg.width = static_cast<int>(cfg.get_int("detector", "width", bcfg.width));
        bcfg.momentum = dcfg.momentum;
        bcfg.weight_decay = dcfg.weight_decay;
        bcfg.proposal_threshold =
            cfg.get_double("detector", "proposal_threshold", bcfg.proposal_threshold);
        bcfg.pos_weight = cfg.get_double("detector", "pos_weight", bcfg.pos_weight);
        bcfg.seed = dcfg.seed;
        backbones::ConvSegDetector backbone(bcfg);

        const std::filesystem::path out_dir((*det_opts)["out"]);
        std::filesystem::create_directories(out_dir);
        std::ofstream metrics(out_dir / "metrics.csv");
        metrics << "epoch,mean_loss,val_pr_auc,lr\n";
        const auto result = detector::train_detector(
            manifest, frames, split, dcfg, tset.empty() ? nullptr : &tset, backbone,
            out_dir / "detector.weights", [&](const detector::DetectorEpochLog& log) {
                metrics << log.epoch << "," << log.mean_loss << "," << log.val_pr_auc << ","
                        << log.lr << "\n";
                std::cout << "epoch " << log.epoch << ": loss " << log.mean_loss
                          << ", val PR-AUC " << log.val_pr_auc << ", lr " << log.lr << "\n";
            });
        detector::save_detector_sidecar(out_dir / "detector.json", backbone.id(), result, dcfg,
                                        cfg.hash());
        detail::write_run_record(out_dir / "run.json", "detector-train", cfg, dcfg.seed);
        if (result.aborted_nan) {
            throw std::runtime_error("detector-train: aborted on NaN loss");
        }
        std::cout << "detector-train: best epoch " << result.best_epoch << " (val PR-AUC "
                  << result.best_val_pr_auc << ") -> " << (out_dir / "detector.weights") << "\n";
    });

    // --------------------------------------------------------- classifier-train
    auto* sc_cls = app.add_subcommand("classifier-train", "train one ensemble member");
    auto cls_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_cls->add_option("--member", (*cls_opts)["member"], "member family: resnet | densenet")
        ->required();
    sc_cls->add_option("--manifest", (*cls_opts)["manifest"], "dataset manifest")->required();
    sc_cls->add_option("--split", (*cls_opts)["split"], "split file (default: stratified)");
    sc_cls->add_option("--gan-dir", (*cls_opts)["gan"], "domain transform checkpoints");
    sc_cls->add_option("--out", (*cls_opts)["out"], "checkpoint directory")->required();
    sc_cls->callback([&, cls_opts]() {
        const Config cfg = load_config();
        const classifier::ClassifierTrainConfig kcfg = detail::classifier_config(cfg, seed);
        const augment::AugmentPolicy policy = detail::augment_policy(cfg);
        const auto manifest = dataio::load_manifest((*cls_opts)["manifest"]);
        dataio::DirectoryFrameStore frames(manifest);
        const auto split = detail::resolve_split(manifest, (*cls_opts)["split"], cfg, seed);

        gan::DomainTransformSet tset;
        if (!(*cls_opts)["gan"].empty()) tset = gan::load_transform_set((*cls_opts)["gan"]);
        if (tset.empty()) {
            std::cerr << "[classifier] no domain transform set; training without GAN "
                         "augmentation\n";
        }

        const int width = static_cast<int>(cfg.get_int("classifier", "backbone_width", 12));
        const int head = static_cast<int>(cfg.get_int("classifier", "head_channels", 8));
        backbones::ClassifierMember member((*cls_opts)["member"], kcfg.resize_to, width, head,
                                           Rng(kcfg.seed).derive("member").seed());

        const std::filesystem::path out_dir((*cls_opts)["out"]);
        std::filesystem::create_directories(out_dir);
        std::ofstream metrics(out_dir / "metrics.csv");
        metrics << "epoch,mean_loss,val_f1,lr\n";
        const auto result = classifier::train_member(
            manifest, frames, split, kcfg, tset.empty() ? nullptr : &tset, policy, member,
            out_dir / "member.weights", [&](const classifier::ClassifierEpochLog& log) {
                metrics << log.epoch << "," << log.mean_loss << "," << log.val_f1 << ","
                        << log.lr << "\n";
                std::cout << "epoch " << log.epoch << ": loss " << log.mean_loss << ", val F1 "
                          << log.val_f1 << ", lr " << log.lr << "\n";
            });

        nlohmann::json extra;
        extra["best_epoch"] = result.best_epoch;
        extra["best_val_f1"] = result.best_val_f1;
        extra["patch_px"] = kcfg.patch_px;
        extra["config"] = kcfg.to_json();
        extra["config_hash"] = cfg.hash();
        extra["seed"] = kcfg.seed;
        // Reload the best snapshot so the sidecar describes the saved weights.
        if (result.best_epoch > 0) member.load(out_dir / "member.weights");
        classifier::save_member_checkpoint(out_dir, member, extra);
        detail::write_run_record(out_dir / "run.json", "classifier-train", cfg, kcfg.seed);
        if (result.aborted_nan) {
            throw std::runtime_error("classifier-train: aborted on NaN loss");
        }
        std::cout << "classifier-train: " << (*cls_opts)["member"] << " best epoch "
                  << result.best_epoch << " (val F1 " << result.best_val_f1 << ") -> " << out_dir
                  << "\n";
    });

    // ----------------------------------------------------------- ensemble-build
    auto* sc_ens = app.add_subcommand("ensemble-build", "assemble the classifier ensemble");
    auto ens_members = std::make_shared<std::vector<std::string>>();
    auto ens_opts = std::make_shared<std::map<std::string, std::string>>();
    auto ens_weights = std::make_shared<std::vector<double>>();
    auto ens_threshold = std::make_shared<double>(0.5);
    auto ens_fit = std::make_shared<bool>(false);
    sc_ens->add_option("--member", *ens_members, "member checkpoint directory (repeatable)")
        ->required();
    sc_ens->add_option("--out", (*ens_opts)["out"], "ensemble descriptor path")->required();
    sc_ens->add_option("--weights", *ens_weights, "member weights (default: equal)");
    sc_ens->add_option("--threshold", *ens_threshold, "accept threshold");
    sc_ens->add_flag("--fit-from-val", *ens_fit,
                     "weights proportional to each member's validation F1");
    sc_ens->callback([&, ens_members, ens_opts, ens_weights, ens_threshold, ens_fit]() {
        const Config cfg = load_config();
        classifier::EnsembleWeights weights;
        if (*ens_fit) {
            for (const auto& dir : *ens_members) {
                const auto sidecar = classifier::read_member_sidecar(dir);
                weights.w.push_back(sidecar.at("best_val_f1").get<double>());
            }
        } else if (!ens_weights->empty()) {
            weights.w = *ens_weights;
        } else {
            weights.w.assign(ens_members->size(), 1.0);
        }
        int patch_px = 80;
        const auto sidecar = classifier::read_member_sidecar(ens_members->front());
        patch_px = sidecar.value("patch_px", patch_px);
        classifier::save_ensemble_descriptor((*ens_opts)["out"], *ens_members, weights,
                                             *ens_threshold, patch_px, cfg.hash());
        std::cout << "ensemble-build: " << ens_members->size() << " members -> "
                  << (*ens_opts)["out"] << "\n";
    });

    // -------------------------------------------------------------------- infer
    auto* sc_infer = app.add_subcommand("infer", "run the cascade over a directory of frames");
    auto infer_opts = std::make_shared<std::map<std::string, std::string>>();
    sc_infer->add_option("--in", (*infer_opts)["in"], "input image directory")->required();
    sc_infer->add_option("--out", (*infer_opts)["out"], "results JSON path")->required();
    sc_infer->add_option("--detector", (*infer_opts)["detector"],
                         "detector checkpoint directory (overrides [cascade] detector)");
    sc_infer->add_option("--ensemble", (*infer_opts)["ensemble"],
                         "ensemble descriptor (overrides [cascade] ensemble)");
    sc_infer->callback([&, infer_opts]() {
        const Config cfg = load_config();
        cascade::CascadeConfig ccfg = detail::cascade_config(cfg);
        if (!(*infer_opts)["detector"].empty()) ccfg.detector_dir = (*infer_opts)["detector"];
        if (!(*infer_opts)["ensemble"].empty()) ccfg.ensemble_path = (*infer_opts)["ensemble"];
        if (workers > 1) ccfg.workers = workers;
        if (ccfg.detector_dir.empty() || ccfg.ensemble_path.empty()) {
            throw ConfigError("cascade.detector / cascade.ensemble: both artifacts are required");
        }
        const auto models = cascade::load_cascade_models(ccfg);
        const auto results = cascade::run_batch((*infer_opts)["in"], models, ccfg);
        eval::save_results(results, (*infer_opts)["out"]);
        detail::write_run_record((*infer_opts)["out"] + ".run.json", "infer", cfg, seed);
        long errors = 0;
        for (const auto& r : results) errors += r.error.empty() ? 0 : 1;
        std::cout << "infer: " << results.size() << " frames (" << errors << " errors) -> "
                  << (*infer_opts)["out"] << "\n";
    });

    // ----------------------------------------------------------------- evaluate
    auto* sc_eval = app.add_subcommand("evaluate", "score a results file against ground truth");
    auto eval_opts = std::make_shared<std::map<std::string, std::string>>();
    auto eval_radius = std::make_shared<double>(30.0);
    sc_eval->add_option("--results", (*eval_opts)["results"], "cascade results JSON")->required();
    sc_eval->add_option("--manifest", (*eval_opts)["manifest"], "dataset manifest")->required();
    sc_eval->add_option("--radius", *eval_radius,
                        "matching radius in pixels (the challenge value is not public)");
    sc_eval->add_option("--out", (*eval_opts)["out"], "report JSON path");
    sc_eval->callback([&, eval_opts, eval_radius]() {
        const auto results = eval::load_results((*eval_opts)["results"]);
        const auto manifest = dataio::load_manifest((*eval_opts)["manifest"]);
        const auto report = eval::evaluate_results(results, manifest, *eval_radius);
        std::cout << eval::format_report(report);
        if (!(*eval_opts)["out"].empty()) {
            std::ofstream out((*eval_opts)["out"]);
            out << eval::report_to_json(report).dump(2) << "\n";
        }
    });

    try {
        std::reverse(args.begin(), args.end());  // CLI11 expects a reversed vector
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace mito::cli
