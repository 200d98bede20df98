#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/domaingan/generator.hpp"
#include "mito/domaingan/nets.hpp"
#include "mito/nn/optim.hpp"

namespace mito::gan {

struct GanTrainConfig {
    double cycle_weight = 10.0;     // weight of the L1 cycle-consistency term
    int iterations = 2000;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch_size = 1;
    int patch_size = 256;
    int generator_width = 8;
    int discriminator_width = 8;
    int log_every = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (cycle_weight <= 0) throw std::invalid_argument("GanTrainConfig: cycle_weight must be > 0");
        if (iterations < 1 || batch_size < 1 || patch_size < 1 || learning_rate <= 0) {
            throw std::invalid_argument("GanTrainConfig: invalid training parameters");
        }
    }

    nlohmann::json to_json() const {
        return {{"cycle_weight", cycle_weight}, {"iterations", iterations},
                {"learning_rate", learning_rate}, {"beta1", beta1}, {"beta2", beta2},
                {"batch_size", batch_size}, {"patch_size", patch_size},
                {"generator_width", generator_width},
                {"discriminator_width", discriminator_width}, {"seed", seed}};
    }
};

/// Training-time wrapper around a generator backbone that differentiates
/// through the residual head: out = clamp(x + tanh(raw), -1, 1).
class TrainableResidualGenerator {
public:
    explicit TrainableResidualGenerator(std::shared_ptr<ColorNetBackbone> backbone)
        : backbone_(std::move(backbone)) {}

    std::shared_ptr<ColorNetBackbone> backbone() { return backbone_; }

    nn::Tensor forward_train(const nn::Tensor& x) {
        const nn::Tensor raw = backbone_->forward_train(x);
        bounded_ = raw;
        for (auto& v : bounded_.v) v = std::tanh(v);
        nn::Tensor out = x;
        pass_.assign(x.v.size(), 1.f);
        double abs_residual = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) {
            float v = x.v[i] + bounded_.v[i];
            abs_residual += std::fabs(bounded_.v[i]);
            if (v < -1.f) {
                v = -1.f;
                pass_[i] = 0.f;
            } else if (v > 1.f) {
                v = 1.f;
                pass_[i] = 0.f;
            }
            out.v[i] = v;
        }
        mean_abs_residual_ = abs_residual / static_cast<double>(out.v.size());
        return out;
    }

    /// Returns d(loss)/d(input); backbone parameter grads accumulate.
    nn::Tensor backward(const nn::Tensor& dout) {
        nn::Tensor dsum = dout;
        for (std::size_t i = 0; i < dsum.v.size(); ++i) dsum.v[i] *= pass_[i];
        nn::Tensor draw = dsum;
        for (std::size_t i = 0; i < draw.v.size(); ++i) {
            draw.v[i] *= 1.f - bounded_.v[i] * bounded_.v[i];
        }
        nn::Tensor dx = backbone_->backward(draw);
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dsum.v[i];  // skip connection
        return dx;
    }

    double mean_abs_residual() const { return mean_abs_residual_; }

private:
    std::shared_ptr<ColorNetBackbone> backbone_;
    nn::Tensor bounded_;
    std::vector<float> pass_;
    double mean_abs_residual_ = 0.0;
};

/// Normalized-patch sampler contract for one domain's training stream.
using PatchStream = std::function<ImageF32()>;

struct GanIterationLog {
    int iteration = 0;
    double loss_g = 0.0;
    double loss_d = 0.0;
    double cycle = 0.0;
    double mean_abs_residual = 0.0;
};

struct GanTrainResult {
    std::shared_ptr<ColorNetBackbone> backbone_ab;
    std::shared_ptr<ColorNetBackbone> backbone_ba;
    std::shared_ptr<PatchDiscriminator> disc_a;
    std::shared_ptr<PatchDiscriminator> disc_b;
    std::vector<GanIterationLog> history;
    bool aborted_nan = false;
    int iterations_run = 0;

    ResidualGenerator generator_ab(const ScannerDomain& a, const ScannerDomain& b) const {
        return ResidualGenerator(a, b, backbone_ab);
    }
    ResidualGenerator generator_ba(const ScannerDomain& a, const ScannerDomain& b) const {
        return ResidualGenerator(b, a, backbone_ba);
    }
};

namespace detail {

struct ParamSnapshot {
    std::vector<std::vector<float>> values;

    static ParamSnapshot take(const std::vector<nn::ParamRef>& params) {
        ParamSnapshot s;
        for (const auto& p : params) s.values.push_back(*p.value);
        return s;
    }

    void restore(std::vector<nn::ParamRef>& params) const {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = values[i];
    }
};

/// Mean L1 gradient and value: loss = mean |x - ref|.
inline double l1_loss_grad(const nn::Tensor& x, const nn::Tensor& ref, nn::Tensor& dx) {
    dx = x;
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const float d = x.v[i] - ref.v[i];
        loss += std::fabs(d) * inv;
        dx.v[i] = static_cast<float>((d > 0.f ? 1.0 : d < 0.f ? -1.0 : 0.0) * inv);
    }
    return loss;
}

}  // namespace detail

/// Trains both directional residual generators of one domain pair with the
/// least-squares adversarial loss plus cycle_weight * L1 cycle consistency
/// (two generators, two discriminators, following the reference layout).
/// Diverging to NaN aborts with the last finite parameter state restored.
inline GanTrainResult train_pair(const ScannerDomain& domain_a, const ScannerDomain& domain_b,
                                 const PatchStream& stream_a, const PatchStream& stream_b,
                                 const GanTrainConfig& cfg,
                                 const std::function<void(const GanIterationLog&)>& on_log = {}) {
    cfg.validate();
    Rng rng(cfg.seed);
    GanTrainResult result;
    result.backbone_ab = std::make_shared<ColorNetBackbone>(cfg.generator_width,
                                                            rng.derive("g_ab").seed());
    result.backbone_ba = std::make_shared<ColorNetBackbone>(cfg.generator_width,
                                                            rng.derive("g_ba").seed());
    result.disc_a = std::make_shared<PatchDiscriminator>(cfg.discriminator_width,
                                                         rng.derive("d_a").seed());
    result.disc_b = std::make_shared<PatchDiscriminator>(cfg.discriminator_width,
                                                         rng.derive("d_b").seed());

    TrainableResidualGenerator gen_ab(result.backbone_ab);
    TrainableResidualGenerator gen_ba(result.backbone_ba);

    std::vector<nn::ParamRef> params_g, params_d, buffers;
    result.backbone_ab->collect(params_g, buffers);
    result.backbone_ba->collect(params_g, buffers);
    result.disc_a->collect(params_d, buffers);
    result.disc_b->collect(params_d, buffers);
    nn::Adam opt_g(cfg.beta1, cfg.beta2);
    nn::Adam opt_d(cfg.beta1, cfg.beta2);

    detail::ParamSnapshot last_good_g = detail::ParamSnapshot::take(params_g);
    detail::ParamSnapshot last_good_d = detail::ParamSnapshot::take(params_d);

    auto direction = [&](TrainableResidualGenerator& gen_fwd, TrainableResidualGenerator& gen_rev,
                         PatchDiscriminator& disc_target, const ImageF32& src_img,
                         const ImageF32& dst_img, GanIterationLog& log) {
        const nn::Tensor src = nn::tensor_from_image(src_img);
        const nn::Tensor dst = nn::tensor_from_image(dst_img);

        // Discriminator step on [real, fake] as one batch.
        result.backbone_ab->zero_grad();
        result.backbone_ba->zero_grad();
        const nn::Tensor fake = gen_fwd.forward_train(src);
        disc_target.zero_grad();
        const nn::Tensor d_out = disc_target.forward(nn::stack({dst, fake}), true);
        nn::Tensor d_grad = d_out;
        const double real_score = d_out.at(0, 0, 0, 0);
        const double fake_score = d_out.at(1, 0, 0, 0);
        log.loss_d += 0.5 * ((real_score - 1.0) * (real_score - 1.0) + fake_score * fake_score);
        d_grad.at(0, 0, 0, 0) = static_cast<float>(real_score - 1.0);
        d_grad.at(1, 0, 0, 0) = static_cast<float>(fake_score);
        disc_target.backward(d_grad);
        opt_d.step(params_d, cfg.learning_rate, nn::trainable_all());

        // Generator step: adversarial + cycle. Discriminator grads from this
        // pass are discarded at its next zero_grad.
        disc_target.zero_grad();
        const nn::Tensor g_out = disc_target.forward(fake, true);
        const double g_score = g_out.at(0, 0, 0, 0);
        log.loss_g += (g_score - 1.0) * (g_score - 1.0);
        nn::Tensor dg = g_out;
        dg.at(0, 0, 0, 0) = static_cast<float>(2.0 * (g_score - 1.0));
        nn::Tensor dfake_adv = disc_target.backward(dg);

        const nn::Tensor rec = gen_rev.forward_train(fake);
        nn::Tensor drec;
        const double cyc = detail::l1_loss_grad(rec, src, drec);
        log.cycle += cyc;
        log.loss_g += cfg.cycle_weight * cyc;
        for (auto& v : drec.v) v *= static_cast<float>(cfg.cycle_weight);
        const nn::Tensor dfake_cyc = gen_rev.backward(drec);

        nn::Tensor dfake = dfake_adv;
        for (std::size_t i = 0; i < dfake.v.size(); ++i) dfake.v[i] += dfake_cyc.v[i];
        gen_fwd.backward(dfake);
        opt_g.step(params_g, cfg.learning_rate, nn::trainable_all());
        log.mean_abs_residual += 0.5 * gen_fwd.mean_abs_residual();
    };

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        GanIterationLog log;
        log.iteration = iter;
        for (int b = 0; b < cfg.batch_size; ++b) {
            direction(gen_ab, gen_ba, *result.disc_b, stream_a(), stream_b(), log);
            direction(gen_ba, gen_ab, *result.disc_a, stream_b(), stream_a(), log);
        }
        const bool finite = std::isfinite(log.loss_g) && std::isfinite(log.loss_d) &&
                            std::isfinite(log.cycle);
        if (!finite) {
            last_good_g.restore(params_g);
            last_good_d.restore(params_d);
            result.aborted_nan = true;
            break;
        }
        last_good_g = detail::ParamSnapshot::take(params_g);
        last_good_d = detail::ParamSnapshot::take(params_d);
        result.iterations_run = iter;
        if (on_log && (iter % cfg.log_every == 0 || iter == cfg.iterations)) on_log(log);
        result.history.push_back(log);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint directory layout: <gan_dir>/<src>_<dst>/generator.weights plus a
// JSON sidecar with domains, config and iteration count.
// ---------------------------------------------------------------------------

inline void save_generator_checkpoint(const std::filesystem::path& gan_dir,
                                      const ScannerDomain& src, const ScannerDomain& dst,
                                      ColorNetBackbone& backbone, const GanTrainConfig& cfg,
                                      int iterations_run) {
    const auto dir = gan_dir / (src.name + "_" + dst.name);
    std::filesystem::create_directories(dir);
    backbone.save(dir / "generator.weights");
    nlohmann::json sidecar;
    sidecar["format_version"] = 1;
    sidecar["source"] = src.name;
    sidecar["target"] = dst.name;
    sidecar["source_annotated"] = src.annotated;
    sidecar["target_annotated"] = dst.annotated;
    sidecar["arch"] = backbone.arch();
    sidecar["iterations"] = iterations_run;
    sidecar["config"] = cfg.to_json();
    std::ofstream out(dir / "sidecar.json");
    if (!out) throw std::runtime_error("save_generator_checkpoint: cannot write sidecar");
    out << sidecar.dump(2) << "\n";
}

inline void save_pair_checkpoints(const std::filesystem::path& gan_dir,
                                  const ScannerDomain& a, const ScannerDomain& b,
                                  GanTrainResult& result, const GanTrainConfig& cfg) {
    save_generator_checkpoint(gan_dir, a, b, *result.backbone_ab, cfg, result.iterations_run);
    save_generator_checkpoint(gan_dir, b, a, *result.backbone_ba, cfg, result.iterations_run);
}

/// Loads every <src>_<dst> checkpoint directory under gan_dir.
inline DomainTransformSet load_transform_set(const std::filesystem::path& gan_dir) {
    DomainTransformSet tset;
    if (!std::filesystem::exists(gan_dir)) {
        throw std::runtime_error("load_transform_set: no such directory " + gan_dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(gan_dir)) {
        if (!entry.is_directory()) continue;
        const auto sidecar_path = entry.path() / "sidecar.json";
        if (!std::filesystem::exists(sidecar_path)) continue;
        std::ifstream in(sidecar_path);
        const nlohmann::json sidecar = nlohmann::json::parse(in);
        ScannerDomain src = ScannerDomain::from_name(sidecar.at("source").get<std::string>());
        ScannerDomain dst = ScannerDomain::from_name(sidecar.at("target").get<std::string>());
        src.annotated = sidecar.value("source_annotated", src.annotated);
        dst.annotated = sidecar.value("target_annotated", dst.annotated);
        auto backbone = make_gan_backbone(sidecar.at("arch").get<std::string>());
        backbone->load(entry.path() / "generator.weights");
        tset.add(ResidualGenerator(src, dst, backbone));
    }
    return tset;
}

}  // namespace mito::gan
