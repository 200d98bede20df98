#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mito/core/image.hpp"
#include "mito/core/types.hpp"

namespace mito::gan {

/// Normalized pixel space used by all generators: [0,255] -> [-1,1].
inline ImageF32 normalize_image(const ImageU8& img) {
    ImageF32 out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        out.data()[i] = img.data()[i] / 127.5f - 1.f;
    }
    return out;
}

inline ImageU8 denormalize_image(const ImageF32& img) {
    ImageU8 out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        float v = (img.data()[i] + 1.f) * 127.5f;
        if (v < 0.f) v = 0.f;
        if (v > 255.f) v = 255.f;
        out.data()[i] = static_cast<std::uint8_t>(v + 0.5f);
    }
    return out;
}

/// Pluggable image-to-image network handle. Produces the raw (pre-tanh)
/// residual for an input in normalized pixel space; inference must be
/// deterministic and re-entrant.
class ImageToImageBackbone {
public:
    virtual ~ImageToImageBackbone() = default;
    virtual ImageF32 forward(const ImageF32& input) const = 0;
    virtual std::string arch() const = 0;
};

/// Raised when an image's domain metadata disagrees with the generator's
/// source domain. Warning-level: callers may catch, log and continue.
class DomainMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Directed domain-transfer generator. The input always has a direct skip
/// connection to the output: output = clamp(input + tanh(backbone(input))),
/// so the network only contributes a bounded color residual and a zeroed
/// backbone gives back the input bit-exactly.
class ResidualGenerator {
public:
    ResidualGenerator(ScannerDomain source, ScannerDomain target,
                      std::shared_ptr<const ImageToImageBackbone> backbone)
        : source_(std::move(source)), target_(std::move(target)),
          backbone_(std::move(backbone)) {
        if (source_ == target_) {
            throw std::invalid_argument("ResidualGenerator: source must differ from target");
        }
        if (!backbone_) {
            throw std::invalid_argument("ResidualGenerator: backbone required");
        }
    }

    /// The exact no-op transform for (d, d) lookups.
    static ResidualGenerator identity(ScannerDomain domain) {
        ResidualGenerator g;
        g.source_ = domain;
        g.target_ = std::move(domain);
        return g;
    }

    const ScannerDomain& source() const { return source_; }
    const ScannerDomain& target() const { return target_; }
    bool is_identity() const { return backbone_ == nullptr; }
    const ImageToImageBackbone* backbone() const { return backbone_.get(); }

    ImageF32 apply_normalized(const ImageF32& input) const {
        if (is_identity()) return input;
        const ImageF32 raw = backbone_->forward(input);
        if (!raw.same_shape(input)) {
            throw std::runtime_error("ResidualGenerator: backbone changed image shape");
        }
        ImageF32 out = input;
        for (std::size_t i = 0; i < out.data().size(); ++i) {
            float v = input.data()[i] + std::tanh(raw.data()[i]);
            if (v < -1.f) v = -1.f;
            if (v > 1.f) v = 1.f;
            out.data()[i] = v;
        }
        return out;
    }

    ImageU8 apply(const ImageU8& input) const {
        if (is_identity()) return input;
        return denormalize_image(apply_normalized(normalize_image(input)));
    }

    /// Domain-checked application for frames carrying metadata.
    ImageU8 apply(const Frame& frame) const {
        if (frame.domain != source_) {
            throw DomainMismatchError("ResidualGenerator: frame domain " + frame.domain.name +
                                      " does not match generator source " + source_.name);
        }
        return apply(frame.pixels);
    }

private:
    ResidualGenerator() = default;

    ScannerDomain source_;
    ScannerDomain target_;
    std::shared_ptr<const ImageToImageBackbone> backbone_;
};

/// Registry of directed generators. For n registered domains, all n*(n-1)
/// ordered pairs must resolve; (d, d) resolves to the exact identity.
class DomainTransformSet {
public:
    void add(ResidualGenerator generator) {
        if (generator.is_identity()) {
            throw std::invalid_argument("DomainTransformSet: identities are implicit");
        }
        register_domain(generator.source());
        register_domain(generator.target());
        const Key key{generator.source().name, generator.target().name};
        generators_.erase(key);
        generators_.emplace(key, std::move(generator));
    }

    const std::vector<ScannerDomain>& domains() const { return domains_; }

    bool has(const ScannerDomain& src, const ScannerDomain& dst) const {
        return src == dst || generators_.count({src.name, dst.name}) > 0;
    }

    const ResidualGenerator& get(const ScannerDomain& src, const ScannerDomain& dst) const {
        if (src == dst) {
            auto it = identities_.find(src.name);
            if (it == identities_.end()) {
                it = identities_.emplace(src.name, ResidualGenerator::identity(src)).first;
            }
            return it->second;
        }
        const auto it = generators_.find({src.name, dst.name});
        if (it == generators_.end()) {
            throw std::runtime_error("DomainTransformSet: no generator for pair (" + src.name +
                                     " -> " + dst.name + ")");
        }
        return it->second;
    }

    /// True when every ordered pair of registered domains resolves.
    bool complete() const {
        for (const auto& a : domains_) {
            for (const auto& b : domains_) {
                if (!has(a, b)) return false;
            }
        }
        return true;
    }

    std::size_t directed_count() const { return generators_.size(); }
    bool empty() const { return domains_.empty(); }

private:
    using Key = std::pair<std::string, std::string>;

    void register_domain(const ScannerDomain& d) {
        for (const auto& existing : domains_) {
            if (existing == d) return;
        }
        domains_.push_back(d);
    }

    std::vector<ScannerDomain> domains_;
    std::map<Key, ResidualGenerator> generators_;
    mutable std::map<std::string, ResidualGenerator> identities_;
};

}  // namespace mito::gan
