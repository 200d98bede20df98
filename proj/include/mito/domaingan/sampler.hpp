#pragma once

#include <stdexcept>
#include <vector>

#include "mito/core/random.hpp"
#include "mito/core/types.hpp"
#include "mito/domaingan/generator.hpp"

namespace mito::gan {

/// Uniform draw over the available scanner domains; deterministic under a
/// seeded rng and independent across calls.
inline ScannerDomain sample_training_domain(Rng& rng,
                                            const std::vector<ScannerDomain>& available) {
    if (available.empty()) {
        throw std::invalid_argument("sample_training_domain: no domains available");
    }
    return available[rng.uniform_index(available.size())];
}

/// Pure appearance transform: picks a target domain uniformly and applies the
/// (source -> target) generator. Annotation geometry is untouched by design;
/// callers keep using the frame's coordinates.
inline ImageU8 domain_augment(const Frame& frame, const DomainTransformSet& tset, Rng& rng) {
    const ScannerDomain target = sample_training_domain(rng, tset.domains());
    return tset.get(frame.domain, target).apply(frame.pixels);
}

/// Patch-level variant used by the classifier pipeline (patches inherit the
/// frame's source domain).
inline ImageU8 domain_augment_patch(const ImageU8& patch, const ScannerDomain& source,
                                    const DomainTransformSet& tset, Rng& rng) {
    const ScannerDomain target = sample_training_domain(rng, tset.domains());
    return tset.get(source, target).apply(patch);
}

}  // namespace mito::gan
