#pragma once

#include "mito/core/image.hpp"

namespace mito::classifier {

/// Minimal scoring contract for one ensemble member: probability that the
/// given centroid patch (at the configured patch size) is a mitotic figure.
/// Implementations resize internally and must be deterministic and
/// re-entrant in inference mode.
class PatchScorer {
public:
    virtual ~PatchScorer() = default;
    virtual double prob(const ImageU8& patch) const = 0;
};

}  // namespace mito::classifier
