#pragma once

#include <stdexcept>

#include "mito/core/geometry.hpp"
#include "mito/core/image.hpp"

namespace mito::bootstrap {

/// Per-pixel probability segmenter behind a contract; predictions must be
/// deterministic in inference mode.
class SegmentationBackbone {
public:
    virtual ~SegmentationBackbone() = default;
    /// Returns a 1-channel soft mask in [0,1] with the patch's dimensions.
    virtual ImageF32 predict(const ImageU8& patch) const = 0;
};

/// Test-time augmentation over the 8 square symmetries: predict on each
/// transformed patch, align the prediction back with the inverse transform,
/// and average pixel-wise.
inline ImageF32 tta_segment(const SegmentationBackbone& backbone, const ImageU8& patch) {
    if (patch.width() != patch.height()) {
        throw std::invalid_argument("tta_segment: patch must be square");
    }
    ImageF32 sum(patch.width(), patch.height(), 1, 0.f);
    for (int k = 0; k < DihedralTransform::kCount; ++k) {
        const DihedralTransform t(k);
        const ImageF32 pred = backbone.predict(apply_dihedral(patch, t));
        if (pred.width() != patch.width() || pred.height() != patch.height() ||
            pred.channels() != 1) {
            throw std::runtime_error("tta_segment: backbone output shape mismatch");
        }
        const ImageF32 aligned = apply_dihedral(pred, t.inverse());
        for (std::size_t i = 0; i < sum.data().size(); ++i) {
            sum.data()[i] += aligned.data()[i];
        }
    }
    for (auto& v : sum.data()) v /= 8.f;
    return sum;
}

}  // namespace mito::bootstrap
