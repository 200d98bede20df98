#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mito/core/image.hpp"
#include "mito/core/types.hpp"

namespace mito::detector {

struct Proposal {
    BoundingBox box;
    double score = 0.0;                // in [0, 1]
    std::optional<ImageF32> mask;      // soft mask over the box extent
};

/// Candidate-proposal backbone contract (a Mask-RCNN-class model lives
/// behind this in production; the artifact ships a small convolutional
/// segmentation reference).
///
/// Contract:
///  - propose() returns proposals sorted by descending score, boxes within
///    raster bounds; it is deterministic and re-entrant (inference mode).
///  - Trainable parameters are partitioned into named, ordered blocks;
///    set_trainable() freezes everything outside the given blocks, and
///    frozen blocks keep their exact bit pattern across train_step calls.
class DetectorBackbone {
public:
    virtual ~DetectorBackbone() = default;

    virtual std::vector<Proposal> propose(const ImageU8& raster) const = 0;

    virtual std::vector<std::string> parameter_blocks() const = 0;
    virtual void set_trainable(const std::vector<std::string>& blocks) = 0;
    virtual std::vector<float> block_parameters(const std::string& block) const = 0;

    /// One optimizer update on a single patch; returns the loss.
    virtual double train_step(const ImageU8& patch, const std::vector<BoundingBox>& boxes,
                              double lr) = 0;

    virtual void save(const std::filesystem::path& weights_path) = 0;
    virtual void load(const std::filesystem::path& weights_path) = 0;
    virtual std::string id() const = 0;
};

/// The "last two convolutional blocks" policy realized via the ordered
/// block list.
inline std::vector<std::string> last_blocks(const std::vector<std::string>& blocks, int n) {
    if (n <= 0 || blocks.empty()) return {};
    const std::size_t count = std::min<std::size_t>(n, blocks.size());
    return {blocks.end() - count, blocks.end()};
}

}  // namespace mito::detector
