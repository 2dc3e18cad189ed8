// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "augal/rng.hpp"

namespace augal {

/// A single (C,H,W) image in normalized space.
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pix;  // row-major, channel-planar

    double& at(std::size_t c, std::size_t r, std::size_t col) {
        return pix[(c * height + r) * width + col];
    }
    double at(std::size_t c, std::size_t r, std::size_t col) const {
        return pix[(c * height + r) * width + col];
    }
};

/// Axis-aligned box; the top-left corner may lie outside the image, clipping
/// happens at application time.
struct CutoutBox {
    std::int64_t row0 = 0;
    std::int64_t col0 = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct ClippedBox {
    std::size_t r0, r1, c0, c1;  // half-open, within image bounds
    std::size_t area() const { return (r1 - r0) * (c1 - c0); }
};

ClippedBox clip_box(const CutoutBox& box, std::size_t img_h, std::size_t img_w);

/// Surviving-area fraction of the primary image: 1 - clippedArea/totalArea,
/// computed from integer areas.
double cutmix_lambda(const CutoutBox& box, std::size_t img_h, std::size_t img_w);

/// One cutmix application: paste `box` of a partner image, keep the rest.
struct CutmixEvent {
    CutoutBox box;
    std::size_t partner_index = 0;
    double lambda = 1.0;  // always equals cutmix_lambda(box, H, W)
};

// Pure appliers ------------------------------------------------------------

Image apply_cutout(const Image& image, const CutoutBox& box, double fill = 0.0);

/// Pixels inside the clipped box come from `partner`, the rest from `image`.
/// Returns the mixed image and lambda. Shapes must match.
std::pair<Image, double> apply_cutmix(const Image& image, const Image& partner,
                                      const CutoutBox& box);

/// Training-batch transform: zero-pad by `pad`, random crop back to the
/// original size, random horizontal flip. Never applied to scoring inputs.
Image pad_crop_flip(RngStream& stream, const Image& image, std::size_t pad = 4);

// Samplers ------------------------------------------------------------------

/// Square cutout box of side `size`, center uniform over the image grid,
/// clipped at the borders on application.
CutoutBox sample_cutout_box(RngStream& stream, std::size_t img_h, std::size_t img_w,
                            std::size_t size);

/// Box for a cutmix event: lambda' ~ Uniform(lambda_min, 1), box of area
/// (1-lambda')*H*W with sqrt-preserved aspect ratio, uniform center; redrawn
/// until the post-clip lambda is >= lambda_min (clipping only raises lambda,
/// so the first draw is always accepted).
CutoutBox sample_cutmix_box(RngStream& stream, std::size_t img_h, std::size_t img_w,
                            double lambda_min);

/// Full event: partner uniform from `partner_pool` (drawn first), then the
/// box; lambda is recomputed from the clipped box.
CutmixEvent sample_cutmix_event(RngStream& stream, std::size_t img_h,
                                std::size_t img_w,
                                std::span<const std::size_t> partner_pool,
                                double lambda_min);

// Replay audit ---------------------------------------------------------------

/// One augmentation event as emitted for the JSON-line audit dump.
struct AugmentEventRecord {
    const char* purpose;
    std::uint64_t cycle;
    std::uint64_t sample;
    CutoutBox box;
    std::optional<std::size_t> partner;
    std::optional<double> lambda;
};

using AugmentAudit = std::function<void(const AugmentEventRecord&)>;

}  // namespace augal
