// SPDX-License-Identifier: Apache-2.0
#include "augal/augment.hpp"

#include <algorithm>
#include <cmath>

#include "augal/errors.hpp"

namespace augal {

ClippedBox clip_box(const CutoutBox& box, std::size_t img_h, std::size_t img_w) {
    const auto h = static_cast<std::int64_t>(img_h);
    const auto w = static_cast<std::int64_t>(img_w);
    const std::int64_t r0 = std::clamp<std::int64_t>(box.row0, 0, h);
    const std::int64_t r1 =
        std::clamp<std::int64_t>(box.row0 + static_cast<std::int64_t>(box.height), 0, h);
    const std::int64_t c0 = std::clamp<std::int64_t>(box.col0, 0, w);
    const std::int64_t c1 =
        std::clamp<std::int64_t>(box.col0 + static_cast<std::int64_t>(box.width), 0, w);
    return {static_cast<std::size_t>(r0), static_cast<std::size_t>(std::max(r0, r1)),
            static_cast<std::size_t>(c0), static_cast<std::size_t>(std::max(c0, c1))};
}

double cutmix_lambda(const CutoutBox& box, std::size_t img_h, std::size_t img_w) {
    const std::size_t total = img_h * img_w;
    const std::size_t cut = clip_box(box, img_h, img_w).area();
    return 1.0 - static_cast<double>(cut) / static_cast<double>(total);
}

Image apply_cutout(const Image& image, const CutoutBox& box, double fill) {
    Image out = image;
    const ClippedBox b = clip_box(box, image.height, image.width);
    for (std::size_t c = 0; c < image.channels; ++c)
        for (std::size_t r = b.r0; r < b.r1; ++r)
            for (std::size_t col = b.c0; col < b.c1; ++col) out.at(c, r, col) = fill;
    return out;
}

std::pair<Image, double> apply_cutmix(const Image& image, const Image& partner,
                                      const CutoutBox& box) {
    if (image.channels != partner.channels || image.height != partner.height ||
        image.width != partner.width)
        throw UsageError("apply_cutmix: image shapes differ");
    Image out = image;
    const ClippedBox b = clip_box(box, image.height, image.width);
    for (std::size_t c = 0; c < image.channels; ++c)
        for (std::size_t r = b.r0; r < b.r1; ++r)
            for (std::size_t col = b.c0; col < b.c1; ++col)
                out.at(c, r, col) = partner.at(c, r, col);
    return {std::move(out), cutmix_lambda(box, image.height, image.width)};
}

Image pad_crop_flip(RngStream& stream, const Image& image, std::size_t pad) {
    const std::size_t dr = stream.next_below(2 * pad + 1);
    const std::size_t dc = stream.next_below(2 * pad + 1);
    const bool flip = stream.next_below(2) == 1;
    Image out;
    out.channels = image.channels;
    out.height = image.height;
    out.width = image.width;
    out.pix.assign(image.pix.size(), 0.0);
    const auto h = static_cast<std::int64_t>(image.height);
    const auto w = static_cast<std::int64_t>(image.width);
    const auto p = static_cast<std::int64_t>(pad);
    for (std::size_t c = 0; c < image.channels; ++c)
        for (std::int64_t r = 0; r < h; ++r) {
            const std::int64_t sr = r + static_cast<std::int64_t>(dr) - p;
            if (sr < 0 || sr >= h) continue;
            for (std::int64_t col = 0; col < w; ++col) {
                const std::int64_t sc = col + static_cast<std::int64_t>(dc) - p;
                if (sc < 0 || sc >= w) continue;
                const std::int64_t dst_col = flip ? w - 1 - col : col;
                out.at(c, static_cast<std::size_t>(r), static_cast<std::size_t>(dst_col)) =
                    image.at(c, static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
            }
        }
    return out;
}

CutoutBox sample_cutout_box(RngStream& stream, std::size_t img_h, std::size_t img_w,
                            std::size_t size) {
    const std::size_t center_r = stream.next_below(img_h);
    const std::size_t center_c = stream.next_below(img_w);
    CutoutBox box;
    box.row0 = static_cast<std::int64_t>(center_r) - static_cast<std::int64_t>(size / 2);
    box.col0 = static_cast<std::int64_t>(center_c) - static_cast<std::int64_t>(size / 2);
    box.height = size;
    box.width = size;
    return box;
}

CutoutBox sample_cutmix_box(RngStream& stream, std::size_t img_h, std::size_t img_w,
                            double lambda_min) {
    if (lambda_min < 0.0 || lambda_min >= 1.0)
        throw ConfigError("sample_cutmix_box: lambda_min must be in [0,1)");
    for (;;) {
        const double lam = lambda_min + (1.0 - lambda_min) * stream.next_uniform();
        const double cut = std::sqrt(1.0 - lam);
        CutoutBox box;
        box.height = static_cast<std::size_t>(
            std::floor(cut * static_cast<double>(img_h)));
        box.width = static_cast<std::size_t>(
            std::floor(cut * static_cast<double>(img_w)));
        const std::size_t center_r = stream.next_below(img_h);
        const std::size_t center_c = stream.next_below(img_w);
        box.row0 =
            static_cast<std::int64_t>(center_r) - static_cast<std::int64_t>(box.height / 2);
        box.col0 =
            static_cast<std::int64_t>(center_c) - static_cast<std::int64_t>(box.width / 2);
        if (cutmix_lambda(box, img_h, img_w) >= lambda_min) return box;
    }
}

CutmixEvent sample_cutmix_event(RngStream& stream, std::size_t img_h,
                                std::size_t img_w,
                                std::span<const std::size_t> partner_pool,
                                double lambda_min) {
    if (partner_pool.empty())
        throw ConfigError("sample_cutmix_event: partner pool is empty");
    CutmixEvent ev;
    ev.partner_index = partner_pool[stream.next_below(partner_pool.size())];
    ev.box = sample_cutmix_box(stream, img_h, img_w, lambda_min);
    ev.lambda = cutmix_lambda(ev.box, img_h, img_w);
    return ev;
}

}  // namespace augal
