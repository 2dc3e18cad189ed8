// SPDX-License-Identifier: Apache-2.0
#include "augal/losses.hpp"

#include <cmath>
#include <numeric>

#include "augal/errors.hpp"
#include "augal/rng.hpp"

namespace augal {

namespace {

Tensor batch_tensor(std::span<const Image> images) {
    const Image& first = images[0];
    std::vector<double> data;
    data.reserve(images.size() * first.pix.size());
    for (const Image& im : images) data.insert(data.end(), im.pix.begin(), im.pix.end());
    return Tensor::from_data(
        {images.size(), first.channels, first.height, first.width}, std::move(data));
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
    std::vector<double> y(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw UsageError("cross_entropy: invalid class id " +
                             std::to_string(labels[i]) + " for " +
                             std::to_string(classes) + " classes");
        y[i * classes + labels[i]] = 1.0;
    }
    return Tensor::from_data({labels.size(), classes}, std::move(y));
}

std::size_t pair_count(std::size_t k) { return k * (k - 1) / 2; }

}  // namespace

void LossConfig::validate() const {
    if (use_co && k_co < 2)
        throw ConfigError("LossConfig: K_co must be >= 2 when the cutout term is on");
    if (use_cm && k_cm < 2)
        throw ConfigError("LossConfig: K_cm must be >= 2 when the cutmix term is on");
    if (lambda_min < 0.0 || lambda_min >= 1.0)
        throw ConfigError("LossConfig: lambda_min must be in [0,1)");
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.shape()[0] != labels.size())
        throw UsageError("cross_entropy: logits " + shape_str(logits.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
    return cross_entropy_soft(logits, one_hot(labels, logits.shape()[1]));
}

Tensor cross_entropy_soft(const Tensor& logits, const Tensor& soft_labels) {
    if (logits.shape() != soft_labels.shape())
        throw UsageError("cross_entropy: logits " + shape_str(logits.shape()) +
                         " vs labels " + shape_str(soft_labels.shape()));
    const std::size_t rows = logits.shape()[0];
    const std::size_t cols = logits.shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = soft_labels.data()[r * cols + c];
            if (v < -1e-12)
                throw UsageError("cross_entropy: negative soft label entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw UsageError("cross_entropy: soft label row does not sum to 1");
    }
    return scale(sum(mul(soft_labels, log_softmax(logits))),
                 -1.0 / static_cast<double>(rows));
}

double pairwise_consistency(std::span<const std::vector<double>> probs) {
    const std::size_t k = probs.size();
    if (k < 2) throw ConfigError("pairwise_consistency: need K >= 2 vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            for (std::size_t c = 0; c < probs[i].size(); ++c) {
                const double d = probs[i][c] - probs[j][c];
                acc += d * d;
            }
    return acc / static_cast<double>(pair_count(k));
}

Tensor pairwise_consistency_term(std::span<const Tensor> prob_tensors) {
    const std::size_t k = prob_tensors.size();
    if (k < 2) throw ConfigError("pairwise_consistency: need K >= 2 tensors");
    const std::size_t rows = prob_tensors[0].shape()[0];
    Tensor acc;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            Tensor d = sub(prob_tensors[i], prob_tensors[j]);
            Tensor term = sum(mul(d, d));
            acc = acc.defined() ? add(acc, term) : term;
        }
    return scale(acc, 1.0 / static_cast<double>(rows * pair_count(k)));
}

namespace {

/// K stacked view batches -> (pairwise term + mean view CE term).
Tensor view_consistency(const Model& model, const std::vector<Tensor>& view_batches,
                        const std::vector<Tensor>& view_labels) {
    const std::size_t k = view_batches.size();
    std::vector<Tensor> probs;
    std::vector<Tensor> ces;
    probs.reserve(k);
    ces.reserve(k);
    for (std::size_t v = 0; v < k; ++v) {
        Tensor logits = model.forward(view_batches[v]);
        probs.push_back(softmax(logits));
        ces.push_back(cross_entropy_soft(logits, view_labels[v]));
    }
    Tensor ce_acc = ces[0];
    for (std::size_t v = 1; v < k; ++v) ce_acc = add(ce_acc, ces[v]);
    return add(pairwise_consistency_term(probs),
               scale(ce_acc, 1.0 / static_cast<double>(k)));
}

}  // namespace

Tensor cutout_consistency_loss(const Model& model, const TrainBatch& batch,
                               const LossConfig& config, const LossContext& ctx) {
    if (!config.use_co)
        throw UsageError("cutout_consistency_loss: config.use_co is off");
    config.validate();
    const std::size_t m = batch.size();
    const std::size_t side =
        config.cutout_size > 0
            ? config.cutout_size
            : std::min(batch.images[0].height, batch.images[0].width) / 2;

    // Per-sample streams; view k takes the k-th box of its sample's sequence.
    std::vector<std::vector<Image>> views(config.k_co);
    for (auto& v : views) v.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Image& img = batch.images[i];
        RngStream stream(ctx.seed, StreamPurpose::CutoutTrain, ctx.cycle,
                         epoch_sample_key(ctx.epoch, batch.dataset_indices[i]));
        for (std::size_t k = 0; k < config.k_co; ++k) {
            const CutoutBox box = sample_cutout_box(stream, img.height, img.width, side);
            if (ctx.audit)
                (*ctx.audit)({"cutout-train", ctx.cycle, batch.dataset_indices[i], box,
                              {}, {}});
            views[k].push_back(apply_cutout(img, box));
        }
    }
    const std::size_t classes = model.spec().classes;
    Tensor labels = one_hot(batch.labels, classes);
    std::vector<Tensor> view_batches, view_labels;
    for (std::size_t k = 0; k < config.k_co; ++k) {
        view_batches.push_back(batch_tensor(views[k]));
        view_labels.push_back(labels);
    }
    return view_consistency(model, view_batches, view_labels);
}

Tensor cutmix_consistency_loss(const Model& model, const TrainBatch& batch,
                               const LossConfig& config, const LossContext& ctx) {
    if (!config.use_cm)
        throw UsageError("cutmix_consistency_loss: config.use_cm is off");
    config.validate();
    const std::size_t m = batch.size();
    const std::size_t classes = model.spec().classes;

    // One permutation of the batch per view (standard in-batch cutmix).
    RngStream perm_stream(ctx.seed, StreamPurpose::CutmixTrainPerm, ctx.cycle,
                          epoch_sample_key(ctx.epoch, batch.batch_ordinal));
    std::vector<std::vector<std::size_t>> perms(config.k_cm);
    for (auto& perm : perms) {
        perm.resize(m);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = m; i > 1; --i)
            std::swap(perm[i - 1], perm[perm_stream.next_below(i)]);
    }

    std::vector<std::vector<Image>> views(config.k_cm);
    std::vector<std::vector<double>> soft(config.k_cm);
    for (std::size_t k = 0; k < config.k_cm; ++k) {
        views[k].reserve(m);
        soft[k].assign(m * classes, 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const Image& img = batch.images[i];
        RngStream stream(ctx.seed, StreamPurpose::CutmixTrain, ctx.cycle,
                         epoch_sample_key(ctx.epoch, batch.dataset_indices[i]));
        for (std::size_t k = 0; k < config.k_cm; ++k) {
            const std::size_t q = perms[k][i];
            const CutoutBox box =
                sample_cutmix_box(stream, img.height, img.width, config.lambda_min);
            auto [mixed, lambda] = apply_cutmix(img, batch.images[q], box);
            if (ctx.audit)
                (*ctx.audit)({"cutmix-train", ctx.cycle, batch.dataset_indices[i], box,
                              batch.dataset_indices[q], lambda});
            views[k].push_back(std::move(mixed));
            double* row = soft[k].data() + i * classes;
            if (config.cm_label_mode == CmLabelMode::Soft) {
                row[batch.labels[i]] += lambda;
                row[batch.labels[q]] += 1.0 - lambda;
            } else {
                row[batch.labels[i]] = 1.0;
            }
        }
    }
    std::vector<Tensor> view_batches, view_labels;
    for (std::size_t k = 0; k < config.k_cm; ++k) {
        view_batches.push_back(batch_tensor(views[k]));
        view_labels.push_back(
            Tensor::from_data({m, classes}, std::move(soft[k])));
    }
    return view_consistency(model, view_batches, view_labels);
}

TotalLoss total_loss(const Model& model, const TrainBatch& batch,
                     const LossConfig& config, const LossContext& ctx) {
    config.validate();
    if (batch.size() == 0) throw UsageError("total_loss: empty batch");
    TotalLoss out;
    Tensor ce = cross_entropy(model.forward(batch_tensor(batch.images)), batch.labels);
    out.breakdown.l_ce = ce.item();
    Tensor total = ce;
    if (config.use_co) {
        Tensor co = cutout_consistency_loss(model, batch, config, ctx);
        out.breakdown.l_co = co.item();
        total = add(total, co);
    }
    if (config.use_cm) {
        Tensor cm = cutmix_consistency_loss(model, batch, config, ctx);
        out.breakdown.l_cm = cm.item();
        total = add(total, cm);
    }
    out.breakdown.l_total = total.item();
    out.loss = total;
    return out;
}

}  // namespace augal
