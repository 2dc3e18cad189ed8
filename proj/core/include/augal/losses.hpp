// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "augal/augment.hpp"
#include "augal/model.hpp"

namespace augal {

enum class CmLabelMode { Soft, Hard };

struct LossConfig {
    bool use_co = false;
    bool use_cm = false;
    std::size_t k_co = 2;
    std::size_t k_cm = 2;
    double lambda_min = 0.5;
    CmLabelMode cm_label_mode = CmLabelMode::Soft;
    std::size_t cutout_size = 0;  // 0 -> min(H,W)/2

    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
    double l_ce = 0.0;
    double l_co = 0.0;
    double l_cm = 0.0;
    double l_total = 0.0;
};

/// One training mini-batch: the pad/crop/flip-transformed images together
/// with their dataset indices (stream keying, cutmix partners) and labels.
struct TrainBatch {
    std::vector<std::size_t> dataset_indices;
    std::vector<Image> images;
    std::vector<int> labels;
    std::size_t batch_ordinal = 0;  // index of the batch within its epoch

    std::size_t size() const { return images.size(); }
};

struct LossContext {
    std::uint64_t seed = 0;
    std::uint64_t cycle = 0;
    std::uint64_t epoch = 0;
    const AugmentAudit* audit = nullptr;
};

/// Mean over the batch of -sum_c y[c] * ln softmax(logits)[c]. Hard labels
/// are class ids; soft labels a (M,C) simplex matrix.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);
Tensor cross_entropy_soft(const Tensor& logits, const Tensor& soft_labels);

/// (1/C(K,2)) sum_{i<j} ||p_i - p_j||^2 over K probability vectors.
double pairwise_consistency(std::span<const std::vector<double>> probs);

/// Same quantity as a tape expression, summed over the batch rows of each
/// (M,C) probability tensor and divided by M*C(K,2).
Tensor pairwise_consistency_term(std::span<const Tensor> prob_tensors);

/// Cutout consistency loss: per sample, K_co cutout views; mean pairwise
/// consistency plus the mean cross-entropy of each view against the label.
Tensor cutout_consistency_loss(const Model& model, const TrainBatch& batch,
                               const LossConfig& config, const LossContext& ctx);

/// Cutmix counterpart; partners are a same-mini-batch permutation per view.
/// The CE term follows cm_label_mode: Soft mixes labels by lambda, Hard keeps
/// the primary label.
Tensor cutmix_consistency_loss(const Model& model, const TrainBatch& batch,
                               const LossConfig& config, const LossContext& ctx);

struct TotalLoss {
    LossBreakdown breakdown;
    Tensor loss;  // scalar on the tape; backward() yields the summed gradient
};

/// l_total = l_ce + enabled consistency terms, evaluated on one tape.
TotalLoss total_loss(const Model& model, const TrainBatch& batch,
                     const LossConfig& config, const LossContext& ctx);

}  // namespace augal
