// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "augal/augment.hpp"
#include "augal/datasets.hpp"
#include "augal/model.hpp"

namespace augal {

enum class Strategy { Random, Entropy, Margin, KCutout, CutmixEntropy };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

/// Higher = more uncertain, for every strategy.
struct ScoreRecord {
    std::size_t index = 0;
    Strategy strategy = Strategy::Random;
    double score = 0.0;
};

struct ScoringConfig {
    std::size_t k_co = 2;
    std::size_t k_cm = 2;
    double lambda_min = 0.5;
    std::size_t cutout_size = 0;  // 0 -> min(H,W)/2
    bool cm_partner_from_labeled = false;
};

/// Metadata threaded to the augmentation audit sink from inside a scorer.
struct AuditCtx {
    const AugmentAudit* sink = nullptr;
    std::uint64_t cycle = 0;
    std::uint64_t sample = 0;
};

/// Mean pairwise squared-L2 distance between the softmax outputs of k_co
/// cutout views. K_co must be >= 2 (no pairs otherwise).
double k_cutout_score(const Model& model, const Image& image, std::size_t k_co,
                      RngStream& stream, std::size_t cutout_size,
                      const AuditCtx& audit = {});

/// Mean Shannon entropy (natural log) of the softmax outputs of k_cm cutmix
/// views, partners drawn uniformly from `partner_pool`.
double cutmix_entropy_score(const Model& model, const Image& image, std::size_t k_cm,
                            const Dataset& data,
                            std::span<const std::size_t> partner_pool,
                            double lambda_min, RngStream& stream,
                            const AuditCtx& audit = {});

/// Shannon entropy of softmax(logits), natural log.
double entropy_score(const Model& model, const Image& image);

/// -(p_top1 - p_top2): higher = more uncertain.
double margin_score(const Model& model, const Image& image);

/// Uniform(0,1), deterministic per (seed, cycle, index).
double random_score(std::uint64_t seed, std::uint64_t cycle, std::size_t index);

/// Indices of the b highest scores, ties broken by lower dataset index;
/// the whole pool if b >= pool size. Result sorted ascending.
std::vector<std::size_t> select_top_b(std::span<const ScoreRecord> records,
                                      std::size_t b);

/// Scores every index in `unlabeled` with the configured strategy. Pure per
/// sample, so evaluation fans out over `threads` workers without changing any
/// value; an attached audit sink forces single-threaded order.
std::vector<ScoreRecord> score_pool(const Model& model, const Dataset& data,
                                    std::span<const std::size_t> unlabeled,
                                    std::span<const std::size_t> labeled,
                                    Strategy strategy, const ScoringConfig& config,
                                    std::uint64_t seed, std::uint64_t cycle,
                                    unsigned threads = 0,
                                    const AugmentAudit* audit = nullptr);

}  // namespace augal
