// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "augal/datasets.hpp"
#include "augal/losses.hpp"
#include "augal/model.hpp"
#include "augal/optimizer.hpp"
#include "augal/uncertainty.hpp"

namespace augal {

/// Partition of the pool indices into labeled and unlabeled sets at cycle t.
struct PoolState {
    std::uint32_t cycle = 0;
    std::vector<std::size_t> labeled;    // sorted dataset indices
    std::vector<std::size_t> unlabeled;  // sorted dataset indices

    std::size_t pool_size() const { return labeled.size() + unlabeled.size(); }
    void check_invariants(std::size_t budget) const;
};

struct CycleReport {
    std::uint32_t cycle = 0;
    std::vector<std::size_t> selected;        // the b indices new this cycle
    std::vector<LossBreakdown> epoch_losses;  // per-epoch batch means
    double test_accuracy = 0.0;               // percent
    double wall_time_s = 0.0;
};

struct OptimizerConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

struct BlobParams {
    std::size_t n_per_class = 50;
    std::size_t test_per_class = 25;
    std::size_t classes = 4;
    std::size_t side = 8;
    double separation = 3.0;
    std::uint64_t seed = 7;
};

struct ScenarioConfig {
    std::string dataset_id = "blobs";  // fashion_mnist | cifar10 | cifar100 | blobs
    std::string dataset_path;
    BlobParams blobs;
    std::size_t pool_size = 0;  // N; 0 means the full training split
    std::size_t budget = 0;     // b
    std::size_t cycles = 0;     // T
    Strategy strategy = Strategy::Random;
    LossConfig loss;
    std::size_t epochs = 1;
    OptimizerConfig optimizer;
    LrSchedule schedule;
    std::size_t batch_size = 128;
    ModelSpec model;
    bool cm_partner_from_labeled = false;  // partner pool during scoring
    unsigned scoring_threads = 0;          // 0 = hardware concurrency

    void validate(std::size_t dataset_n) const;
    std::size_t effective_pool_size(std::size_t dataset_n) const {
        return pool_size == 0 ? dataset_n : pool_size;
    }
    ScoringConfig scoring_config() const;
};

/// Per-sample score sink for the score-dump interface.
using ScoreSink =
    std::function<void(std::uint32_t cycle, const ScoreRecord& record)>;

struct RunHooks {
    ScoreSink score_sink;
    AugmentAudit augment_audit;
    /// Called after each cycle completes (streaming CSV reporting).
    std::function<void(const CycleReport&)> cycle_sink;
};

struct ScenarioInit {
    PoolState pool;
    Model model;
    std::vector<std::uint8_t> theta0;
};

/// Fixed initial labeled set (b uniform pool samples) and the weight snapshot
/// every cycle retrains from. The pool itself is a seeded uniform subset of
/// the training split when pool_size < N.
ScenarioInit init_scenario(const ScenarioConfig& config, const Dataset& train,
                           std::uint64_t seed);

/// Restore theta0, then `epochs` epochs of SGD over the labeled set with the
/// pad/crop/flip transform and the configured loss composition. Returns the
/// per-epoch mean loss breakdown.
std::vector<LossBreakdown> train_cycle(Model& model,
                                       const std::vector<std::uint8_t>& theta0,
                                       const PoolState& pool,
                                       const ScenarioConfig& config,
                                       const Dataset& train, std::uint32_t cycle,
                                       std::uint64_t seed,
                                       const RunHooks* hooks = nullptr);

/// Score the unlabeled pool with the configured strategy, move the top-b into
/// the labeled set, advance the cycle counter. Returns the selected indices,
/// or nullopt when the pool is exhausted (scenario complete).
std::optional<std::vector<std::size_t>> advance(PoolState& pool, const Model& model,
                                                const ScenarioConfig& config,
                                                const Dataset& train,
                                                std::uint64_t seed,
                                                const RunHooks* hooks = nullptr);

/// Top-1 accuracy percent on untransformed test images, deterministic order.
double evaluate(const Model& model, const Dataset& test, std::size_t batch_size = 256);

/// The full budgeted protocol: cycle-0 training on L_{b,0}, then T rounds of
/// (score, select, retrain from theta0, evaluate). Returns T+1 reports.
std::vector<CycleReport> run_scenario(const ScenarioConfig& config,
                                      const Dataset& train, const Dataset& test,
                                      std::uint64_t seed,
                                      const RunHooks* hooks = nullptr);

}  // namespace augal
