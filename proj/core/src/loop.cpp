// SPDX-License-Identifier: Apache-2.0
#include "augal/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "augal/errors.hpp"
#include "augal/rng.hpp"

namespace augal {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
}

/// Seeded Fisher-Yates over a copy of `items`.
std::vector<std::size_t> shuffled(std::vector<std::size_t> items, RngStream& stream) {
    for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[stream.next_below(i)]);
    return items;
}

}  // namespace

void PoolState::check_invariants(std::size_t budget) const {
    for (std::size_t i = 1; i < labeled.size(); ++i)
        if (labeled[i - 1] >= labeled[i])
            throw RunError("PoolState: labeled set not sorted/unique");
    for (std::size_t i = 1; i < unlabeled.size(); ++i)
        if (unlabeled[i - 1] >= unlabeled[i])
            throw RunError("PoolState: unlabeled set not sorted/unique");
    std::vector<std::size_t> inter;
    std::set_intersection(labeled.begin(), labeled.end(), unlabeled.begin(),
                          unlabeled.end(), std::back_inserter(inter));
    if (!inter.empty())
        throw RunError("PoolState: labeled and unlabeled sets overlap");
    const std::size_t expect = budget * (cycle + 1);
    if (labeled.size() != std::min(expect, pool_size()))
        throw RunError("PoolState: |L| = " + std::to_string(labeled.size()) +
                       ", expected " + std::to_string(expect) + " at cycle " +
                       std::to_string(cycle));
}

void ScenarioConfig::validate(std::size_t dataset_n) const {
    const std::size_t n = effective_pool_size(dataset_n);
    if (n == 0 || n > dataset_n)
        throw ConfigError("ScenarioConfig: pool size " + std::to_string(n) +
                          " exceeds dataset size " + std::to_string(dataset_n));
    if (budget == 0) throw ConfigError("ScenarioConfig: budget must be positive");
    if (budget * (cycles + 1) > n)
        throw ConfigError("ScenarioConfig: b*(T+1) = " +
                          std::to_string(budget * (cycles + 1)) +
                          " exceeds pool size N = " + std::to_string(n));
    if (epochs < 1) throw ConfigError("ScenarioConfig: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("ScenarioConfig: batch size must be positive");
    loss.validate();
    schedule.validate();
    model.validate();
}

ScoringConfig ScenarioConfig::scoring_config() const {
    ScoringConfig sc;
    sc.k_co = loss.k_co;
    sc.k_cm = loss.k_cm;
    sc.lambda_min = loss.lambda_min;
    sc.cutout_size = loss.cutout_size;
    sc.cm_partner_from_labeled = cm_partner_from_labeled;
    return sc;
}

ScenarioInit init_scenario(const ScenarioConfig& config, const Dataset& train,
                           std::uint64_t seed) {
    config.validate(train.n);
    const std::size_t n = config.effective_pool_size(train.n);

    // Pool subset: seeded uniform draw from the training split.
    std::vector<std::size_t> pool_indices(train.n);
    std::iota(pool_indices.begin(), pool_indices.end(), 0);
    if (n < train.n) {
        RngStream subset(seed, StreamPurpose::PoolSubset, 0, 0);
        pool_indices = shuffled(std::move(pool_indices), subset);
        pool_indices.resize(n);
        std::sort(pool_indices.begin(), pool_indices.end());
    }

    // L_{b,0}: b uniform samples without replacement from the pool.
    RngStream init_stream(seed, StreamPurpose::InitLabeled, 0, 0);
    std::vector<std::size_t> order = shuffled(pool_indices, init_stream);

    ScenarioInit out;
    out.pool.cycle = 0;
    out.pool.labeled.assign(order.begin(), order.begin() + config.budget);
    out.pool.unlabeled.assign(order.begin() + config.budget, order.end());
    std::sort(out.pool.labeled.begin(), out.pool.labeled.end());
    std::sort(out.pool.unlabeled.begin(), out.pool.unlabeled.end());
    out.pool.check_invariants(config.budget);

    ModelSpec spec = config.model;
    spec.in_channels = train.channels;
    spec.height = train.height;
    spec.width = train.width;
    spec.classes = train.class_count;
    spec.init_seed = mix_seeds(config.model.init_seed, seed);
    out.model = build(spec);
    out.theta0 = out.model.snapshot();
    return out;
}

std::vector<LossBreakdown> train_cycle(Model& model,
                                       const std::vector<std::uint8_t>& theta0,
                                       const PoolState& pool,
                                       const ScenarioConfig& config,
                                       const Dataset& train, std::uint32_t cycle,
                                       std::uint64_t seed, const RunHooks* hooks) {
    if (pool.labeled.empty())
        throw UsageError("train_cycle: labeled set is empty");
    model.restore(theta0);
    SgdOptimizer opt(config.optimizer.learning_rate, config.optimizer.momentum,
                     config.optimizer.weight_decay);
    opt.attach(model.parameters());

    const AugmentAudit* audit =
        hooks && hooks->augment_audit ? &hooks->augment_audit : nullptr;
    std::vector<LossBreakdown> epoch_losses;
    epoch_losses.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        schedule_apply(config.schedule, opt, epoch);
        RngStream shuffle_stream(seed, StreamPurpose::EpochShuffle, cycle, epoch);
        const std::vector<std::size_t> order = shuffled(pool.labeled, shuffle_stream);

        LossBreakdown mean{};
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size, ++batches) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            TrainBatch batch;
            batch.batch_ordinal = batches;
            batch.dataset_indices.assign(order.begin() + start, order.begin() + end);
            batch.images.reserve(end - start);
            batch.labels.reserve(end - start);
            for (std::size_t idx : batch.dataset_indices) {
                RngStream t_stream(seed, StreamPurpose::PadCropFlip, cycle,
                                   epoch_sample_key(epoch, idx));
                batch.images.push_back(pad_crop_flip(t_stream, train.image(idx)));
                batch.labels.push_back(train.labels[idx]);
            }
            LossContext ctx{seed, cycle, epoch, audit};
            TotalLoss loss = total_loss(model, batch, config.loss, ctx);
            if (!std::isfinite(loss.breakdown.l_total))
                throw RunError("train_cycle: non-finite loss at cycle " +
                               std::to_string(cycle) + ", epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(batches));
            backward(loss.loss);
            opt.step();
            mean.l_ce += loss.breakdown.l_ce;
            mean.l_co += loss.breakdown.l_co;
            mean.l_cm += loss.breakdown.l_cm;
            mean.l_total += loss.breakdown.l_total;
        }
        mean.l_ce /= static_cast<double>(batches);
        mean.l_co /= static_cast<double>(batches);
        mean.l_cm /= static_cast<double>(batches);
        mean.l_total /= static_cast<double>(batches);
        epoch_losses.push_back(mean);
    }
    return epoch_losses;
}

std::optional<std::vector<std::size_t>> advance(PoolState& pool, const Model& model,
                                                const ScenarioConfig& config,
                                                const Dataset& train,
                                                std::uint64_t seed,
                                                const RunHooks* hooks) {
    if (pool.unlabeled.empty()) return std::nullopt;
    const AugmentAudit* audit =
        hooks && hooks->augment_audit ? &hooks->augment_audit : nullptr;
    const std::vector<ScoreRecord> records =
        score_pool(model, train, pool.unlabeled, pool.labeled, config.strategy,
                   config.scoring_config(), seed, pool.cycle, config.scoring_threads,
                   audit);
    if (hooks && hooks->score_sink)
        for (const auto& r : records) hooks->score_sink(pool.cycle, r);

    std::vector<std::size_t> selected = select_top_b(records, config.budget);

    std::vector<std::size_t> remaining;
    remaining.reserve(pool.unlabeled.size() - selected.size());
    std::set_difference(pool.unlabeled.begin(), pool.unlabeled.end(),
                        selected.begin(), selected.end(),
                        std::back_inserter(remaining));
    std::vector<std::size_t> labeled;
    labeled.reserve(pool.labeled.size() + selected.size());
    std::set_union(pool.labeled.begin(), pool.labeled.end(), selected.begin(),
                   selected.end(), std::back_inserter(labeled));
    pool.labeled = std::move(labeled);
    pool.unlabeled = std::move(remaining);
    pool.cycle += 1;
    pool.check_invariants(config.budget);
    return selected;
}

double evaluate(const Model& model, const Dataset& test, std::size_t batch_size) {
    if (test.n == 0) throw UsageError("evaluate: empty test set");
    NoGradGuard no_grad;
    std::size_t correct = 0;
    const std::size_t img = test.image_size();
    for (std::size_t start = 0; start < test.n; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, test.n);
        std::vector<double> data(test.images.begin() + start * img,
                                 test.images.begin() + end * img);
        Tensor batch = Tensor::from_data(
            {end - start, test.channels, test.height, test.width}, std::move(data));
        Tensor logits = model.forward(batch);
        const std::size_t classes = logits.shape()[1];
        for (std::size_t i = 0; i < end - start; ++i) {
            const double* row = logits.data().data() + i * classes;
            std::size_t arg = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (row[c] > row[arg]) arg = c;
            if (static_cast<int>(arg) == test.labels[start + i]) ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test.n);
}

std::vector<CycleReport> run_scenario(const ScenarioConfig& config,
                                      const Dataset& train, const Dataset& test,
                                      std::uint64_t seed, const RunHooks* hooks) {
    ScenarioInit init = init_scenario(config, train, seed);
    std::vector<CycleReport> reports;
    reports.reserve(config.cycles + 1);

    auto emit = [&](CycleReport&& report) {
        if (hooks && hooks->cycle_sink) hooks->cycle_sink(report);
        reports.push_back(std::move(report));
    };

    {
        auto start = std::chrono::steady_clock::now();
        CycleReport report;
        report.cycle = 0;
        report.selected = init.pool.labeled;
        report.epoch_losses = train_cycle(init.model, init.theta0, init.pool, config,
                                          train, 0, seed, hooks);
        report.test_accuracy = evaluate(init.model, test);
        report.wall_time_s = seconds_since(start);
        emit(std::move(report));
    }

    for (std::uint32_t t = 1; t <= config.cycles; ++t) {
        auto start = std::chrono::steady_clock::now();
        auto selected = advance(init.pool, init.model, config, train, seed, hooks);
        if (!selected) break;  // pool exhausted: scenario complete
        CycleReport report;
        report.cycle = t;
        report.selected = std::move(*selected);
        report.epoch_losses = train_cycle(init.model, init.theta0, init.pool, config,
                                          train, t, seed, hooks);
        report.test_accuracy = evaluate(init.model, test);
        report.wall_time_s = seconds_since(start);
        emit(std::move(report));
    }
    return reports;
}

}  // namespace augal
