// SPDX-License-Identifier: Apache-2.0
#include "augal/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "augal/errors.hpp"

namespace augal {

namespace {

std::size_t default_cutout_size(std::size_t size, const Image& image) {
    return size > 0 ? size : std::min(image.height, image.width) / 2;
}

Tensor views_tensor(std::span<const Image> views) {
    const Image& first = views[0];
    std::vector<double> data;
    data.reserve(views.size() * first.pix.size());
    for (const Image& v : views) data.insert(data.end(), v.pix.begin(), v.pix.end());
    return Tensor::from_data(
        {views.size(), first.channels, first.height, first.width}, std::move(data));
}

/// Softmax rows of a frozen forward pass over stacked views.
std::vector<std::vector<double>> view_probs(const Model& model,
                                            std::span<const Image> views) {
    NoGradGuard no_grad;
    Tensor probs = softmax(model.forward(views_tensor(views)));
    const std::size_t classes = probs.shape()[1];
    std::vector<std::vector<double>> rows(views.size());
    for (std::size_t i = 0; i < views.size(); ++i)
        rows[i].assign(probs.data().begin() + i * classes,
                       probs.data().begin() + (i + 1) * classes);
    return rows;
}

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace

Strategy strategy_from_string(const std::string& name) {
    if (name == "random") return Strategy::Random;
    if (name == "entropy") return Strategy::Entropy;
    if (name == "margin") return Strategy::Margin;
    if (name == "k_cutout" || name == "cutout") return Strategy::KCutout;
    if (name == "cutmix_entropy" || name == "cutmix") return Strategy::CutmixEntropy;
    throw ConfigError("unknown strategy '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
        case Strategy::Margin: return "margin";
        case Strategy::KCutout: return "k_cutout";
        case Strategy::CutmixEntropy: return "cutmix_entropy";
    }
    return "?";
}

double k_cutout_score(const Model& model, const Image& image, std::size_t k_co,
                      RngStream& stream, std::size_t cutout_size,
                      const AuditCtx& audit) {
    if (k_co < 2)
        throw ConfigError("k_cutout_score: K_co must be >= 2, got " +
                          std::to_string(k_co));
    const std::size_t size = default_cutout_size(cutout_size, image);
    std::vector<Image> views;
    views.reserve(k_co);
    for (std::size_t k = 0; k < k_co; ++k) {
        const CutoutBox box = sample_cutout_box(stream, image.height, image.width, size);
        if (audit.sink)
            (*audit.sink)({"cutout-score", audit.cycle, audit.sample, box, {}, {}});
        views.push_back(apply_cutout(image, box));
    }
    const auto probs = view_probs(model, views);
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k_co; ++i)
        for (std::size_t j = i + 1; j < k_co; ++j, ++pairs)
            for (std::size_t c = 0; c < probs[i].size(); ++c) {
                const double d = probs[i][c] - probs[j][c];
                acc += d * d;
            }
    return acc / static_cast<double>(pairs);
}

double cutmix_entropy_score(const Model& model, const Image& image, std::size_t k_cm,
                            const Dataset& data,
                            std::span<const std::size_t> partner_pool,
                            double lambda_min, RngStream& stream,
                            const AuditCtx& audit) {
    if (k_cm < 1)
        throw ConfigError("cutmix_entropy_score: K_cm must be >= 1");
    if (partner_pool.empty())
        throw ConfigError("cutmix_entropy_score: partner pool is empty");
    std::vector<Image> views;
    views.reserve(k_cm);
    for (std::size_t k = 0; k < k_cm; ++k) {
        const CutmixEvent ev =
            sample_cutmix_event(stream, image.height, image.width, partner_pool,
                                lambda_min);
        if (audit.sink)
            (*audit.sink)({"cutmix-score", audit.cycle, audit.sample, ev.box,
                           ev.partner_index, ev.lambda});
        views.push_back(apply_cutmix(image, data.image(ev.partner_index), ev.box).first);
    }
    const auto probs = view_probs(model, views);
    double acc = 0.0;
    for (const auto& p : probs) acc += shannon_entropy(p);
    return acc / static_cast<double>(k_cm);
}

double entropy_score(const Model& model, const Image& image) {
    const auto probs = view_probs(model, std::span<const Image>(&image, 1));
    return shannon_entropy(probs[0]);
}

double margin_score(const Model& model, const Image& image) {
    const auto probs = view_probs(model, std::span<const Image>(&image, 1));
    double top1 = -1.0, top2 = -1.0;
    for (double v : probs[0]) {
        if (v > top1) {
            top2 = top1;
            top1 = v;
        } else if (v > top2) {
            top2 = v;
        }
    }
    return -(top1 - top2);
}

double random_score(std::uint64_t seed, std::uint64_t cycle, std::size_t index) {
    RngStream stream(seed, StreamPurpose::RandomScore, cycle, index);
    return stream.next_uniform();
}

std::vector<std::size_t> select_top_b(std::span<const ScoreRecord> records,
                                      std::size_t b) {
    std::vector<const ScoreRecord*> order;
    order.reserve(records.size());
    for (const auto& r : records) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const ScoreRecord* a, const ScoreRecord* b2) {
        if (a->score != b2->score) return a->score > b2->score;
        return a->index < b2->index;
    });
    const std::size_t take = std::min(b, order.size());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(order[i]->index);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ScoreRecord> score_pool(const Model& model, const Dataset& data,
                                    std::span<const std::size_t> unlabeled,
                                    std::span<const std::size_t> labeled,
                                    Strategy strategy, const ScoringConfig& config,
                                    std::uint64_t seed, std::uint64_t cycle,
                                    unsigned threads, const AugmentAudit* audit) {
    const std::span<const std::size_t> partner_pool =
        config.cm_partner_from_labeled ? labeled : unlabeled;
    std::vector<ScoreRecord> records(unlabeled.size());

    auto score_one = [&](std::size_t pos) {
        const std::size_t idx = unlabeled[pos];
        const AuditCtx actx{audit, cycle, idx};
        double s = 0.0;
        switch (strategy) {
            case Strategy::Random:
                s = random_score(seed, cycle, idx);
                break;
            case Strategy::Entropy:
                s = entropy_score(model, data.image(idx));
                break;
            case Strategy::Margin:
                s = margin_score(model, data.image(idx));
                break;
            case Strategy::KCutout: {
                RngStream stream(seed, StreamPurpose::CutoutScore, cycle, idx);
                s = k_cutout_score(model, data.image(idx), config.k_co, stream,
                                   config.cutout_size, actx);
                break;
            }
            case Strategy::CutmixEntropy: {
                RngStream stream(seed, StreamPurpose::CutmixScore, cycle, idx);
                s = cutmix_entropy_score(model, data.image(idx), config.k_cm, data,
                                         partner_pool, config.lambda_min, stream, actx);
                break;
            }
        }
        if (!std::isfinite(s))
            throw NumericError("score_pool: non-finite score for index " +
                               std::to_string(idx));
        records[pos] = {idx, strategy, s};
    };

    unsigned workers = threads == 0 ? std::thread::hardware_concurrency() : threads;
    if (audit != nullptr) workers = 1;  // keep the audit stream ordered
    workers = std::max(1u, std::min<unsigned>(workers, unlabeled.size() ? unlabeled.size() : 1));

    if (workers == 1) {
        for (std::size_t pos = 0; pos < unlabeled.size(); ++pos) score_one(pos);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        std::exception_ptr error;
        std::mutex error_mu;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                NoGradGuard no_grad;
                try {
                    for (std::size_t pos = w; pos < unlabeled.size(); pos += workers)
                        score_one(pos);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }
    return records;
}

}  // namespace augal
