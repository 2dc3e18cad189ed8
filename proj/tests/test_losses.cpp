// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "augal/errors.hpp"
#include "augal/losses.hpp"
#include "augal/rng.hpp"

using namespace augal;

namespace {

Model tiny_mlp(std::size_t side, std::size_t classes, std::uint64_t seed) {
    ModelSpec spec;
    spec.architecture = "mlp";
    spec.in_channels = 1;
    spec.height = side;
    spec.width = side;
    spec.classes = classes;
    spec.init_seed = seed;
    return build(spec);
}

Model constant_model(std::size_t side, std::size_t classes) {
    Model m = tiny_mlp(side, classes, 0);
    for (auto& p : m.parameters())
        std::fill(p.data().begin(), p.data().end(), 0.0);
    return m;
}

TrainBatch random_batch(std::size_t m, std::size_t side, std::size_t classes,
                        int key) {
    TrainBatch batch;
    RngStream s(501, StreamPurpose::SynthData, 0, key);
    for (std::size_t i = 0; i < m; ++i) {
        Image im{1, side, side, {}};
        for (std::size_t j = 0; j < side * side; ++j) im.pix.push_back(s.next_normal());
        batch.images.push_back(std::move(im));
        batch.dataset_indices.push_back(100 + i);
        batch.labels.push_back(int(s.next_below(classes)));
    }
    return batch;
}

std::vector<std::vector<double>> param_grads(const Model& m) {
    std::vector<std::vector<double>> out;
    for (const auto& p : m.parameters())
        out.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));
    return out;
}

void clear_grads(Model& m) {
    for (auto& p : m.parameters())
        if (p.has_grad()) p.clear_grad();
}

}  // namespace

TEST_CASE("cross_entropy anchors") {
    SUBCASE("uniform logits, any hard label: ln C") {
        Tensor logits = Tensor::zeros({1, 10});
        CHECK(cross_entropy(logits, std::vector<int>{3}).item() ==
              doctest::Approx(std::log(10.0)).epsilon(1e-13));
    }
    SUBCASE("soft label equal to the softmax output: entropy of p") {
        Tensor logits = Tensor::from_data({1, 4}, {0.3, -0.9, 1.4, 0.0});
        Tensor p = softmax(logits);
        double entropy = 0.0;
        for (double v : p.data()) entropy -= v * std::log(v);
        CHECK(cross_entropy_soft(logits, p).item() ==
              doctest::Approx(entropy).epsilon(1e-12));
    }
    SUBCASE("batch of two is the mean of the singles") {
        Tensor logits = Tensor::from_data({2, 3}, {0.1, 0.7, -0.3, 1.0, 0.0, 2.0});
        const double a =
            cross_entropy(Tensor::from_data({1, 3}, {0.1, 0.7, -0.3}),
                          std::vector<int>{2})
                .item();
        const double b =
            cross_entropy(Tensor::from_data({1, 3}, {1.0, 0.0, 2.0}),
                          std::vector<int>{0})
                .item();
        CHECK(cross_entropy(logits, std::vector<int>{2, 0}).item() ==
              doctest::Approx((a + b) / 2).epsilon(1e-14));
    }
    SUBCASE("invalid class id is a usage error") {
        CHECK_THROWS_AS(cross_entropy(Tensor::zeros({1, 3}), std::vector<int>{3}),
                        UsageError);
        CHECK_THROWS_AS(cross_entropy(Tensor::zeros({1, 3}), std::vector<int>{-1}),
                        UsageError);
    }
}

TEST_CASE("pairwise_consistency anchors and properties") {
    SUBCASE("identical vectors: exactly 0") {
        std::vector<std::vector<double>> probs(4, {0.25, 0.5, 0.25});
        CHECK(pairwise_consistency(probs) == 0.0);
    }
    SUBCASE("two one-hot vectors: 2") {
        std::vector<std::vector<double>> probs{{1.0, 0.0}, {0.0, 1.0}};
        CHECK(pairwise_consistency(probs) == 2.0);
    }
    SUBCASE("K=5 equals the 10-pair enumeration") {
        RngStream s(8, StreamPurpose::SynthData, 0, 3);
        std::vector<std::vector<double>> probs;
        for (int k = 0; k < 5; ++k) {
            std::vector<double> p(6);
            double z = 0.0;
            for (double& v : p) z += (v = std::exp(s.next_normal()));
            for (double& v : p) v /= z;
            probs.push_back(p);
        }
        double oracle = 0.0;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j)
                for (int c = 0; c < 6; ++c)
                    oracle += (probs[i][c] - probs[j][c]) * (probs[i][c] - probs[j][c]);
        oracle /= 10.0;
        CHECK(pairwise_consistency(probs) == doctest::Approx(oracle).epsilon(1e-14));
    }
    SUBCASE("symmetric under permutation of the K vectors") {
        std::vector<std::vector<double>> probs{
            {0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5}};
        auto perm = probs;
        std::rotate(perm.begin(), perm.begin() + 1, perm.end());
        CHECK(pairwise_consistency(probs) == pairwise_consistency(perm));
    }
    SUBCASE("fewer than two vectors is a configuration error") {
        std::vector<std::vector<double>> one{{1.0}};
        CHECK_THROWS_AS(pairwise_consistency(one), ConfigError);
    }
}

TEST_CASE("cutout consistency loss on a constant model is the CE term alone") {
    Model m = constant_model(6, 10);
    TrainBatch batch = random_batch(3, 6, 10, 1);
    LossConfig cfg;
    cfg.use_co = true;
    LossContext ctx{7, 0, 0, nullptr};
    // constant model: every view gives uniform softmax; pairwise term 0,
    // CE term ln 10 for every view
    Tensor l = cutout_consistency_loss(m, batch, cfg, ctx);
    CHECK(l.item() == doctest::Approx(std::log(10.0)).epsilon(1e-13));
}

TEST_CASE("consistency losses match a replayed hand computation") {
    Model m = tiny_mlp(6, 4, 91);
    TrainBatch batch = random_batch(2, 6, 4, 2);
    batch.batch_ordinal = 0;
    LossContext ctx{13, 1, 2, nullptr};

    auto softmax_vec = [](std::vector<double> v) {
        const double mx = *std::max_element(v.begin(), v.end());
        double z = 0.0;
        for (double& x : v) z += (x = std::exp(x - mx));
        for (double& x : v) x /= z;
        return v;
    };
    auto forward_probs = [&](const Image& im) {
        NoGradGuard ng;
        Tensor logits = m.forward(Tensor::from_data({1, 1, 6, 6}, im.pix));
        return softmax_vec(logits.data());
    };
    auto ce_of = [&](const Image& im, const std::vector<double>& y) {
        auto p = forward_probs(im);
        double ce = 0.0;
        for (std::size_t c = 0; c < y.size(); ++c)
            if (y[c] > 0) ce -= y[c] * std::log(p[c]);
        return ce;
    };

    SUBCASE("cutout: per-sample two-view walk-through") {
        LossConfig cfg;
        cfg.use_co = true;
        cfg.k_co = 2;
        cfg.cutout_size = 3;
        const double got = cutout_consistency_loss(m, batch, cfg, ctx).item();

        double expect = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            RngStream stream(13, StreamPurpose::CutoutTrain, 1,
                             epoch_sample_key(2, batch.dataset_indices[i]));
            std::vector<Image> views;
            for (int k = 0; k < 2; ++k)
                views.push_back(
                    apply_cutout(batch.images[i],
                                 sample_cutout_box(stream, 6, 6, 3)));
            auto p0 = forward_probs(views[0]);
            auto p1 = forward_probs(views[1]);
            double pw = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                pw += (p0[c] - p1[c]) * (p0[c] - p1[c]);
            std::vector<double> y(4, 0.0);
            y[batch.labels[i]] = 1.0;
            expect += pw + 0.5 * (ce_of(views[0], y) + ce_of(views[1], y));
        }
        expect /= double(batch.size());
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("cutmix hard mode: labels stay primary") {
        LossConfig cfg;
        cfg.use_cm = true;
        cfg.k_cm = 2;
        cfg.cm_label_mode = CmLabelMode::Hard;
        const double got = cutmix_consistency_loss(m, batch, cfg, ctx).item();

        // replay the permutations, then the per-sample boxes
        RngStream perm_stream(13, StreamPurpose::CutmixTrainPerm, 1,
                              epoch_sample_key(2, batch.batch_ordinal));
        std::vector<std::vector<std::size_t>> perms(2);
        for (auto& perm : perms) {
            perm.resize(batch.size());
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[perm_stream.next_below(i)]);
        }
        double expect = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            RngStream stream(13, StreamPurpose::CutmixTrain, 1,
                             epoch_sample_key(2, batch.dataset_indices[i]));
            std::vector<Image> views;
            for (int k = 0; k < 2; ++k) {
                const CutoutBox box = sample_cutmix_box(stream, 6, 6, 0.5);
                views.push_back(
                    apply_cutmix(batch.images[i], batch.images[perms[k][i]], box)
                        .first);
            }
            auto p0 = forward_probs(views[0]);
            auto p1 = forward_probs(views[1]);
            double pw = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                pw += (p0[c] - p1[c]) * (p0[c] - p1[c]);
            std::vector<double> y(4, 0.0);
            y[batch.labels[i]] = 1.0;
            expect += pw + 0.5 * (ce_of(views[0], y) + ce_of(views[1], y));
        }
        expect /= double(batch.size());
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("soft and hard cutmix differ only in the CE term") {
        LossConfig hard;
        hard.use_cm = true;
        hard.cm_label_mode = CmLabelMode::Hard;
        LossConfig soft = hard;
        soft.cm_label_mode = CmLabelMode::Soft;
        const double lh = cutmix_consistency_loss(m, batch, hard, ctx).item();
        const double ls = cutmix_consistency_loss(m, batch, soft, ctx).item();
        // recompute both CE terms from the replayed views and check the
        // difference matches exactly
        RngStream perm_stream(13, StreamPurpose::CutmixTrainPerm, 1,
                              epoch_sample_key(2, batch.batch_ordinal));
        std::vector<std::vector<std::size_t>> perms(2);
        for (auto& perm : perms) {
            perm.resize(batch.size());
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[perm_stream.next_below(i)]);
        }
        double ce_hard = 0.0, ce_soft = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            RngStream stream(13, StreamPurpose::CutmixTrain, 1,
                             epoch_sample_key(2, batch.dataset_indices[i]));
            for (int k = 0; k < 2; ++k) {
                const CutoutBox box = sample_cutmix_box(stream, 6, 6, 0.5);
                auto [view, lam] =
                    apply_cutmix(batch.images[i], batch.images[perms[k][i]], box);
                std::vector<double> yh(4, 0.0), ys(4, 0.0);
                yh[batch.labels[i]] = 1.0;
                ys[batch.labels[i]] += lam;
                ys[batch.labels[perms[k][i]]] += 1.0 - lam;
                ce_hard += ce_of(view, yh) / 2.0;
                ce_soft += ce_of(view, ys) / 2.0;
            }
        }
        ce_hard /= double(batch.size());
        ce_soft /= double(batch.size());
        CHECK(ls - lh == doctest::Approx(ce_soft - ce_hard).epsilon(1e-10));
    }
}

TEST_CASE("lambda_min near 1 makes cutmix views the originals") {
    Model m = tiny_mlp(6, 4, 14);
    TrainBatch batch = random_batch(2, 6, 4, 3);
    LossConfig cfg;
    cfg.use_cm = true;
    cfg.lambda_min = 0.999;  // box side floor(6*sqrt(0.001)) = 0
    LossContext ctx{5, 0, 0, nullptr};
    const double got = cutmix_consistency_loss(m, batch, cfg, ctx).item();
    // views equal originals: pairwise term is exactly 0, so the loss is the
    // (soft=primary) CE of the unmodified batch
    NoGradGuard ng;
    std::vector<double> flat;
    for (const auto& im : batch.images)
        flat.insert(flat.end(), im.pix.begin(), im.pix.end());
    Tensor logits = m.forward(Tensor::from_data({2, 1, 6, 6}, std::move(flat)));
    const double ce = cross_entropy(logits, batch.labels).item();
    CHECK(got == doctest::Approx(ce).epsilon(1e-13));
}

TEST_CASE("total_loss composition") {
    Model m = tiny_mlp(6, 5, 19);
    TrainBatch batch = random_batch(3, 6, 5, 4);
    LossContext ctx{23, 2, 1, nullptr};

    SUBCASE("both terms disabled: l_total == l_ce") {
        LossConfig cfg;
        TotalLoss tl = total_loss(m, batch, cfg, ctx);
        CHECK(tl.breakdown.l_total == tl.breakdown.l_ce);
        CHECK(tl.breakdown.l_co == 0.0);
        CHECK(tl.breakdown.l_cm == 0.0);
    }

    SUBCASE("enabling a term never changes l_ce; additivity is exact") {
        LossConfig plain;
        const double ce_alone = total_loss(m, batch, plain, ctx).breakdown.l_ce;
        LossConfig full;
        full.use_co = true;
        full.use_cm = true;
        TotalLoss tl = total_loss(m, batch, full, ctx);
        CHECK(tl.breakdown.l_ce == ce_alone);
        CHECK(tl.breakdown.l_total ==
              tl.breakdown.l_ce + tl.breakdown.l_co + tl.breakdown.l_cm);
        CHECK(tl.breakdown.l_co > 0.0);
        CHECK(tl.breakdown.l_cm > 0.0);
    }

    SUBCASE("gradient of the total equals the sum of per-term gradients") {
        LossConfig full;
        full.use_co = true;
        full.use_cm = true;
        TotalLoss tl = total_loss(m, batch, full, ctx);
        backward(tl.loss);
        auto total_grads = param_grads(m);
        clear_grads(m);

        LossConfig plain;
        backward(total_loss(m, batch, plain, ctx).loss);
        auto ce_grads = param_grads(m);
        clear_grads(m);

        LossConfig co_only;
        co_only.use_co = true;
        backward(cutout_consistency_loss(m, batch, co_only, ctx));
        auto co_grads = param_grads(m);
        clear_grads(m);

        LossConfig cm_only;
        cm_only.use_cm = true;
        backward(cutmix_consistency_loss(m, batch, cm_only, ctx));
        auto cm_grads = param_grads(m);
        clear_grads(m);

        for (std::size_t p = 0; p < total_grads.size(); ++p)
            for (std::size_t i = 0; i < total_grads[p].size(); ++i)
                CHECK(total_grads[p][i] ==
                      doctest::Approx(ce_grads[p][i] + co_grads[p][i] +
                                      cm_grads[p][i])
                          .epsilon(1e-10));
    }
}

TEST_CASE("loss config validation") {
    LossConfig bad;
    bad.use_co = true;
    bad.k_co = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    LossConfig lam;
    lam.lambda_min = 1.0;
    CHECK_THROWS_AS(lam.validate(), ConfigError);
}

TEST_CASE("all losses are nonnegative") {
    Model m = tiny_mlp(6, 4, 44);
    TrainBatch batch = random_batch(4, 6, 4, 9);
    LossConfig full;
    full.use_co = true;
    full.use_cm = true;
    LossContext ctx{31, 0, 0, nullptr};
    TotalLoss tl = total_loss(m, batch, full, ctx);
    CHECK(tl.breakdown.l_ce >= 0.0);
    CHECK(tl.breakdown.l_co >= 0.0);
    CHECK(tl.breakdown.l_cm >= 0.0);
    CHECK(tl.breakdown.l_total >= 0.0);
}
