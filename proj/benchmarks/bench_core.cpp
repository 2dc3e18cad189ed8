// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numeric>

#include "augal/losses.hpp"
#include "augal/model.hpp"
#include "augal/rng.hpp"
#include "augal/uncertainty.hpp"

namespace {

using namespace augal;

Tensor random_tensor(std::vector<std::size_t> shape, bool requires_grad, int key) {
    RngStream s(7, StreamPurpose::SynthData, 0, key);
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) v = s.next_normal();
    return t;
}

Model fashion_model() {
    ModelSpec spec;
    spec.architecture = "desk_cnn";
    spec.in_channels = 1;
    spec.height = 28;
    spec.width = 28;
    spec.classes = 10;
    spec.init_seed = 1;
    return build(spec);
}

TrainBatch fashion_batch(std::size_t m) {
    TrainBatch batch;
    RngStream s(9, StreamPurpose::SynthData, 0, 0);
    for (std::size_t i = 0; i < m; ++i) {
        Image im{1, 28, 28, {}};
        for (int j = 0; j < 784; ++j) im.pix.push_back(s.next_normal());
        batch.images.push_back(std::move(im));
        batch.dataset_indices.push_back(i);
        batch.labels.push_back(int(s.next_below(10)));
    }
    return batch;
}

void BM_conv2d_forward(benchmark::State& state) {
    NoGradGuard ng;
    Tensor x = random_tensor({16, 16, 14, 14}, false, 1);
    Tensor w = random_tensor({32, 16, 3, 3}, false, 2);
    Tensor b = random_tensor({32}, false, 3);
    for (auto _ : state) {
        Tensor y = conv2d(x, w, b, 1, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_conv2d_forward);

void BM_conv2d_train_step(benchmark::State& state) {
    Tensor x = random_tensor({16, 16, 14, 14}, false, 1);
    Tensor w = random_tensor({32, 16, 3, 3}, true, 2);
    Tensor b = random_tensor({32}, true, 3);
    for (auto _ : state) {
        Tensor y = conv2d(x, w, b, 1, 1);
        backward(sum(mul(y, y)));
        w.clear_grad();
        b.clear_grad();
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_conv2d_train_step);

void BM_matmul(benchmark::State& state) {
    NoGradGuard ng;
    Tensor a = random_tensor({128, 1568}, false, 1);
    Tensor b = random_tensor({1568, 128}, false, 2);
    for (auto _ : state) {
        Tensor y = matmul(a, b);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_matmul);

void BM_model_forward_128(benchmark::State& state) {
    NoGradGuard ng;
    Model m = fashion_model();
    Tensor x = random_tensor({128, 1, 28, 28}, false, 4);
    for (auto _ : state) {
        Tensor y = m.forward(x);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_model_forward_128);

void BM_total_loss_task_backward(benchmark::State& state) {
    Model m = fashion_model();
    TrainBatch batch = fashion_batch(128);
    LossConfig cfg;
    LossContext ctx{1, 0, 0, nullptr};
    for (auto _ : state) {
        TotalLoss tl = total_loss(m, batch, cfg, ctx);
        backward(tl.loss);
        for (auto& p : m.parameters()) p.clear_grad();
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_total_loss_task_backward);

void BM_total_loss_cocm_backward(benchmark::State& state) {
    Model m = fashion_model();
    TrainBatch batch = fashion_batch(128);
    LossConfig cfg;
    cfg.use_co = true;
    cfg.use_cm = true;
    LossContext ctx{1, 0, 0, nullptr};
    for (auto _ : state) {
        TotalLoss tl = total_loss(m, batch, cfg, ctx);
        backward(tl.loss);
        for (auto& p : m.parameters()) p.clear_grad();
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_total_loss_cocm_backward);

void BM_k_cutout_score(benchmark::State& state) {
    Model m = fashion_model();
    Dataset d = synth_blobs(4, 2, 28, 1.0, 3, "train");
    std::uint64_t sample = 0;
    for (auto _ : state) {
        RngStream stream(5, StreamPurpose::CutoutScore, 0, sample++);
        benchmark::DoNotOptimize(k_cutout_score(m, d.image(0), 2, stream, 14));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_k_cutout_score);

}  // namespace

BENCHMARK_MAIN();
