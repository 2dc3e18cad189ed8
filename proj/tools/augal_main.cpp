// SPDX-License-Identifier: Apache-2.0
//
// augal - augmentation-based active learning harness.
//   run <config>         execute a (strategy x loss x seed) grid
//   chart <dir> <svg>    learning-curve chart from a results tree
//   score-dump <config>  run with per-cycle score CSVs enabled
//   verify               built-in oracle and invariant checks

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "augal/harness.hpp"
#include "augal/rng.hpp"

namespace {

int g_verify_failures = 0;

void check(bool ok, const std::string& name) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name.c_str());
    if (!ok) ++g_verify_failures;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

int run_verify() {
    using namespace augal;

    // analytic op anchors
    {
        Tensor r = relu(Tensor::from_data({3}, {-1.0, 0.0, 2.0}));
        check(r.data() == std::vector<double>{0.0, 0.0, 2.0}, "relu anchor");
        Tensor s = softmax(Tensor::zeros({10}));
        bool ok = true;
        for (double v : s.data()) ok = ok && near(v, 0.1, 1e-15);
        check(ok, "softmax symmetry anchor");
    }

    // sgd two-step momentum recurrence
    {
        Tensor w = Tensor::from_data({1}, {1.0}, true);
        SgdOptimizer opt(0.1, 0.9, 0.0);
        opt.attach({w});
        for (int i = 0; i < 2; ++i) {
            Tensor loss = sum(w);
            backward(loss);
            opt.step();
        }
        check(near(w.data()[0], 0.71, 1e-12), "sgd momentum two-step recurrence");
    }

    // schedule crosses two milestones at once
    {
        SgdOptimizer opt(0.1, 0.0, 0.0);
        LrSchedule sched{{60, 120, 160}, 0.2};
        schedule_apply(sched, opt, 120);
        check(near(opt.learning_rate(), 0.004, 1e-12), "lr schedule double crossing");
    }

    // finite differences on a tiny model
    {
        ModelSpec spec;
        spec.architecture = "mlp";
        spec.in_channels = 1;
        spec.height = 2;
        spec.width = 3;
        spec.classes = 3;
        spec.init_seed = 5;
        Model model = build(spec);
        TrainBatch batch;
        batch.dataset_indices = {0, 1};
        batch.labels = {0, 2};
        RngStream pix(11, StreamPurpose::SynthData, 0, 0);
        for (int i = 0; i < 2; ++i) {
            Image im{1, 2, 3, {}};
            for (int j = 0; j < 6; ++j) im.pix.push_back(pix.next_normal());
            batch.images.push_back(im);
        }
        LossConfig cfg;
        LossContext ctx{3, 0, 0, nullptr};
        auto loss_value = [&]() {
            NoGradGuard ng;
            return total_loss(model, batch, cfg, ctx).breakdown.l_total;
        };
        TotalLoss tl = total_loss(model, batch, cfg, ctx);
        backward(tl.loss);
        double max_rel = 0.0;
        auto params = model.parameters();
        for (auto& p : params) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double keep = p.data()[i];
                p.data()[i] = keep + 1e-5;
                const double up = loss_value();
                p.data()[i] = keep - 1e-5;
                const double dn = loss_value();
                p.data()[i] = keep;
                const double fd = (up - dn) / 2e-5;
                const double an = p.grad()[i];
                const double rel =
                    std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
                max_rel = std::max(max_rel, rel);
            }
        }
        check(max_rel < 1e-4, "finite-difference gradient check (tiny mlp)");
    }

    // cutmix lambda equals the recomputed area ratio exactly
    {
        RngStream stream(17, StreamPurpose::CutmixScore, 0, 0);
        bool ok = true;
        for (int i = 0; i < 200; ++i) {
            CutoutBox box = sample_cutmix_box(stream, 28, 28, 0.5);
            const double lam = cutmix_lambda(box, 28, 28);
            ok = ok && lam >= 0.5 &&
                 lam == 1.0 - static_cast<double>(clip_box(box, 28, 28).area()) / 784.0;
        }
        check(ok, "cutmix lambda area identity");
    }

    // top-b selection invariance under a strictly increasing transform
    {
        bool ok = true;
        for (int trial = 0; trial < 200 && ok; ++trial) {
            RngStream stream(23, StreamPurpose::RandomScore, 0, trial);
            std::vector<ScoreRecord> recs(20);
            for (std::size_t i = 0; i < recs.size(); ++i)
                recs[i] = {i, Strategy::Random, stream.next_uniform()};
            auto base = select_top_b(recs, 7);
            for (auto& r : recs) r.score = std::exp(3.0 * r.score) + 1.0;
            ok = select_top_b(recs, 7) == base;
        }
        check(ok, "select_top_b monotone-transform invariance");
    }

    // full-scenario determinism on synthetic blobs
    {
        GridSpec grid = parse_config("blobs-toy");
        ResolvedDataset data = resolve_dataset(grid.base, "");
        ScenarioConfig cfg = grid.base;
        cfg.strategy = Strategy::Entropy;
        auto a = run_scenario(cfg, data.train, data.test, 1);
        auto b = run_scenario(cfg, data.train, data.test, 1);
        bool ok = a.size() == b.size();
        for (std::size_t i = 0; ok && i < a.size(); ++i)
            ok = a[i].selected == b[i].selected &&
                 a[i].test_accuracy == b[i].test_accuracy;
        check(ok, "scenario determinism (blobs, entropy)");
    }

    std::printf("%s\n", g_verify_failures == 0 ? "verify: all checks passed"
                                               : "verify: FAILURES");
    return g_verify_failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"augmentation-based active learning harness"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir = "results";
    std::vector<std::uint64_t> seeds;
    unsigned jobs = 1;
    bool dump_augment = false, dump_scores = false;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path,
                        "config file or preset name (fashion-desk, paper-protocol, "
                        "blobs-toy)")
            ->required();
        cmd->add_option("--data-dir", data_dir,
                        "dataset root (default: $AUGAL_DATA_DIR, then the config's "
                        "dataset.path)");
        cmd->add_option("--out-dir", out_dir, "results tree root");
        cmd->add_option("--seeds", seeds, "override the config's seed list")
            ->delimiter(',');
        cmd->add_option("--jobs", jobs, "parallel grid cells (processes)");
        cmd->add_flag("--dump-augment", dump_augment,
                      "write a JSON-line augmentation audit per cell");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "execute a config's grid");
    add_run_flags(run_cmd);
    run_cmd->add_flag("--dump-scores", dump_scores, "write per-cycle score CSVs");

    CLI::App* dump_cmd =
        app.add_subcommand("score-dump", "run the grid with score CSVs enabled");
    add_run_flags(dump_cmd);

    std::string chart_dir, chart_out;
    CLI::App* chart_cmd = app.add_subcommand("chart", "emit a learning-curve SVG");
    chart_cmd->add_option("results-dir", chart_dir, "results tree root")->required();
    chart_cmd->add_option("output", chart_out, "output .svg path")->required();

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run built-in oracle and invariant checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run_cmd) || app.got_subcommand(dump_cmd)) {
            augal::GridSpec grid = augal::parse_config(config_path);
            augal::RunOptions options;
            options.out_dir = out_dir;
            options.data_dir = data_dir;
            options.seeds_override = seeds;
            options.jobs = jobs;
            options.dump_augment = dump_augment;
            options.dump_scores = dump_scores || app.got_subcommand(dump_cmd);
            const int status = augal::run_grid(grid, options);
            if (status == 0)
                std::printf("grid complete: %zu cells, results in %s\n",
                            grid.cell_count(), out_dir.c_str());
            return status;
        }
        if (app.got_subcommand(chart_cmd)) {
            augal::emit_chart(chart_dir, chart_out);
            std::printf("wrote %s\n", chart_out.c_str());
            return 0;
        }
        if (app.got_subcommand(verify_cmd)) return run_verify();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
