// SPDX-License-Identifier: Apache-2.0
#include "augal/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "augal/errors.hpp"

namespace augal {

namespace fs = std::filesystem;
using nlohmann::json;

const char* artifact_version() { return "0.1.0"; }

const char* cycles_csv_header() {
    return "cycle,seed,strategy,loss,labeled_count,test_accuracy,l_ce,l_co,l_cm,"
           "wall_time_s";
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end())
            throw ConfigError("config: unknown key '" + prefix + key + "'");
    }
}

std::string iso_utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

LossConfig loss_config_from_name(const std::string& name, const LossConfig& base) {
    LossConfig cfg = base;
    cfg.use_co = false;
    cfg.use_cm = false;
    if (name == "task") return cfg;
    if (name == "task+co") {
        cfg.use_co = true;
        return cfg;
    }
    if (name == "task+cm") {
        cfg.use_cm = true;
        return cfg;
    }
    if (name == "task+co+cm") {
        cfg.use_co = true;
        cfg.use_cm = true;
        return cfg;
    }
    throw ConfigError("config: unknown loss composition '" + name +
                      "' (want task, task+co, task+cm or task+co+cm)");
}

GridSpec parse_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    check_keys(j, "",
               {"dataset", "pool_size", "budget", "cycles", "strategies", "losses",
                "seeds", "epochs", "batch_size", "optimizer", "schedule", "model",
                "augment", "scoring_threads"});

    GridSpec grid;
    ScenarioConfig& base = grid.base;

    if (!j.contains("dataset")) throw ConfigError("config: missing key 'dataset'");
    const json& ds = j["dataset"];
    check_keys(ds, "dataset.", {"id", "path", "blobs"});
    base.dataset_id = ds.value("id", "");
    base.dataset_path = ds.value("path", "");
    if (base.dataset_id != "fashion_mnist" && base.dataset_id != "cifar10" &&
        base.dataset_id != "cifar100" && base.dataset_id != "blobs")
        throw ConfigError("config: unknown key 'dataset.id' value '" +
                          base.dataset_id + "'");
    if (ds.contains("blobs")) {
        const json& bl = ds["blobs"];
        check_keys(bl, "dataset.blobs.",
                   {"n_per_class", "test_per_class", "classes", "side", "separation",
                    "seed"});
        base.blobs.n_per_class = bl.value("n_per_class", base.blobs.n_per_class);
        base.blobs.test_per_class =
            bl.value("test_per_class", base.blobs.test_per_class);
        base.blobs.classes = bl.value("classes", base.blobs.classes);
        base.blobs.side = bl.value("side", base.blobs.side);
        base.blobs.separation = bl.value("separation", base.blobs.separation);
        base.blobs.seed = bl.value("seed", base.blobs.seed);
    }

    base.pool_size = j.value("pool_size", std::size_t{0});
    if (!j.contains("budget")) throw ConfigError("config: missing key 'budget'");
    base.budget = j["budget"].get<std::size_t>();
    base.cycles = j.value("cycles", std::size_t{0});
    base.epochs = j.value("epochs", std::size_t{1});
    base.batch_size = j.value("batch_size", std::size_t{128});
    base.scoring_threads = j.value("scoring_threads", 0u);

    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        check_keys(o, "optimizer.", {"learning_rate", "momentum", "weight_decay"});
        base.optimizer.learning_rate =
            o.value("learning_rate", base.optimizer.learning_rate);
        base.optimizer.momentum = o.value("momentum", base.optimizer.momentum);
        base.optimizer.weight_decay =
            o.value("weight_decay", base.optimizer.weight_decay);
    }
    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        check_keys(s, "schedule.", {"milestones", "factor"});
        base.schedule.milestones =
            s.value("milestones", std::vector<std::size_t>{});
        base.schedule.factor = s.value("factor", 1.0);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model.", {"architecture", "init_seed", "widths"});
        base.model.architecture = m.value("architecture", base.model.architecture);
        base.model.init_seed = m.value("init_seed", base.model.init_seed);
        if (m.contains("widths")) {
            const auto w = m["widths"].get<std::vector<std::size_t>>();
            if (w.size() != 3)
                throw ConfigError("config: 'model.widths' wants [conv1,conv2,fc]");
            base.model.widths = {w[0], w[1], w[2]};
        }
    }
    if (j.contains("augment")) {
        const json& a = j["augment"];
        check_keys(a, "augment.",
                   {"k_co", "k_cm", "lambda_min", "cm_label_mode", "cutout_size",
                    "cm_partner_pool"});
        base.loss.k_co = a.value("k_co", base.loss.k_co);
        base.loss.k_cm = a.value("k_cm", base.loss.k_cm);
        base.loss.lambda_min = a.value("lambda_min", base.loss.lambda_min);
        base.loss.cutout_size = a.value("cutout_size", base.loss.cutout_size);
        const std::string mode = a.value("cm_label_mode", "soft");
        if (mode == "soft") base.loss.cm_label_mode = CmLabelMode::Soft;
        else if (mode == "hard") base.loss.cm_label_mode = CmLabelMode::Hard;
        else throw ConfigError("config: 'augment.cm_label_mode' must be soft or hard");
        const std::string pool = a.value("cm_partner_pool", "unlabeled");
        if (pool == "unlabeled") base.cm_partner_from_labeled = false;
        else if (pool == "labeled") base.cm_partner_from_labeled = true;
        else throw ConfigError(
            "config: 'augment.cm_partner_pool' must be unlabeled or labeled");
    }

    if (!j.contains("strategies") || !j["strategies"].is_array() ||
        j["strategies"].empty())
        throw ConfigError("config: 'strategies' must be a nonempty list");
    for (const auto& s : j["strategies"])
        grid.strategies.push_back(strategy_from_string(s.get<std::string>()));
    if (!j.contains("losses") || !j["losses"].is_array() || j["losses"].empty())
        throw ConfigError("config: 'losses' must be a nonempty list");
    for (const auto& l : j["losses"]) {
        const std::string name = l.get<std::string>();
        loss_config_from_name(name, base.loss);  // validates
        grid.loss_names.push_back(name);
    }
    if (!j.contains("seeds") || !j["seeds"].is_array() || j["seeds"].empty())
        throw ConfigError("config: 'seeds' must be a nonempty list");
    for (const auto& s : j["seeds"]) grid.seeds.push_back(s.get<std::uint64_t>());

    // Local invariants that do not need the dataset: reuse the scenario
    // validator against the declared pool size when one is given.
    if (base.pool_size > 0) {
        try {
            base.validate(base.pool_size);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    } else {
        base.loss.validate();
        base.schedule.validate();
        if (base.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    }
    return grid;
}

GridSpec parse_config(const std::string& path) {
    const std::string preset = preset_config(path);
    if (!preset.empty()) return parse_config_text(preset, "preset:" + path);
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string preset_config(const std::string& name) {
    if (name == "fashion-desk")
        return R"json({
  "dataset": {"id": "fashion_mnist", "path": ""},
  "pool_size": 10000,
  "budget": 300,
  "cycles": 3,
  "strategies": ["random", "margin", "cutmix_entropy"],
  "losses": ["task", "task+co+cm"],
  "seeds": [1, 2, 3],
  "epochs": 20,
  "batch_size": 128,
  "optimizer": {"learning_rate": 0.1, "momentum": 0.9, "weight_decay": 5e-4},
  "schedule": {"milestones": [15], "factor": 0.1},
  "model": {"architecture": "desk_cnn", "init_seed": 0},
  "augment": {"k_co": 2, "k_cm": 2, "lambda_min": 0.5, "cm_label_mode": "soft",
              "cm_partner_pool": "unlabeled"}
})json";
    if (name == "paper-protocol")
        return R"json({
  "dataset": {"id": "fashion_mnist", "path": ""},
  "pool_size": 0,
  "budget": 300,
  "cycles": 10,
  "strategies": ["random", "k_cutout", "cutmix_entropy", "entropy", "margin"],
  "losses": ["task", "task+co", "task+cm", "task+co+cm"],
  "seeds": [1, 2, 3],
  "epochs": 200,
  "batch_size": 128,
  "optimizer": {"learning_rate": 0.1, "momentum": 0.9, "weight_decay": 5e-4},
  "schedule": {"milestones": [160], "factor": 0.1},
  "model": {"architecture": "desk_cnn", "init_seed": 0},
  "augment": {"k_co": 2, "k_cm": 2, "lambda_min": 0.5, "cm_label_mode": "soft",
              "cm_partner_pool": "unlabeled"}
})json";
    if (name == "blobs-toy")
        return R"json({
  "dataset": {"id": "blobs",
              "blobs": {"n_per_class": 60, "test_per_class": 40, "classes": 4,
                        "side": 8, "separation": 3.0, "seed": 7}},
  "pool_size": 0,
  "budget": 40,
  "cycles": 1,
  "strategies": ["entropy"],
  "losses": ["task"],
  "seeds": [1],
  "epochs": 4,
  "batch_size": 32,
  "optimizer": {"learning_rate": 0.05, "momentum": 0.9, "weight_decay": 0.0},
  "schedule": {"milestones": [], "factor": 1.0},
  "model": {"architecture": "mlp", "init_seed": 0}
})json";
    return "";
}

// ---------------------------------------------------------------------------
// canonical hash
// ---------------------------------------------------------------------------

namespace {

json grid_semantic_json(const GridSpec& grid) {
    const ScenarioConfig& b = grid.base;
    json j;
    j["dataset_id"] = b.dataset_id;
    if (b.dataset_id == "blobs") {
        j["blobs"] = {{"n_per_class", b.blobs.n_per_class},
                      {"test_per_class", b.blobs.test_per_class},
                      {"classes", b.blobs.classes},
                      {"side", b.blobs.side},
                      {"separation", b.blobs.separation},
                      {"seed", b.blobs.seed}};
    }
    j["pool_size"] = b.pool_size;
    j["budget"] = b.budget;
    j["cycles"] = b.cycles;
    j["epochs"] = b.epochs;
    j["batch_size"] = b.batch_size;
    j["optimizer"] = {{"learning_rate", b.optimizer.learning_rate},
                      {"momentum", b.optimizer.momentum},
                      {"weight_decay", b.optimizer.weight_decay}};
    j["schedule"] = {{"milestones", b.schedule.milestones},
                     {"factor", b.schedule.factor}};
    j["model"] = {{"architecture", b.model.architecture},
                  {"init_seed", b.model.init_seed},
                  {"widths", {b.model.widths.conv1, b.model.widths.conv2,
                              b.model.widths.fc}}};
    j["augment"] = {{"k_co", b.loss.k_co},
                    {"k_cm", b.loss.k_cm},
                    {"lambda_min", b.loss.lambda_min},
                    {"cm_label_mode",
                     b.loss.cm_label_mode == CmLabelMode::Soft ? "soft" : "hard"},
                    {"cutout_size", b.loss.cutout_size},
                    {"cm_partner_pool",
                     b.cm_partner_from_labeled ? "labeled" : "unlabeled"}};
    std::vector<std::string> strategies;
    for (Strategy s : grid.strategies) strategies.push_back(strategy_name(s));
    j["strategies"] = strategies;
    j["losses"] = grid.loss_names;
    j["seeds"] = grid.seeds;
    return j;
}

}  // namespace

std::string grid_config_hash(const GridSpec& grid) {
    return fnv1a_hex(grid_semantic_json(grid).dump());
}

// ---------------------------------------------------------------------------
// dataset resolution
// ---------------------------------------------------------------------------

namespace {

std::string env_data_dir() {
    const char* env = std::getenv("AUGAL_DATA_DIR");
    return env ? env : "";
}

std::string find_root(const std::vector<std::string>& roots,
                      const std::vector<std::string>& files) {
    for (const auto& root : roots) {
        if (root.empty()) continue;
        bool all = true;
        for (const auto& f : files)
            if (!fs::exists(fs::path(root) / f)) {
                all = false;
                break;
            }
        if (all) return root;
    }
    return "";
}

std::string file_checksum(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return fnv1a_hex(ss.str());
}

}  // namespace

ResolvedDataset resolve_dataset(const ScenarioConfig& config,
                                const std::string& data_dir) {
    ResolvedDataset out;
    if (config.dataset_id == "blobs") {
        const auto& bp = config.blobs;
        out.train = synth_blobs(bp.n_per_class, bp.classes, bp.side, bp.separation,
                                bp.seed, "train");
        out.test = synth_blobs(bp.test_per_class, bp.classes, bp.side, bp.separation,
                               bp.seed, "test");
        out.stats.mean.assign(1, 0.0);
        out.stats.stddev.assign(1, 1.0);
        return out;
    }

    const std::string base = !data_dir.empty()      ? data_dir
                             : !env_data_dir().empty() ? env_data_dir()
                                                       : config.dataset_path;
    std::vector<std::string> roots{base};
    if (config.dataset_id == "fashion_mnist") {
        roots.push_back((fs::path(base) / "fashion_mnist").string());
        roots.push_back((fs::path(base) / "fashion").string());
        roots.push_back((fs::path(base) / "FashionMNIST" / "raw").string());
        const std::vector<std::string> files{
            "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
            "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};
        const std::string root = find_root(roots, files);
        if (root.empty())
            throw ConfigError("dataset: FashionMNIST IDX files not found under '" +
                              base + "' (set --data-dir or AUGAL_DATA_DIR)");
        const fs::path r(root);
        out.train = load_idx((r / files[0]).string(), (r / files[1]).string());
        out.test = load_idx((r / files[2]).string(), (r / files[3]).string());
        for (const auto& f : files)
            out.file_checksums.emplace_back((r / f).string(),
                                            file_checksum((r / f).string()));
    } else if (config.dataset_id == "cifar10") {
        roots.push_back((fs::path(base) / "cifar10").string());
        roots.push_back((fs::path(base) / "cifar-10-batches-bin").string());
        const std::vector<std::string> train_files{
            "data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
            "data_batch_4.bin", "data_batch_5.bin"};
        std::vector<std::string> all = train_files;
        all.push_back("test_batch.bin");
        const std::string root = find_root(roots, all);
        if (root.empty())
            throw ConfigError("dataset: CIFAR-10 batch files not found under '" +
                              base + "'");
        const fs::path r(root);
        std::vector<std::string> paths;
        for (const auto& f : train_files) paths.push_back((r / f).string());
        out.train = load_cifar_files(paths, CifarVariant::Cifar10);
        out.test = load_cifar((r / "test_batch.bin").string(), CifarVariant::Cifar10);
        for (const auto& f : all)
            out.file_checksums.emplace_back((r / f).string(),
                                            file_checksum((r / f).string()));
    } else if (config.dataset_id == "cifar100") {
        roots.push_back((fs::path(base) / "cifar100").string());
        roots.push_back((fs::path(base) / "cifar-100-binary").string());
        const std::vector<std::string> files{"train.bin", "test.bin"};
        const std::string root = find_root(roots, files);
        if (root.empty())
            throw ConfigError("dataset: CIFAR-100 files not found under '" + base +
                              "'");
        const fs::path r(root);
        out.train = load_cifar((r / "train.bin").string(), CifarVariant::Cifar100);
        out.test = load_cifar((r / "test.bin").string(), CifarVariant::Cifar100);
        for (const auto& f : files)
            out.file_checksums.emplace_back((r / f).string(),
                                            file_checksum((r / f).string()));
    } else {
        throw ConfigError("dataset: unknown id '" + config.dataset_id + "'");
    }
    out.train.split = "train";
    out.test.split = "test";
    out.stats = compute_channel_stats(out.train);
    normalize(out.train, out.stats);
    normalize(out.test, out.stats);
    return out;
}

// ---------------------------------------------------------------------------
// grid execution
// ---------------------------------------------------------------------------

namespace {

struct Cell {
    Strategy strategy;
    std::string loss_name;
    std::uint64_t seed;
};

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void run_cell(const GridSpec& grid, const Cell& cell, const ResolvedDataset& data,
              const RunOptions& options, unsigned scoring_threads) {
    ScenarioConfig cfg = grid.base;
    cfg.strategy = cell.strategy;
    cfg.loss = loss_config_from_name(cell.loss_name, grid.base.loss);
    if (cfg.scoring_threads == 0) cfg.scoring_threads = scoring_threads;

    const fs::path dir = fs::path(options.out_dir) / strategy_name(cell.strategy) /
                         cell.loss_name / std::to_string(cell.seed);
    fs::create_directories(dir);
    const std::string cycles_path = (dir / "cycles.csv").string();
    {
        std::ofstream f(cycles_path, std::ios::trunc);
        f << cycles_csv_header() << "\n";
    }

    std::ofstream scores_file;
    if (options.dump_scores) {
        scores_file.open((dir / "scores.csv").string(), std::ios::trunc);
        scores_file << "cycle,index,strategy,score\n";
    }
    std::ofstream augment_file;
    if (options.dump_augment)
        augment_file.open((dir / "augment.jsonl").string(), std::ios::trunc);

    RunHooks hooks;
    std::size_t labeled_count = 0;
    hooks.cycle_sink = [&](const CycleReport& report) {
        labeled_count += report.selected.size();
        const LossBreakdown& l = report.epoch_losses.back();
        std::ofstream f(cycles_path, std::ios::app);
        f << report.cycle << ',' << cell.seed << ',' << strategy_name(cell.strategy)
          << ',' << cell.loss_name << ',' << labeled_count << ','
          << csv_num(report.test_accuracy) << ',' << csv_num(l.l_ce) << ','
          << csv_num(l.l_co) << ',' << csv_num(l.l_cm) << ','
          << csv_num(report.wall_time_s) << "\n";
        f.flush();
    };
    if (options.dump_scores)
        hooks.score_sink = [&](std::uint32_t cycle, const ScoreRecord& r) {
            scores_file << cycle << ',' << r.index << ',' << strategy_name(r.strategy)
                        << ',' << csv_num(r.score) << "\n";
        };
    if (options.dump_augment)
        hooks.augment_audit = [&](const AugmentEventRecord& ev) {
            json line{{"purpose", ev.purpose},
                      {"cycle", ev.cycle},
                      {"sample", ev.sample},
                      {"box",
                       {{"row0", ev.box.row0},
                        {"col0", ev.box.col0},
                        {"height", ev.box.height},
                        {"width", ev.box.width}}}};
            if (ev.partner) line["partner"] = *ev.partner;
            if (ev.lambda) line["lambda"] = *ev.lambda;
            augment_file << line.dump() << "\n";
        };

    run_scenario(cfg, data.train, data.test, cell.seed, &hooks);
}

}  // namespace

int run_grid(const GridSpec& grid, const RunOptions& options) {
    GridSpec g = grid;
    if (!options.seeds_override.empty()) g.seeds = options.seeds_override;

    const ResolvedDataset data = resolve_dataset(g.base, options.data_dir);
    g.base.validate(data.train.n);

    std::vector<Cell> cells;
    for (Strategy s : g.strategies)
        for (const auto& l : g.loss_names)
            for (std::uint64_t seed : g.seeds) cells.push_back({s, l, seed});

    const std::string started = iso_utc_now();
    fs::create_directories(options.out_dir);

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned jobs = std::max(1u, options.jobs);
    const unsigned scoring_threads = std::max(1u, hw / jobs);

    std::vector<std::string> statuses(cells.size(), "ok");
    bool any_failed = false;

    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                run_cell(g, cells[i], data, options, scoring_threads);
            } catch (const std::exception& e) {
                statuses[i] = std::string("failed: ") + e.what();
                any_failed = true;
                std::fprintf(stderr, "cell %s/%s/%llu failed: %s\n",
                             strategy_name(cells[i].strategy).c_str(),
                             cells[i].loss_name.c_str(),
                             static_cast<unsigned long long>(cells[i].seed), e.what());
            }
        }
    } else {
        // Cells run as independent processes; determinism is per-cell, so the
        // schedule cannot change any result.
        std::map<pid_t, std::size_t> running;
        std::size_t next = 0;
        auto reap = [&]() {
            int status = 0;
            const pid_t pid = waitpid(-1, &status, 0);
            if (pid <= 0) return;
            const auto it = running.find(pid);
            if (it == running.end()) return;
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
                statuses[it->second] = "failed: exit status " +
                                       std::to_string(WIFEXITED(status)
                                                          ? WEXITSTATUS(status)
                                                          : -1);
                any_failed = true;
            }
            running.erase(it);
        };
        while (next < cells.size() || !running.empty()) {
            while (next < cells.size() && running.size() < jobs) {
                const pid_t pid = fork();
                if (pid == 0) {
                    try {
                        run_cell(g, cells[next], data, options, scoring_threads);
                        _exit(0);
                    } catch (const std::exception& e) {
                        std::fprintf(stderr, "cell failed: %s\n", e.what());
                        _exit(1);
                    }
                }
                if (pid < 0) throw RunError("run_grid: fork failed");
                running[pid] = next++;
            }
            if (!running.empty()) reap();
        }
    }

    json manifest;
    manifest["artifact_version"] = artifact_version();
    manifest["config_hash"] = grid_config_hash(g);
    manifest["started_utc"] = started;
    manifest["finished_utc"] = iso_utc_now();
    manifest["seeds"] = g.seeds;
    json checks = json::object();
    for (const auto& [path, sum] : data.file_checksums) checks[path] = sum;
    manifest["dataset_checksums"] = checks;
    manifest["normalization"] = {{"mean", data.stats.mean},
                                 {"stddev", data.stats.stddev}};
    json cell_list = json::array();
    for (std::size_t i = 0; i < cells.size(); ++i)
        cell_list.push_back({{"strategy", strategy_name(cells[i].strategy)},
                             {"loss", cells[i].loss_name},
                             {"seed", cells[i].seed},
                             {"status", statuses[i]}});
    manifest["cells"] = cell_list;
    std::ofstream mf(fs::path(options.out_dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";

    return any_failed ? 1 : 0;
}

// ---------------------------------------------------------------------------
// chart
// ---------------------------------------------------------------------------

namespace {

struct CellSeries {
    std::string strategy;
    std::string loss;
    // cycle -> accuracies over seeds
    std::map<std::size_t, std::vector<double>> acc;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

const char* kPalette[] = {"#c02828", "#2855c0", "#28a028", "#b07818", "#7828b0",
                          "#18a0a0", "#c05898", "#607060", "#9a4818", "#283878"};

}  // namespace

void emit_chart(const std::string& results_dir, const std::string& out_svg) {
    std::map<std::pair<std::string, std::string>, CellSeries> series;
    if (!fs::is_directory(results_dir))
        throw UsageError("emit_chart: '" + results_dir + "' is not a directory");
    for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "cycles.csv")
            continue;
        std::ifstream f(entry.path());
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            const auto cols = split_csv_line(line);
            if (cols.size() < 6) continue;
            const std::size_t cycle = std::stoul(cols[0]);
            const std::string strategy = cols[2];
            const std::string loss = cols[3];
            const double acc = std::stod(cols[5]);
            auto& cs = series[{strategy, loss}];
            cs.strategy = strategy;
            cs.loss = loss;
            cs.acc[cycle].push_back(acc);
        }
    }
    if (series.empty())
        throw UsageError("emit_chart: no cycles.csv found under '" + results_dir + "'");

    // Plotted table CSV alongside the SVG.
    const fs::path svg_path(out_svg);
    fs::path table_path = svg_path;
    table_path.replace_extension(".csv");
    std::ofstream table(table_path);
    table << "strategy,loss,cycle,mean_accuracy,std_accuracy,seeds\n";

    double ymin = 1e300, ymax = -1e300;
    std::size_t max_cycle = 0;
    for (const auto& [key, cs] : series)
        for (const auto& [cycle, accs] : cs.acc) {
            max_cycle = std::max(max_cycle, cycle);
            const double m = mean_of(accs), sd = std_of(accs);
            ymin = std::min(ymin, m - sd);
            ymax = std::max(ymax, m + sd);
        }
    if (ymax <= ymin) {
        ymax = ymin + 1.0;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double width = 880, height = 560;
    const double ml = 70, mr = 230, mt = 40, mb = 60;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto xpos = [&](double cycle) {
        return ml + (max_cycle == 0 ? 0.5 : cycle / static_cast<double>(max_cycle)) * pw;
    };
    auto ypos = [&](double acc) { return mt + (1.0 - (acc - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
        << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"16\">Test accuracy by active-learning cycle</text>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
        << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    for (std::size_t c = 0; c <= max_cycle; ++c) {
        svg << "<text x=\"" << xpos(static_cast<double>(c)) << "\" y=\""
            << mt + ph + 22 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"12\">" << c << "</text>\n";
        svg << "<line x1=\"" << xpos(static_cast<double>(c)) << "\" y1=\"" << mt + ph
            << "\" x2=\"" << xpos(static_cast<double>(c)) << "\" y2=\"" << mt + ph + 5
            << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
           "cycle</text>\n";
    for (int i = 0; i <= 5; ++i) {
        const double acc = ymin + (ymax - ymin) * i / 5.0;
        char label[32];
        std::snprintf(label, sizeof label, "%.1f", acc);
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << ypos(acc) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
            << label << "</text>\n";
        svg << "<line x1=\"" << ml << "\" y1=\"" << ypos(acc) << "\" x2=\"" << ml + pw
            << "\" y2=\"" << ypos(acc) << "\" stroke=\"#dddddd\"/>\n";
    }

    std::size_t color = 0;
    double legend_y = mt + 10;
    for (const auto& [key, cs] : series) {
        const char* stroke = kPalette[color % (sizeof kPalette / sizeof *kPalette)];
        ++color;
        std::ostringstream pts, band_up, band_dn;
        bool any_band = false;
        for (const auto& [cycle, accs] : cs.acc) {
            const double m = mean_of(accs), sd = std_of(accs);
            table << cs.strategy << ',' << cs.loss << ',' << cycle << ','
                  << csv_num(m) << ',' << csv_num(sd) << ',' << accs.size() << "\n";
            pts << xpos(static_cast<double>(cycle)) << ',' << ypos(m) << ' ';
            band_up << xpos(static_cast<double>(cycle)) << ',' << ypos(m + sd) << ' ';
            band_dn << xpos(static_cast<double>(cycle)) << ',' << ypos(m - sd) << ' ';
            if (sd > 0.0) any_band = true;
        }
        if (any_band) {
            // band polygon: upper edge left->right then lower edge right->left
            std::vector<std::string> dn;
            std::stringstream ss(band_dn.str());
            std::string p;
            while (ss >> p) dn.push_back(p);
            svg << "<path d=\"M ";
            std::stringstream up(band_up.str());
            bool first = true;
            while (up >> p) {
                svg << (first ? "" : " L ") << p;
                first = false;
            }
            for (auto it = dn.rbegin(); it != dn.rend(); ++it) svg << " L " << *it;
            svg << " Z\" fill=\"" << stroke << "\" fill-opacity=\"0.12\" "
                   "stroke=\"none\"/>\n";
        }
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
            << stroke << "\" stroke-width=\"2\"/>\n";
        svg << "<rect x=\"" << ml + pw + 14 << "\" y=\"" << legend_y - 9
            << "\" width=\"14\" height=\"4\" fill=\"" << stroke << "\"/>\n";
        svg << "<text x=\"" << ml + pw + 34 << "\" y=\"" << legend_y
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << cs.strategy << "/"
            << cs.loss << "</text>\n";
        legend_y += 18;
    }
    svg << "</svg>\n";

    std::ofstream out(out_svg, std::ios::trunc);
    if (!out) throw UsageError("emit_chart: cannot write " + out_svg);
    out << svg.str();
}

}  // namespace augal
