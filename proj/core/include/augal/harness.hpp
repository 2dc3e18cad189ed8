// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "augal/loop.hpp"

namespace augal {

/// One Tables-style experiment grid: strategies x loss compositions x seeds
/// over a shared scenario base.
struct GridSpec {
    ScenarioConfig base;
    std::vector<Strategy> strategies;
    std::vector<std::string> loss_names;  // "task", "task+co", "task+cm", "task+co+cm"
    std::vector<std::uint64_t> seeds;

    std::size_t cell_count() const {
        return strategies.size() * loss_names.size() * seeds.size();
    }
};

/// Parses the documented JSON config tree. Unknown keys and invariant
/// violations are configuration errors naming the offending key.
GridSpec parse_config(const std::string& path);
GridSpec parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Bundled presets: "fashion-desk" (desk-scale run) and "paper-protocol"
/// (full-scale settings; long-running). Empty string if the name is unknown.
std::string preset_config(const std::string& name);

/// Canonical hash of the semantically meaningful grid fields; stable under
/// config-file key reordering.
std::string grid_config_hash(const GridSpec& grid);

/// LossConfig <-> composition name ("task", "task+co", ...).
LossConfig loss_config_from_name(const std::string& name, const LossConfig& base);

struct RunOptions {
    std::string out_dir = "results";
    std::string data_dir;                      // overrides config + env
    std::vector<std::uint64_t> seeds_override;  // overrides grid seeds
    unsigned jobs = 1;                          // parallel grid cells (processes)
    bool dump_scores = false;                   // per-cycle score CSVs
    bool dump_augment = false;                  // JSON-line augmentation audit
};

/// Loaded + normalized train/test pair with provenance for the manifest.
struct ResolvedDataset {
    Dataset train;
    Dataset test;
    ChannelStats stats;
    std::vector<std::pair<std::string, std::string>> file_checksums;  // path, fnv1a hex
};

ResolvedDataset resolve_dataset(const ScenarioConfig& config,
                                const std::string& data_dir);

/// Executes every grid cell, writing results/<strategy>/<loss>/<seed>/cycles.csv
/// plus results/manifest.json. Failed cells are recorded and the remaining
/// cells continue; returns nonzero if any cell failed.
int run_grid(const GridSpec& grid, const RunOptions& options);

/// SVG learning-curve chart (mean +- std over seeds per strategy/loss cell)
/// from a results tree; writes the plotted table as CSV alongside.
void emit_chart(const std::string& results_dir, const std::string& out_svg);

/// FNV-1a 64 over a byte string, hex-encoded. Used for config hashes and
/// dataset checksums.
std::string fnv1a_hex(const std::string& bytes);

const char* artifact_version();

/// The columns of every cycles.csv, fixed.
const char* cycles_csv_header();

}  // namespace augal
