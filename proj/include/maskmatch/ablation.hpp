#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/config.hpp"

namespace maskmatch {

// One row of the ablation matrix: a name, the config overrides that realize
// it, and the component flags (mean teacher, weak-to-strong, pseudo-label
// selection, multi-scale, local consistency) used in the formatted table.
struct AblationRow {
    std::string study;
    std::string name;
    std::vector<std::string> overrides;  // key=value
    bool mt = false, ws = false, ps = false, ms = false, lcr = false;
};

struct AblationConfig {
    TrainConfig base;                           // data_dir and out_dir are required
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    bool components = true;      // supervised / baseline / +MS / +LCR / full
    bool masking_tasks = true;   // LP-unmasked / LP-all / IR
    bool mask_strategies = true; // random / block / grid
};

struct AblationRunResult {
    std::string study;
    std::string row;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    Real miou = 0.0;
    Real boundary_f = 0.0;
};

struct AblationResults {
    std::vector<AblationRunResult> runs;
    std::string dataset_hash;
    std::string table_text;
};

std::vector<AblationRow> ablation_rows(const AblationConfig& config);

// Runs every (row, seed) pair on the shared dataset; a failing run is marked
// FAILED and the matrix continues. Writes results.csv and results_table.txt
// under base.out_dir.
AblationResults run_ablation(const AblationConfig& config);

// FNV-1a over sorted relative paths and file bytes.
std::string hash_directory(const std::string& dir);

struct MeanStd {
    Real mean = 0.0;
    Real stddev = 0.0;
    int count = 0;
};
MeanStd mean_std(const std::vector<Real>& values);

}  // namespace maskmatch
