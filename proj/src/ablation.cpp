#include "maskmatch/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "maskmatch/rng.hpp"
#include "maskmatch/trainer.hpp"

namespace fs = std::filesystem;

namespace maskmatch {

std::string hash_directory(const std::string& dir) {
    std::vector<std::string> rel_paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            rel_paths.push_back(fs::relative(entry.path(), dir).generic_string());
        }
    }
    std::sort(rel_paths.begin(), rel_paths.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const char* data, std::size_t size) {
        for (std::size_t i = 0; i < size; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& rel : rel_paths) {
        mix(rel.data(), rel.size());
        std::ifstream is(fs::path(dir) / rel, std::ios::binary);
        char buf[4096];
        while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
            mix(buf, static_cast<std::size_t>(is.gcount()));
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

MeanStd mean_std(const std::vector<Real>& values) {
    MeanStd r;
    r.count = static_cast<int>(values.size());
    if (values.empty()) return r;
    Real sum = 0.0;
    for (Real v : values) sum += v;
    r.mean = sum / static_cast<Real>(values.size());
    if (values.size() > 1) {
        Real sq = 0.0;
        for (Real v : values) sq += (v - r.mean) * (v - r.mean);
        r.stddev = std::sqrt(sq / static_cast<Real>(values.size() - 1));
    }
    return r;
}

std::vector<AblationRow> ablation_rows(const AblationConfig& config) {
    std::vector<AblationRow> rows;
    if (config.components) {
        rows.push_back({"components", "supervised_only", {"mode=supervised_only"},
                        false, false, false, false, false});
        rows.push_back({"components", "baseline", {"mode=baseline"},
                        true, true, true, false, false});
        rows.push_back({"components", "baseline+ms", {"mode=baseline_ms"},
                        true, true, true, true, false});
        rows.push_back({"components", "baseline+lcr", {"mode=baseline_lcr"},
                        true, true, true, false, true});
        rows.push_back({"components", "full", {"mode=full"},
                        true, true, true, true, true});
    }
    if (config.masking_tasks) {
        rows.push_back({"masking_task", "lp_unmasked",
                        {"mode=full", "lcr.task=label_prediction", "lcr.region=unmasked_only"},
                        true, true, true, true, true});
        rows.push_back({"masking_task", "lp_all",
                        {"mode=full", "lcr.task=label_prediction", "lcr.region=all"},
                        true, true, true, true, true});
        rows.push_back({"masking_task", "ir_all",
                        {"mode=full", "lcr.task=reconstruction", "model.recon_head=true"},
                        true, true, true, true, true});
    }
    if (config.mask_strategies) {
        rows.push_back({"mask_strategy", "random", {"mode=full", "mask.strategy=random"},
                        true, true, true, true, true});
        rows.push_back({"mask_strategy", "block", {"mode=full", "mask.strategy=block"},
                        true, true, true, true, true});
        rows.push_back({"mask_strategy", "grid", {"mode=full", "mask.strategy=grid"},
                        true, true, true, true, true});
    }
    return rows;
}

namespace {

std::string fmt2(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string check(bool on) { return on ? "x" : " "; }

}  // namespace

AblationResults run_ablation(const AblationConfig& config) {
    if (config.base.data_dir.empty()) {
        throw std::invalid_argument("ablate: base config needs data.dir");
    }
    AblationResults results;
    results.dataset_hash = hash_directory(config.base.data_dir);

    fs::create_directories(config.base.out_dir);
    const auto rows = ablation_rows(config);

    for (const auto& row : rows) {
        for (const auto seed : config.seeds) {
            AblationRunResult run;
            run.study = row.study;
            run.row = row.name;
            run.seed = seed;
            try {
                TrainConfig cfg = config.base;
                apply_overrides(cfg, row.overrides);
                cfg.seed = seed;
                cfg.out_dir = (fs::path(config.base.out_dir) /
                               ("run_" + row.study + "_" + row.name + "_s" + std::to_string(seed)))
                                  .string();
                Trainer trainer(std::move(cfg));
                MetricsRecord record = trainer.run();
                run.miou = record.iou.mean;
                run.boundary_f = record.boundary.f;
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
                std::cerr << "ablate: run " << row.name << " seed " << seed
                          << " FAILED: " << e.what() << "\n";
            }
            results.runs.push_back(std::move(run));
            std::cout << "ablate: " << row.study << "/" << row.name << " seed " << seed
                      << (results.runs.back().failed
                              ? " FAILED"
                              : " mIoU " + fmt2(100.0 * results.runs.back().miou) +
                                    " boundaryF " + fmt2(100.0 * results.runs.back().boundary_f))
                      << "\n";
        }
    }

    // results.csv
    {
        std::ofstream csv(fs::path(config.base.out_dir) / "results.csv");
        csv << "study,row,seed,status,miou,boundary_f\n";
        for (const auto& run : results.runs) {
            csv << run.study << "," << run.row << "," << run.seed << ","
                << (run.failed ? "FAILED" : "ok") << ",";
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g", run.miou, run.boundary_f);
            csv << buf << "\n";
        }
    }

    // formatted table; component columns follow the MT WS PS MS LCR layout
    std::ostringstream table;
    table << "dataset " << config.base.data_dir << " (hash " << results.dataset_hash << "), "
          << config.seeds.size() << " seeds, metrics in %\n\n";
    for (const char* study : {"components", "masking_task", "mask_strategy"}) {
        bool any = false;
        for (const auto& row : rows) any = any || row.study == study;
        if (!any) continue;
        table << "[" << study << "]\n";
        table << "  row              | MT WS PS MS LCR | mIoU           | F-score(Boundary)\n";
        table << "  -----------------+-----------------+----------------+------------------\n";
        for (const auto& row : rows) {
            if (row.study != study) continue;
            std::vector<Real> mious, fs_;
            bool failed = false;
            for (const auto& run : results.runs) {
                if (run.study != row.study || run.row != row.name) continue;
                if (run.failed) {
                    failed = true;
                    continue;
                }
                mious.push_back(run.miou * 100.0);
                fs_.push_back(run.boundary_f * 100.0);
            }
            const MeanStd m = mean_std(mious);
            const MeanStd f = mean_std(fs_);
            char line[256];
            if (mious.empty()) {
                std::snprintf(line, sizeof(line),
                              "  %-16s |  %s  %s  %s  %s  %s  | FAILED         | FAILED",
                              row.name.c_str(), check(row.mt).c_str(), check(row.ws).c_str(),
                              check(row.ps).c_str(), check(row.ms).c_str(),
                              check(row.lcr).c_str());
            } else {
                std::snprintf(line, sizeof(line),
                              "  %-16s |  %s  %s  %s  %s  %s  | %6.2f +- %-5.2f | %6.2f +- %-5.2f%s",
                              row.name.c_str(), check(row.mt).c_str(), check(row.ws).c_str(),
                              check(row.ps).c_str(), check(row.ms).c_str(), check(row.lcr).c_str(),
                              m.mean, m.stddev, f.mean, f.stddev,
                              failed ? "  (some seeds FAILED)" : "");
            }
            table << line << "\n";
        }
        table << "\n";
    }
    results.table_text = table.str();

    std::ofstream table_out(fs::path(config.base.out_dir) / "results_table.txt");
    table_out << results.table_text;
    std::cout << results.table_text;
    return results;
}

}  // namespace maskmatch
