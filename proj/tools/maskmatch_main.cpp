#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maskmatch/ablation.hpp"
#include "maskmatch/config.hpp"
#include "maskmatch/dataset.hpp"
#include "maskmatch/trainer.hpp"

namespace {

using namespace maskmatch;

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::istringstream is(csv);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw std::invalid_argument("--seeds: no seeds in '" + csv + "'");
    return seeds;
}

TrainConfig build_config(const std::string& config_path, const std::string& data_dir,
                         const std::string& out_dir, const std::string& mode,
                         std::int64_t seed, int epochs,
                         const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!mode.empty()) cfg.mode = train_mode_from_string(mode);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (epochs > 0) cfg.epochs = epochs;
    apply_overrides(cfg, overrides);
    if (cfg.data_dir.empty()) throw std::invalid_argument("train: data.dir is required");
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-supervised shapes segmentation trainer"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shapes dataset");
    std::string gen_out;
    int gen_classes = 4, gen_h = 64, gen_w = 64, gen_labeled = 20, gen_unlabeled = 200,
        gen_val = 50;
    std::uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--classes", gen_classes, "class count incl. background");
    gen->add_option("--height", gen_h, "image height");
    gen->add_option("--width", gen_w, "image width");
    gen->add_option("--labeled", gen_labeled, "labeled sample count");
    gen->add_option("--unlabeled", gen_unlabeled, "unlabeled sample count");
    gen->add_option("--val", gen_val, "validation sample count");
    gen->add_option("--seed", gen_seed, "generator seed");

    // train
    auto* train = app.add_subcommand("train", "train one configuration");
    std::string train_config, train_data, train_out, train_mode;
    std::int64_t train_seed = -1;
    int train_epochs = 0;
    std::vector<std::string> train_set;
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--data", train_data, "dataset directory");
    train->add_option("--out", train_out, "run output directory");
    train->add_option("--mode", train_mode,
                      "supervised_only|baseline|baseline_ms|baseline_lcr|full");
    train->add_option("--seed", train_seed, "training seed");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--set", train_set, "config override key=value (repeatable)");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with the teacher weights");
    std::string eval_ckpt, eval_data, eval_split = "val";
    double eval_tol = 0.0003;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "labeled|unlabeled|val");
    eval->add_option("--boundary-tol", eval_tol, "boundary tolerance fraction of the diagonal");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the ablation matrix");
    std::string ab_config, ab_data, ab_out, ab_seeds = "1,2,3", ab_study = "all";
    std::vector<std::string> ab_set;
    ablate->add_option("--config", ab_config, "base key=value config file");
    ablate->add_option("--data", ab_data, "shared dataset directory");
    ablate->add_option("--out", ab_out, "matrix output directory")->required();
    ablate->add_option("--seeds", ab_seeds, "comma-separated seeds");
    ablate->add_option("--study", ab_study, "components|tasks|strategies|all");
    ablate->add_option("--set", ab_set, "base config override key=value (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            DatasetManifest m = generate_dataset(gen_classes, gen_h, gen_w, gen_labeled,
                                                 gen_unlabeled, gen_val, gen_seed, gen_out);
            std::cout << "wrote " << (m.labeled_count + m.unlabeled_count + m.val_count)
                      << " samples (" << m.labeled_count << " labeled, " << m.unlabeled_count
                      << " unlabeled, " << m.val_count << " val) to " << gen_out << "\n";
        } else if (*train) {
            TrainConfig cfg = build_config(train_config, train_data, train_out, train_mode,
                                           train_seed, train_epochs, train_set);
            Trainer trainer(std::move(cfg));
            std::cout << "training " << train_mode_name(trainer.config().mode) << " for "
                      << trainer.total_iters() << " iterations\n";
            trainer.run();
        } else if (*eval) {
            DatasetManifest manifest = load_manifest(eval_data);
            MetricsRecord record = evaluate_checkpoint(eval_ckpt, manifest,
                                                       split_from_string(eval_split), eval_tol);
            std::cout << format_metrics_table(record);
        } else if (*ablate) {
            AblationConfig acfg;
            if (!ab_config.empty()) acfg.base = load_train_config(ab_config);
            if (!ab_data.empty()) acfg.base.data_dir = ab_data;
            acfg.base.out_dir = ab_out;
            apply_overrides(acfg.base, ab_set);
            acfg.seeds = parse_seed_list(ab_seeds);
            acfg.components = ab_study == "all" || ab_study == "components";
            acfg.masking_tasks = ab_study == "all" || ab_study == "tasks";
            acfg.mask_strategies = ab_study == "all" || ab_study == "strategies";
            if (!acfg.components && !acfg.masking_tasks && !acfg.mask_strategies) {
                throw std::invalid_argument("--study must be components|tasks|strategies|all");
            }
            AblationResults results = run_ablation(acfg);
            for (const auto& run : results.runs) {
                if (run.failed) return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
