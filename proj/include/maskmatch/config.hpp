#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/augment.hpp"
#include "maskmatch/losses.hpp"
#include "maskmatch/masking.hpp"
#include "maskmatch/pseudo.hpp"
#include "maskmatch/segnet.hpp"

namespace maskmatch {

// Which branches participate in training. The teacher is EMA-updated in
// every mode; evaluation always uses the teacher.
enum class TrainMode {
    kSupervisedOnly,  // labeled loss only
    kBaseline,        // + single-scale weak-to-strong with pseudo-label selection
    kBaselineMs,      // + multi-scale ensembling (pseudo labels and WS loss)
    kBaselineLcr,     // baseline + masked-branch consistency (single-scale pseudo)
    kFull,            // multi-scale + masked branch
};

TrainMode train_mode_from_string(const std::string& name);
std::string train_mode_name(TrainMode mode);
bool mode_uses_unlabeled(TrainMode mode);
bool mode_uses_multiscale(TrainMode mode);
bool mode_uses_lcr(TrainMode mode);

// What the masked branch optimizes: predicting segmentation labels or
// reconstructing the image through an auxiliary head.
enum class LcrTask { kLabelPredict, kReconstruct };
LcrTask lcr_task_from_string(const std::string& name);
std::string lcr_task_name(LcrTask task);

struct TrainConfig {
    std::string data_dir;
    std::string out_dir = "runs/out";

    ModelConfig model;  // num_classes is overwritten from the dataset manifest

    int batch_labeled = 8;
    int batch_unlabeled = 8;
    int epochs = 30;
    Real base_lr = 0.001;
    Real momentum = 0.9;
    Real weight_decay = 0.0005;
    Real tau = 0.90;
    Real ema_alpha = 0.999;

    WeakAugConfig weak;      // crop size is tied to the dataset extents
    StrongAugConfig strong;
    bool cutmix_enabled = true;
    CutMixConfig cutmix;

    MaskSpec mask{8, 0.7, MaskStrategy::kRandom};  // patch 8 on 64x64 images
    ScaleSet scales;
    PseudoAverage pseudo_average = PseudoAverage::kProbs;

    LossWeights weights;
    OhemConfig ohem;
    TrainMode mode = TrainMode::kFull;
    LcrRegion lcr_region = LcrRegion::kAll;
    LcrTask lcr_task = LcrTask::kLabelPredict;

    std::uint64_t seed = 1;
    int eval_every = 0;        // 0: evaluate only at the end
    int checkpoint_every = 0;  // 0: save only the final checkpoint
    bool diag_pseudo_acc = true;
    Real boundary_tol_frac = 0.0003;

    void validate() const;
};

// Flat key=value configuration text: one entry per line, '#' comments.
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);
void apply_config_text(TrainConfig& cfg, const std::string& text);
TrainConfig load_train_config(const std::string& path);
// entries of the form "key=value"
void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& entries);
std::string dump_config(const TrainConfig& cfg);

}  // namespace maskmatch
