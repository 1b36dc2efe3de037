#include "maskmatch/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace maskmatch {

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "supervised_only") return TrainMode::kSupervisedOnly;
    if (name == "baseline") return TrainMode::kBaseline;
    if (name == "baseline_ms") return TrainMode::kBaselineMs;
    if (name == "baseline_lcr") return TrainMode::kBaselineLcr;
    if (name == "full") return TrainMode::kFull;
    throw std::invalid_argument(
        "unknown mode '" + name +
        "' (supervised_only|baseline|baseline_ms|baseline_lcr|full)");
}

std::string train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::kSupervisedOnly: return "supervised_only";
        case TrainMode::kBaseline: return "baseline";
        case TrainMode::kBaselineMs: return "baseline_ms";
        case TrainMode::kBaselineLcr: return "baseline_lcr";
        case TrainMode::kFull: return "full";
    }
    return "?";
}

bool mode_uses_unlabeled(TrainMode mode) { return mode != TrainMode::kSupervisedOnly; }

bool mode_uses_multiscale(TrainMode mode) {
    return mode == TrainMode::kBaselineMs || mode == TrainMode::kFull;
}

bool mode_uses_lcr(TrainMode mode) {
    return mode == TrainMode::kBaselineLcr || mode == TrainMode::kFull;
}

LcrTask lcr_task_from_string(const std::string& name) {
    if (name == "label_prediction") return LcrTask::kLabelPredict;
    if (name == "reconstruction") return LcrTask::kReconstruct;
    throw std::invalid_argument("unknown lcr task '" + name +
                                "' (label_prediction|reconstruction)");
}

std::string lcr_task_name(LcrTask task) {
    return task == LcrTask::kLabelPredict ? "label_prediction" : "reconstruction";
}

void TrainConfig::validate() const {
    model.validate();
    weights.validate();
    scales.validate();
    if (batch_labeled < 1) throw std::invalid_argument("config: batch_labeled must be >= 1");
    if (batch_unlabeled < 1) throw std::invalid_argument("config: batch_unlabeled must be >= 1");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("config: tau must be in [0,1]");
    if (ema_alpha < 0.0 || ema_alpha > 1.0) {
        throw std::invalid_argument("config: ema_alpha must be in [0,1]");
    }
    if (mask.ratio < 0.0 || mask.ratio > 1.0) {
        throw std::invalid_argument("config: mask.ratio must be in [0,1]");
    }
    if (lcr_task == LcrTask::kReconstruct && mode_uses_lcr(mode) && !model.recon_head) {
        throw std::invalid_argument(
            "config: lcr.task=reconstruction requires model.recon_head=true");
    }
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: expected boolean, got '" + v + "'");
}

int parse_int(const std::string& v) { return std::stoi(v); }
Real parse_real(const std::string& v) { return std::stod(v); }
std::uint64_t parse_u64(const std::string& v) { return std::stoull(v); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data.dir") cfg.data_dir = value;
    else if (key == "out.dir") cfg.out_dir = value;
    else if (key == "model.in_channels") cfg.model.in_channels = parse_int(value);
    else if (key == "model.classes") cfg.model.num_classes = parse_int(value);
    else if (key == "model.base_width") cfg.model.base_width = parse_int(value);
    else if (key == "model.depth") cfg.model.depth = parse_int(value);
    else if (key == "model.recon_head") cfg.model.recon_head = parse_bool(value);
    else if (key == "train.batch_labeled") cfg.batch_labeled = parse_int(value);
    else if (key == "train.batch_unlabeled") cfg.batch_unlabeled = parse_int(value);
    else if (key == "train.epochs") cfg.epochs = parse_int(value);
    else if (key == "train.base_lr") cfg.base_lr = parse_real(value);
    else if (key == "train.momentum") cfg.momentum = parse_real(value);
    else if (key == "train.weight_decay") cfg.weight_decay = parse_real(value);
    else if (key == "train.tau") cfg.tau = parse_real(value);
    else if (key == "train.ema_alpha") cfg.ema_alpha = parse_real(value);
    else if (key == "aug.scale_min") cfg.weak.scale_min = parse_real(value);
    else if (key == "aug.scale_max") cfg.weak.scale_max = parse_real(value);
    else if (key == "aug.flip_prob") cfg.weak.flip_prob = parse_real(value);
    else if (key == "aug.jitter_prob") cfg.strong.jitter_prob = parse_real(value);
    else if (key == "aug.jitter_min") cfg.strong.jitter_min = parse_real(value);
    else if (key == "aug.jitter_max") cfg.strong.jitter_max = parse_real(value);
    else if (key == "aug.grayscale_prob") cfg.strong.grayscale_prob = parse_real(value);
    else if (key == "aug.blur_prob") cfg.strong.blur_prob = parse_real(value);
    else if (key == "aug.blur_sigma_min") cfg.strong.blur_sigma_min = parse_real(value);
    else if (key == "aug.blur_sigma_max") cfg.strong.blur_sigma_max = parse_real(value);
    else if (key == "cutmix.enabled") cfg.cutmix_enabled = parse_bool(value);
    else if (key == "cutmix.prob") cfg.cutmix.prob = parse_real(value);
    else if (key == "cutmix.area_min") cfg.cutmix.area_min = parse_real(value);
    else if (key == "cutmix.area_max") cfg.cutmix.area_max = parse_real(value);
    else if (key == "mask.patch_size") cfg.mask.patch_size = parse_int(value);
    else if (key == "mask.ratio") cfg.mask.ratio = parse_real(value);
    else if (key == "mask.strategy") cfg.mask.strategy = mask_strategy_from_string(value);
    else if (key == "scales.sigma1") cfg.scales.sigma1 = parse_real(value);
    else if (key == "scales.sigma2") cfg.scales.sigma2 = parse_real(value);
    else if (key == "pseudo.average") cfg.pseudo_average = pseudo_average_from_string(value);
    else if (key == "loss.lambda") cfg.weights.lambda = parse_real(value);
    else if (key == "loss.lambda1") cfg.weights.lambda1 = parse_real(value);
    else if (key == "loss.lambda2") cfg.weights.lambda2 = parse_real(value);
    else if (key == "ohem.enabled") cfg.ohem.enabled = parse_bool(value);
    else if (key == "ohem.keep_ratio") cfg.ohem.keep_ratio = parse_real(value);
    else if (key == "ohem.min_kept") cfg.ohem.min_kept = parse_int(value);
    else if (key == "mode") cfg.mode = train_mode_from_string(value);
    else if (key == "lcr.region") cfg.lcr_region = lcr_region_from_string(value);
    else if (key == "lcr.task") cfg.lcr_task = lcr_task_from_string(value);
    else if (key == "seed") cfg.seed = parse_u64(value);
    else if (key == "eval.every") cfg.eval_every = parse_int(value);
    else if (key == "checkpoint.every") cfg.checkpoint_every = parse_int(value);
    else if (key == "diag.pseudo_acc") cfg.diag_pseudo_acc = parse_bool(value);
    else if (key == "metrics.boundary_tol") cfg.boundary_tol_frac = parse_real(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void apply_config_text(TrainConfig& cfg, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value: '" + line + "'");
        }
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    TrainConfig cfg;
    apply_config_text(cfg, buf.str());
    return cfg;
}

void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& entries) {
    for (const auto& entry : entries) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: override '" + entry + "' is not key=value");
        }
        apply_config_entry(cfg, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
    }
}

std::string dump_config(const TrainConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "data.dir=" << cfg.data_dir << "\n";
    os << "out.dir=" << cfg.out_dir << "\n";
    os << "model.in_channels=" << cfg.model.in_channels << "\n";
    os << "model.classes=" << cfg.model.num_classes << "\n";
    os << "model.base_width=" << cfg.model.base_width << "\n";
    os << "model.depth=" << cfg.model.depth << "\n";
    os << "model.recon_head=" << (cfg.model.recon_head ? "true" : "false") << "\n";
    os << "train.batch_labeled=" << cfg.batch_labeled << "\n";
    os << "train.batch_unlabeled=" << cfg.batch_unlabeled << "\n";
    os << "train.epochs=" << cfg.epochs << "\n";
    os << "train.base_lr=" << cfg.base_lr << "\n";
    os << "train.momentum=" << cfg.momentum << "\n";
    os << "train.weight_decay=" << cfg.weight_decay << "\n";
    os << "train.tau=" << cfg.tau << "\n";
    os << "train.ema_alpha=" << cfg.ema_alpha << "\n";
    os << "aug.scale_min=" << cfg.weak.scale_min << "\n";
    os << "aug.scale_max=" << cfg.weak.scale_max << "\n";
    os << "aug.flip_prob=" << cfg.weak.flip_prob << "\n";
    os << "aug.jitter_prob=" << cfg.strong.jitter_prob << "\n";
    os << "aug.jitter_min=" << cfg.strong.jitter_min << "\n";
    os << "aug.jitter_max=" << cfg.strong.jitter_max << "\n";
    os << "aug.grayscale_prob=" << cfg.strong.grayscale_prob << "\n";
    os << "aug.blur_prob=" << cfg.strong.blur_prob << "\n";
    os << "aug.blur_sigma_min=" << cfg.strong.blur_sigma_min << "\n";
    os << "aug.blur_sigma_max=" << cfg.strong.blur_sigma_max << "\n";
    os << "cutmix.enabled=" << (cfg.cutmix_enabled ? "true" : "false") << "\n";
    os << "cutmix.prob=" << cfg.cutmix.prob << "\n";
    os << "cutmix.area_min=" << cfg.cutmix.area_min << "\n";
    os << "cutmix.area_max=" << cfg.cutmix.area_max << "\n";
    os << "mask.patch_size=" << cfg.mask.patch_size << "\n";
    os << "mask.ratio=" << cfg.mask.ratio << "\n";
    os << "mask.strategy=" << mask_strategy_name(cfg.mask.strategy) << "\n";
    os << "scales.sigma1=" << cfg.scales.sigma1 << "\n";
    os << "scales.sigma2=" << cfg.scales.sigma2 << "\n";
    os << "pseudo.average="
       << (cfg.pseudo_average == PseudoAverage::kProbs ? "probs" : "logits") << "\n";
    os << "loss.lambda=" << cfg.weights.lambda << "\n";
    os << "loss.lambda1=" << cfg.weights.lambda1 << "\n";
    os << "loss.lambda2=" << cfg.weights.lambda2 << "\n";
    os << "ohem.enabled=" << (cfg.ohem.enabled ? "true" : "false") << "\n";
    os << "ohem.keep_ratio=" << cfg.ohem.keep_ratio << "\n";
    os << "ohem.min_kept=" << cfg.ohem.min_kept << "\n";
    os << "mode=" << train_mode_name(cfg.mode) << "\n";
    os << "lcr.region=" << (cfg.lcr_region == LcrRegion::kAll ? "all" : "unmasked_only") << "\n";
    os << "lcr.task=" << lcr_task_name(cfg.lcr_task) << "\n";
    os << "seed=" << cfg.seed << "\n";
    os << "eval.every=" << cfg.eval_every << "\n";
    os << "checkpoint.every=" << cfg.checkpoint_every << "\n";
    os << "diag.pseudo_acc=" << (cfg.diag_pseudo_acc ? "true" : "false") << "\n";
    os << "metrics.boundary_tol=" << cfg.boundary_tol_frac << "\n";
    return os.str();
}

}  // namespace maskmatch
