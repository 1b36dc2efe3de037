#include "maskmatch/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "maskmatch/losses.hpp"
#include "maskmatch/rng.hpp"

namespace fs = std::filesystem;

namespace maskmatch {

Real poly_lr(Real base_lr, std::int64_t iter, std::int64_t max_iter) {
    if (iter < 0 || max_iter < 1) {
        throw std::invalid_argument("poly_lr: need 0 <= iter and max_iter >= 1");
    }
    if (iter > max_iter) {
        std::cerr << "poly_lr: iter " << iter << " beyond max_iter " << max_iter
                  << ", clamping lr to 0\n";
        return 0.0;
    }
    const Real frac = 1.0 - static_cast<Real>(iter) / static_cast<Real>(max_iter);
    return base_lr * std::pow(frac, 0.9);
}

void Trainer::Sampler::init(std::int64_t count, std::uint64_t seed_, std::string tag_) {
    order.resize(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    cursor = 0;
    pass = 0;
    seed = seed_;
    tag = std::move(tag_);
    shuffle();
}

void Trainer::Sampler::shuffle() {
    Rng rng = Rng::stream(seed, tag, pass);
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(order[i - 1], order[j]);
    }
}

std::vector<std::int64_t> Trainer::Sampler::next(int count) {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        if (cursor >= order.size()) {
            ++pass;
            cursor = 0;
            shuffle();
        }
        out.push_back(order[cursor++]);
    }
    return out;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
    manifest_ = load_manifest(config_.data_dir);
    config_.model.num_classes = manifest_.classes;
    config_.model.seed = config_.seed;
    config_.weak.crop_h = manifest_.height;
    config_.weak.crop_w = manifest_.width;
    if (config_.lcr_task == LcrTask::kReconstruct && mode_uses_lcr(config_.mode)) {
        config_.model.recon_head = true;
    }
    config_.validate();

    labeled_ = load_split(manifest_, Split::kLabeled);
    unlabeled_ = load_split(manifest_, Split::kUnlabeled);
    val_ = load_split(manifest_, Split::kVal);
    if (labeled_.empty()) throw std::runtime_error("trainer: labeled split is empty");

    if (config_.diag_pseudo_acc) {
        withheld_labels_.reserve(unlabeled_.size());
        for (const auto& s : unlabeled_) {
            withheld_labels_.push_back(load_withheld_label(manifest_, s.id));
        }
    }

    student_.config = config_.model;
    student_.params = init_model(config_.model);
    teacher_ = make_teacher(student_.params, config_.ema_alpha);

    labeled_sampler_.init(static_cast<std::int64_t>(labeled_.size()), config_.seed,
                          "labeled_order");
    unlabeled_sampler_.init(static_cast<std::int64_t>(unlabeled_.size()), config_.seed,
                            "unlabeled_order");

    // One epoch walks the unlabeled split once (when it exists), so every
    // mode trains for the same number of iterations on the same dataset.
    const std::int64_t per_epoch =
        !unlabeled_.empty()
            ? (static_cast<std::int64_t>(unlabeled_.size()) + config_.batch_unlabeled - 1) /
                  config_.batch_unlabeled
            : (static_cast<std::int64_t>(labeled_.size()) + config_.batch_labeled - 1) /
                  config_.batch_labeled;
    total_iters_ = per_epoch * config_.epochs;
}

IterationTrace Trainer::train_step() {
    const auto t0 = std::chrono::steady_clock::now();
    IterationTrace trace;
    trace.step = step_;
    trace.lr = poly_lr(config_.base_lr, step_, total_iters_);

    // (1) weakly augmented labeled batch -> supervised loss
    const auto labeled_ids = labeled_sampler_.next(config_.batch_labeled);
    std::vector<Image> labeled_images;
    std::vector<std::int32_t> labels;
    labeled_images.reserve(labeled_ids.size());
    for (std::size_t slot = 0; slot < labeled_ids.size(); ++slot) {
        Rng rng = Rng::stream(config_.seed, "weak_labeled", static_cast<std::uint64_t>(step_),
                              slot);
        auto [aug, rec] =
            weak_augment(labeled_[static_cast<std::size_t>(labeled_ids[slot])], config_.weak, rng);
        labeled_images.push_back(std::move(aug.image));
        for (auto v : *aug.label) labels.push_back(v);
    }
    Tensor labeled_tensor = images_to_tensor(labeled_images);
    Tensor loss_labeled = supervised_loss(student_, labeled_tensor, labels, config_.ohem);
    trace.loss_labeled = loss_labeled.item();

    Tensor loss_ws, loss_lcr;
    const bool use_unlabeled = mode_uses_unlabeled(config_.mode) && !unlabeled_.empty();
    if (use_unlabeled) {
        // (2) weak augmentation of the unlabeled batch + teacher pseudo-labels
        const auto unlabeled_ids = unlabeled_sampler_.next(config_.batch_unlabeled);
        std::vector<Image> weak_images;
        std::vector<WeakAugRecord> records;
        weak_images.reserve(unlabeled_ids.size());
        for (std::size_t slot = 0; slot < unlabeled_ids.size(); ++slot) {
            Rng rng = Rng::stream(config_.seed, "weak_unlabeled",
                                  static_cast<std::uint64_t>(step_), slot);
            auto [aug, rec] = weak_augment(unlabeled_[static_cast<std::size_t>(unlabeled_ids[slot])],
                                           config_.weak, rng);
            weak_images.push_back(std::move(aug.image));
            records.push_back(rec);
        }
        Tensor weak_tensor = images_to_tensor(weak_images);

        SegNet teacher_net{config_.model, teacher_.params};
        PseudoLabel pseudo =
            mode_uses_multiscale(config_.mode)
                ? multiscale_pseudo(teacher_net, weak_tensor, config_.scales, config_.tau,
                                    config_.pseudo_average)
                : single_scale_pseudo(teacher_net, weak_tensor, config_.tau);
        trace.valid_ratio = pseudo.valid_ratio();

        if (config_.diag_pseudo_acc) {
            std::vector<std::uint8_t> gt;
            gt.reserve(pseudo.classes.size());
            for (std::size_t slot = 0; slot < unlabeled_ids.size(); ++slot) {
                SegSample with_label = unlabeled_[static_cast<std::size_t>(unlabeled_ids[slot])];
                with_label.label = withheld_labels_[static_cast<std::size_t>(unlabeled_ids[slot])];
                SegSample transformed = replay_weak_augment(with_label, records[slot]);
                gt.insert(gt.end(), transformed.label->begin(), transformed.label->end());
            }
            trace.pseudo_acc = pseudo_accuracy(pseudo, gt).accuracy_valid;
        }

        // (3) strong branch (photometric + CutMix) -> weak-to-strong loss
        std::vector<Image> strong_images;
        strong_images.reserve(weak_images.size());
        for (std::size_t slot = 0; slot < weak_images.size(); ++slot) {
            Rng rng = Rng::stream(config_.seed, "strong_unlabeled",
                                  static_cast<std::uint64_t>(step_), slot);
            strong_images.push_back(strong_augment(weak_images[slot], config_.strong, rng));
        }
        PseudoLabel pseudo_ws = pseudo;
        if (config_.cutmix_enabled) {
            Rng rng = Rng::stream(config_.seed, "cutmix", static_cast<std::uint64_t>(step_));
            cutmix_batch(strong_images, pseudo_ws, config_.cutmix, rng);
        }
        Tensor strong_tensor = images_to_tensor(strong_images);
        if (mode_uses_multiscale(config_.mode)) {
            loss_ws = msws_loss(student_, strong_tensor, pseudo_ws, config_.scales);
        } else {
            loss_ws = masked_ce(student_.forward(strong_tensor), pseudo_ws);
        }
        trace.loss_ws = loss_ws.item();

        // (4) masked branch against the same step's (unmixed) pseudo-labels
        if (mode_uses_lcr(config_.mode)) {
            std::vector<PatchMask> masks;
            masks.reserve(weak_images.size());
            for (std::size_t slot = 0; slot < weak_images.size(); ++slot) {
                Rng rng = Rng::stream(config_.seed, "patch_mask",
                                      static_cast<std::uint64_t>(step_), slot);
                masks.push_back(generate_mask(manifest_.height, manifest_.width, config_.mask, rng));
            }
            if (config_.lcr_task == LcrTask::kReconstruct) {
                loss_lcr = reconstruction_loss(student_, weak_tensor, masks);
            } else {
                loss_lcr = lcr_loss(student_, weak_tensor, masks, pseudo, config_.lcr_region);
            }
            trace.loss_lcr = loss_lcr.item();
        }
    }

    // (5) total objective, backprop, SGD with poly lr
    const ObjectiveMode objective = config_.mode == TrainMode::kBaseline
                                        ? ObjectiveMode::kBaseline
                                        : ObjectiveMode::kMaskMatch;
    Tensor total = total_loss(config_.weights, objective, loss_labeled, loss_ws, loss_lcr);
    trace.loss_total = total.item();
    backward(total);
    sgd_momentum_step(student_.params, trace.lr, config_.momentum, config_.weight_decay);

    // (6) teacher follows the student
    ema_update(teacher_, student_.params);

    ++step_;
    trace.wall_ms = std::chrono::duration<Real, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
    return trace;
}

namespace {

std::string fmt_real(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string metrics_csv_header(int num_classes) {
    std::ostringstream os;
    os << "step,split,pixel_acc,miou,boundary_precision,boundary_recall,boundary_f";
    for (int c = 0; c < num_classes; ++c) os << ",iou_class" << c;
    return os.str();
}

std::string metrics_csv_row(const MetricsRecord& r) {
    std::ostringstream os;
    os << r.step << "," << r.split << "," << fmt_real(r.pixel_acc) << "," << fmt_real(r.iou.mean)
       << "," << fmt_real(r.boundary.precision) << "," << fmt_real(r.boundary.recall) << ","
       << fmt_real(r.boundary.f);
    for (std::size_t c = 0; c < r.iou.per_class.size(); ++c) {
        os << ",";
        if (r.iou.present[c]) {
            os << fmt_real(r.iou.per_class[c]);
        } else {
            os << "absent";
        }
    }
    return os.str();
}

std::string format_metrics_table(const MetricsRecord& r) {
    std::ostringstream os;
    os << "split " << r.split << " @ step " << r.step << "\n";
    os << "  pixel accuracy : " << fmt_real(r.pixel_acc) << "\n";
    os << "  mIoU           : " << fmt_real(r.iou.mean) << "\n";
    for (std::size_t c = 0; c < r.iou.per_class.size(); ++c) {
        os << "    class " << c << " IoU : ";
        if (r.iou.present[c]) {
            os << fmt_real(r.iou.per_class[c]);
        } else {
            os << "absent";
        }
        os << "\n";
    }
    os << "  boundary P/R/F : " << fmt_real(r.boundary.precision) << " / "
       << fmt_real(r.boundary.recall) << " / " << fmt_real(r.boundary.f) << "\n";
    return os.str();
}

MetricsRecord evaluate_params(const SegNet& net, const DatasetManifest& manifest,
                              const std::vector<SegSample>& samples, Split split,
                              std::int64_t step, Real boundary_tol_frac) {
    if (samples.empty()) {
        throw std::invalid_argument("evaluate: split '" + split_name(split) + "' is empty");
    }
    NoGradGuard no_grad;
    ConfusionMatrix cm(manifest.classes);
    BoundaryCounts boundary;
    const int batch = 8;
    const std::int64_t hw = static_cast<std::int64_t>(manifest.height) * manifest.width;
    for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
        const std::size_t end = std::min(samples.size(), begin + batch);
        std::vector<Image> images;
        images.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) images.push_back(samples[i].image);
        Tensor probs = softmax_channels(net.forward(images_to_tensor(images)));
        std::vector<std::int32_t> classes;
        std::vector<Real> conf;
        argmax_channels(probs, classes, conf);
        for (std::size_t i = begin; i < end; ++i) {
            if (!samples[i].label) {
                throw std::logic_error("evaluate: sample " + samples[i].id + " has no label");
            }
            std::vector<std::int32_t> pred(
                classes.begin() + static_cast<std::ptrdiff_t>((i - begin) * hw),
                classes.begin() + static_cast<std::ptrdiff_t>((i - begin + 1) * hw));
            const auto gt = widen_labels(*samples[i].label);
            accumulate_confusion(cm, pred, gt);
            boundary.merge(boundary_match_counts(pred, gt, manifest.height, manifest.width,
                                                 manifest.classes, boundary_tol_frac));
        }
    }
    MetricsRecord record;
    record.split = split_name(split);
    record.step = step;
    record.pixel_acc = pixel_accuracy(cm);
    record.iou = miou(cm);
    record.boundary = boundary_score(boundary);
    return record;
}

MetricsRecord Trainer::evaluate_split(Split split) const {
    const std::vector<SegSample>* samples = nullptr;
    std::vector<SegSample> withheld;
    switch (split) {
        case Split::kLabeled: samples = &labeled_; break;
        case Split::kVal: samples = &val_; break;
        case Split::kUnlabeled: {
            withheld = unlabeled_;
            for (auto& s : withheld) s.label = load_withheld_label(manifest_, s.id);
            samples = &withheld;
            break;
        }
    }
    SegNet teacher_net{config_.model, teacher_.params};
    return evaluate_params(teacher_net, manifest_, *samples, split, step_,
                           config_.boundary_tol_frac);
}

MetricsRecord Trainer::run() {
    fs::create_directories(config_.out_dir);
    fs::create_directories(fs::path(config_.out_dir) / "checkpoints");

    {
        std::ofstream cfg_out(fs::path(config_.out_dir) / "config_used.cfg");
        cfg_out << dump_config(config_);
    }

    std::ofstream trace_csv(fs::path(config_.out_dir) / "trace.csv");
    trace_csv << "iter,lr,L_labeled,L_msws,L_lcr,valid_ratio,pseudo_acc,wall_ms\n";
    std::ofstream metrics_csv(fs::path(config_.out_dir) / "metrics.csv");
    metrics_csv << metrics_csv_header(manifest_.classes) << "\n";

    MetricsRecord last;
    for (std::int64_t i = 0; i < total_iters_; ++i) {
        IterationTrace t = train_step();
        trace_csv << t.step << "," << fmt_real(t.lr) << "," << fmt_real(t.loss_labeled) << ","
                  << fmt_real(t.loss_ws) << "," << fmt_real(t.loss_lcr) << ","
                  << fmt_real(t.valid_ratio) << "," << fmt_real(t.pseudo_acc) << ","
                  << fmt_real(t.wall_ms) << "\n";
        const bool last_iter = (i + 1 == total_iters_);
        if (config_.eval_every > 0 && step_ % config_.eval_every == 0 && !last_iter) {
            MetricsRecord r = evaluate_split(Split::kVal);
            metrics_csv << metrics_csv_row(r) << "\n";
        }
        if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0 && !last_iter) {
            save_checkpoint((fs::path(config_.out_dir) / "checkpoints" /
                             ("step_" + std::to_string(step_) + ".bin"))
                                .string(),
                            config_.model, student_.params, teacher_);
        }
    }

    last = evaluate_split(Split::kVal);
    metrics_csv << metrics_csv_row(last) << "\n";
    save_checkpoint((fs::path(config_.out_dir) / "checkpoints" /
                     ("step_" + std::to_string(step_) + ".bin"))
                        .string(),
                    config_.model, student_.params, teacher_);
    std::cout << format_metrics_table(last);
    return last;
}

MetricsRecord evaluate_checkpoint(const std::string& checkpoint_path,
                                  const DatasetManifest& manifest, Split split,
                                  Real boundary_tol_frac) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.config.num_classes != manifest.classes) {
        throw std::runtime_error("evaluate: checkpoint has " +
                                 std::to_string(ckpt.config.num_classes) +
                                 " classes, dataset has " + std::to_string(manifest.classes));
    }
    std::vector<SegSample> samples = load_split(manifest, split);
    if (split == Split::kUnlabeled) {
        for (auto& s : samples) s.label = load_withheld_label(manifest, s.id);
    }
    SegNet teacher_net{ckpt.config, ckpt.teacher.params};
    return evaluate_params(teacher_net, manifest, samples, split, ckpt.teacher.step,
                           boundary_tol_frac);
}

}  // namespace maskmatch
