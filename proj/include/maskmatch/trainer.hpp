#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/config.hpp"
#include "maskmatch/dataset.hpp"
#include "maskmatch/metrics.hpp"
#include "maskmatch/segnet.hpp"

namespace maskmatch {

// lr_base * (1 - iter/max_iter)^0.9; iterations past max_iter clamp to 0
// with a warning on stderr.
Real poly_lr(Real base_lr, std::int64_t iter, std::int64_t max_iter);

struct IterationTrace {
    std::int64_t step = 0;
    Real lr = 0.0;
    Real loss_total = 0.0;
    Real loss_labeled = 0.0;
    Real loss_ws = 0.0;   // single-scale consistency in baseline mode, MSWS otherwise
    Real loss_lcr = 0.0;  // label-prediction or reconstruction, per config
    Real valid_ratio = 0.0;
    Real pseudo_acc = -1.0;  // agreement on valid pixels; -1 when diagnostics off
    Real wall_ms = 0.0;
};

class Trainer {
public:
    explicit Trainer(TrainConfig config);

    IterationTrace train_step();

    // Full loop: trace.csv per iteration, metrics.csv per evaluation,
    // checkpoints/step_<n>.bin, and a final summary on stdout.
    MetricsRecord run();

    MetricsRecord evaluate_split(Split split) const;

    std::int64_t step() const { return step_; }
    std::int64_t total_iters() const { return total_iters_; }
    const TrainConfig& config() const { return config_; }
    const SegNet& student() const { return student_; }
    SegNet& student() { return student_; }
    const TeacherState& teacher() const { return teacher_; }
    const DatasetManifest& manifest() const { return manifest_; }

    // Cycles through a shuffled index order, reshuffling per pass.
    struct Sampler {
        std::vector<std::int64_t> order;
        std::size_t cursor = 0;
        std::uint64_t pass = 0;
        std::uint64_t seed = 0;
        std::string tag;

        void init(std::int64_t count, std::uint64_t seed, std::string tag);
        std::vector<std::int64_t> next(int count);

    private:
        void shuffle();
    };

private:
    IterationTrace supervised_part(IterationTrace trace, Tensor& loss_labeled);
    void evaluate_and_log(std::ostream& metrics_csv, std::int64_t step);

    TrainConfig config_;
    DatasetManifest manifest_;
    std::vector<SegSample> labeled_;
    std::vector<SegSample> unlabeled_;
    std::vector<std::vector<std::uint8_t>> withheld_labels_;  // diagnostics only
    std::vector<SegSample> val_;

    SegNet student_;
    TeacherState teacher_;
    Sampler labeled_sampler_;
    Sampler unlabeled_sampler_;
    std::int64_t step_ = 0;
    std::int64_t total_iters_ = 0;
};

// Teacher-side evaluation of a stored checkpoint.
MetricsRecord evaluate_checkpoint(const std::string& checkpoint_path,
                                  const DatasetManifest& manifest, Split split,
                                  Real boundary_tol_frac = 0.0003);

MetricsRecord evaluate_params(const SegNet& net, const DatasetManifest& manifest,
                              const std::vector<SegSample>& samples, Split split,
                              std::int64_t step, Real boundary_tol_frac);

std::string metrics_csv_header(int num_classes);
std::string metrics_csv_row(const MetricsRecord& record);
std::string format_metrics_table(const MetricsRecord& record);

}  // namespace maskmatch
