#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// rows = ground truth, cols = prediction
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes)
        : num_classes(classes),
          counts(static_cast<std::size_t>(classes) * classes, 0) {}

    std::int64_t& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::int64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::int64_t total() const;
    void merge(const ConfusionMatrix& other);
};

void accumulate_confusion(ConfusionMatrix& cm, const std::vector<std::int32_t>& pred,
                          const std::vector<std::int32_t>& gt);

struct MiouResult {
    std::vector<Real> per_class;       // IoU where present, 0 otherwise
    std::vector<std::uint8_t> present; // class participated in the mean
    Real mean = 0.0;
};

// IoU_c = diag / (row + col - diag); classes absent from both prediction and
// ground truth are excluded from the mean.
MiouResult miou(const ConfusionMatrix& cm);

Real pixel_accuracy(const ConfusionMatrix& cm);

// Raw match/total counts so scores can be micro-accumulated across a split.
struct BoundaryCounts {
    std::int64_t matched_pred = 0;
    std::int64_t total_pred = 0;
    std::int64_t matched_gt = 0;
    std::int64_t total_gt = 0;

    void merge(const BoundaryCounts& other);
};

struct BoundaryScore {
    Real precision = 0.0;
    Real recall = 0.0;
    Real f = 0.0;
};

// Boundary pixels are those with a 4-neighbor of a different class; a
// boundary pixel matches if one of the other map's boundary pixels of the
// same class lies within distance d = max(1, ceil(tol_frac * image
// diagonal)). Matching is per foreground class present in the ground truth,
// micro-averaged.
BoundaryCounts boundary_match_counts(const std::vector<std::int32_t>& pred,
                                     const std::vector<std::int32_t>& gt, int h, int w,
                                     int num_classes, Real tol_frac);

BoundaryScore boundary_score(const BoundaryCounts& counts);

BoundaryScore boundary_fscore(const std::vector<std::int32_t>& pred,
                              const std::vector<std::int32_t>& gt, int h, int w, int num_classes,
                              Real tol_frac = 0.0003);

// Exact squared Euclidean distance to the nearest set pixel (two-pass
// lower-envelope transform). Pixels of an empty set are at "infinity".
std::vector<Real> squared_distance_transform(const std::vector<std::uint8_t>& set_pixels, int h,
                                             int w);

// One evaluation of one split.
struct MetricsRecord {
    std::string split;
    std::int64_t step = 0;
    Real pixel_acc = 0.0;
    MiouResult iou;
    BoundaryScore boundary;
};

std::vector<std::int32_t> widen_labels(const std::vector<std::uint8_t>& labels);

}  // namespace maskmatch
