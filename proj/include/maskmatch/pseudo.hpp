#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/segnet.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Scale factors for multi-scale ensembling: the identity scale plus one
// shrinking and one enlarging factor. Scaled extents are rounded to the
// nearest multiple of 2^depth so the model can consume them.
struct ScaleSet {
    Real sigma1 = 0.7;
    Real sigma2 = 1.5;

    void validate() const;
    std::vector<Real> factors() const { return {1.0, sigma1, sigma2}; }
};

// Hard per-pixel teacher targets for a batch: class ids, the confidence the
// producing distribution assigned to them, and the validity mask
// confidence > tau.
struct PseudoLabel {
    std::int64_t n = 0, h = 0, w = 0;
    Real tau = 0.0;
    std::vector<std::int32_t> classes;
    std::vector<Real> confidence;
    std::vector<std::uint8_t> valid;

    std::int64_t pixel_count() const { return n * h * w; }
    std::int64_t valid_count() const;
    Real valid_ratio() const;
    PseudoLabel slice(std::int64_t index) const;  // single-sample copy
};

// Builds a PseudoLabel from a per-pixel class distribution [N,C,H,W].
PseudoLabel pseudo_from_probs(const Tensor& probs, Real tau);

enum class PseudoAverage { kProbs, kLogits };
PseudoAverage pseudo_average_from_string(const std::string& name);

// argmax/max of softmax(teacher(weak)); no gradients are recorded.
PseudoLabel single_scale_pseudo(const SegNet& teacher, const Tensor& weak_images, Real tau);

// For each scale factor: resize the input, run the teacher, softmax, resize
// the probability map back to the original size; average the three maps
// (renormalizing per pixel) and threshold. kLogits averages resized logits
// instead and applies softmax afterwards.
PseudoLabel multiscale_pseudo(const SegNet& teacher, const Tensor& weak_images,
                              const ScaleSet& scales, Real tau,
                              PseudoAverage average = PseudoAverage::kProbs);

std::int64_t round_to_multiple(Real value, std::int64_t multiple);

// Diagnostic only: agreement between pseudo classes and withheld ground
// truth, overall and restricted to valid pixels.
struct PseudoAccuracy {
    Real accuracy_all = 0.0;
    Real accuracy_valid = 0.0;
    Real valid_ratio = 0.0;
};
PseudoAccuracy pseudo_accuracy(const PseudoLabel& pseudo,
                               const std::vector<std::uint8_t>& ground_truth);

}  // namespace maskmatch
