#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskmatch/masking.hpp"
#include "maskmatch/pseudo.hpp"
#include "maskmatch/segnet.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Trade-off weights: lambda scales the single-scale unlabeled term in
// baseline mode; lambda1/lambda2 scale the multi-scale weak-to-strong and
// local-consistency terms in the full objective.
struct LossWeights {
    Real lambda = 1.0;
    Real lambda1 = 1.0;
    Real lambda2 = 1.0;

    void validate() const;
};

struct OhemConfig {
    bool enabled = false;
    Real keep_ratio = 0.25;
    std::int64_t min_kept = 256;
};

// Which pixels the masked-branch label-prediction loss supervises.
enum class LcrRegion { kAll, kUnmaskedOnly };
LcrRegion lcr_region_from_string(const std::string& name);

// Mean cross-entropy over weakly augmented labeled images (optionally the
// OHEM variant that averages only the hardest pixels).
Tensor supervised_loss(const SegNet& student, const Tensor& images,
                       const std::vector<std::int32_t>& labels, const OhemConfig& ohem = {});

// Indicator-weighted cross-entropy against pseudo-labels: per sample, the sum
// of valid-pixel losses divided by that sample's valid count, averaged over
// the batch. A sample with no valid pixels contributes exactly zero.
Tensor masked_ce(const Tensor& logits, const PseudoLabel& pseudo);

// Multi-scale weak-to-strong loss: the strong image is resized to each scale
// factor, the student's logits are resized back, and the three
// indicator-weighted terms are averaged (one shared valid count).
Tensor msws_loss(const SegNet& student, const Tensor& strong_images, const PseudoLabel& pseudo,
                 const ScaleSet& scales);

// Local consistency regularization: student predicts the full segmentation
// of the patch-masked weak image, supervised by pseudo-labels from the
// complete image.
Tensor lcr_loss(const SegNet& student, const Tensor& weak_images,
                const std::vector<PatchMask>& masks, const PseudoLabel& pseudo,
                LcrRegion region = LcrRegion::kAll);

// Mask-then-reconstruct variant: MSE between the reconstruction head's
// output on the masked image and the original weak image, over all pixels.
Tensor reconstruction_loss(const SegNet& student, const Tensor& weak_images,
                           const std::vector<PatchMask>& masks);

// Mean of the top max(min_kept, floor(keep_ratio * count)) per-pixel CE
// values. keep_ratio == 1 is exactly the plain mean.
Tensor ohem_ce(const Tensor& logits, const std::vector<std::int32_t>& targets, Real keep_ratio,
               std::int64_t min_kept);

enum class ObjectiveMode { kBaseline, kMaskMatch };

// baseline:  labeled + lambda * unlabeled_ws
// maskmatch: labeled + lambda1 * unlabeled_ws + lambda2 * lcr
// Undefined part tensors are treated as absent.
Tensor total_loss(const LossWeights& weights, ObjectiveMode mode, const Tensor& labeled,
                  const Tensor& unlabeled_ws, const Tensor& lcr);

}  // namespace maskmatch
