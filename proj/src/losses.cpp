#include "maskmatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maskmatch {

void LossWeights::validate() const {
    if (lambda < 0.0 || lambda1 < 0.0 || lambda2 < 0.0) {
        throw std::invalid_argument("LossWeights: trade-off weights must be non-negative");
    }
}

LcrRegion lcr_region_from_string(const std::string& name) {
    if (name == "all") return LcrRegion::kAll;
    if (name == "unmasked_only") return LcrRegion::kUnmaskedOnly;
    throw std::invalid_argument("unknown lcr region '" + name + "' (all|unmasked_only)");
}

namespace {

void check_pseudo_shape(const char* op, const Tensor& logits, const PseudoLabel& pseudo) {
    if (logits.rank() != 4 || logits.dim(0) != pseudo.n || logits.dim(2) != pseudo.h ||
        logits.dim(3) != pseudo.w) {
        throw std::invalid_argument(std::string(op) + ": logits " + shape_str(logits.shape()) +
                                    " vs pseudo-label batch " + std::to_string(pseudo.n) + "x" +
                                    std::to_string(pseudo.h) + "x" + std::to_string(pseudo.w));
    }
}

// Per-sample normalized indicator mean: sum_i (sum_j w_ij * ce_ij) / count_i,
// divided by N. Samples with count_i == 0 contribute exactly zero.
Tensor indicator_mean(const Tensor& ce_map, const std::vector<std::uint8_t>& indicator) {
    const std::int64_t n = ce_map.dim(0);
    const std::int64_t hw = ce_map.dim(1) * ce_map.dim(2);
    std::vector<Real> weights(static_cast<std::size_t>(n * hw), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t count = 0;
        for (std::int64_t j = 0; j < hw; ++j)
            count += indicator[static_cast<std::size_t>(i * hw + j)] != 0;
        if (count == 0) continue;
        const Real inv = 1.0 / static_cast<Real>(count);
        for (std::int64_t j = 0; j < hw; ++j) {
            if (indicator[static_cast<std::size_t>(i * hw + j)]) {
                weights[static_cast<std::size_t>(i * hw + j)] = inv;
            }
        }
    }
    return weighted_sum(ce_map, weights, 1.0 / static_cast<Real>(n));
}

}  // namespace

Tensor supervised_loss(const SegNet& student, const Tensor& images,
                       const std::vector<std::int32_t>& labels, const OhemConfig& ohem) {
    if (images.dim(0) < 1) throw std::invalid_argument("supervised_loss: empty batch");
    Tensor logits = student.forward(images);
    if (ohem.enabled) return ohem_ce(logits, labels, ohem.keep_ratio, ohem.min_kept);
    Tensor ce = ce_pixel(logits, labels);
    std::vector<Real> ones(static_cast<std::size_t>(ce.numel()), 1.0);
    return weighted_sum(ce, ones, 1.0 / static_cast<Real>(ce.numel()));
}

Tensor masked_ce(const Tensor& logits, const PseudoLabel& pseudo) {
    check_pseudo_shape("masked_ce", logits, pseudo);
    Tensor ce = ce_pixel(logits, pseudo.classes);
    return indicator_mean(ce, pseudo.valid);
}

Tensor msws_loss(const SegNet& student, const Tensor& strong_images, const PseudoLabel& pseudo,
                 const ScaleSet& scales) {
    scales.validate();
    const std::int64_t h = strong_images.dim(2), w = strong_images.dim(3);
    const std::int64_t div = std::int64_t{1} << student.config.depth;
    Tensor total;
    const auto factors = scales.factors();
    for (const Real sigma : factors) {
        Tensor input = strong_images;
        if (sigma != 1.0) {
            const std::int64_t sh = round_to_multiple(static_cast<Real>(h) * sigma, div);
            const std::int64_t sw = round_to_multiple(static_cast<Real>(w) * sigma, div);
            input = bilinear_resize(strong_images, static_cast<int>(sh), static_cast<int>(sw));
        }
        Tensor logits = student.forward(input);
        if (logits.dim(2) != h || logits.dim(3) != w) {
            logits = bilinear_resize(logits, static_cast<int>(h), static_cast<int>(w));
        }
        Tensor term = masked_ce(logits, pseudo);
        total = total.defined() ? add(total, term) : term;
    }
    return scale(total, 1.0 / static_cast<Real>(factors.size()));
}

Tensor lcr_loss(const SegNet& student, const Tensor& weak_images,
                const std::vector<PatchMask>& masks, const PseudoLabel& pseudo,
                LcrRegion region) {
    Tensor masked_images = apply_mask(weak_images, masks);
    Tensor logits = student.forward(masked_images);
    check_pseudo_shape("lcr_loss", logits, pseudo);
    Tensor ce = ce_pixel(logits, pseudo.classes);

    if (region == LcrRegion::kAll) return indicator_mean(ce, pseudo.valid);

    const std::int64_t hw = pseudo.h * pseudo.w;
    std::vector<std::uint8_t> indicator(pseudo.valid.size(), 0);
    for (std::int64_t i = 0; i < pseudo.n; ++i) {
        const PatchMask& m = masks[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < hw; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i * hw + j);
            indicator[idx] = pseudo.valid[idx] && m.mask[static_cast<std::size_t>(j)];
        }
    }
    return indicator_mean(ce, indicator);
}

Tensor reconstruction_loss(const SegNet& student, const Tensor& weak_images,
                           const std::vector<PatchMask>& masks) {
    Tensor masked_images = apply_mask(weak_images, masks);
    ForwardOut out = student.forward_full(masked_images, true);
    Tensor diff = sub(out.recon, weak_images);
    return scale(sum(mul(diff, diff)), 1.0 / static_cast<Real>(diff.numel()));
}

Tensor ohem_ce(const Tensor& logits, const std::vector<std::int32_t>& targets, Real keep_ratio,
               std::int64_t min_kept) {
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
        throw std::invalid_argument("ohem_ce: keep_ratio must be in (0,1], got " +
                                    std::to_string(keep_ratio));
    }
    Tensor ce = ce_pixel(logits, targets);
    const std::int64_t count = ce.numel();
    std::int64_t kept = std::max<std::int64_t>(
        min_kept, static_cast<std::int64_t>(std::floor(keep_ratio * static_cast<Real>(count))));
    kept = std::clamp<std::int64_t>(kept, 1, count);

    // hardest pixels first; ties broken by index for determinism
    std::vector<std::int64_t> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    const Real* v = ce.data();
    std::nth_element(order.begin(), order.begin() + (kept - 1), order.end(),
                     [v](std::int64_t a, std::int64_t b) {
                         if (v[a] != v[b]) return v[a] > v[b];
                         return a < b;
                     });

    std::vector<Real> weights(static_cast<std::size_t>(count), 0.0);
    for (std::int64_t i = 0; i < kept; ++i)
        weights[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0;
    return weighted_sum(ce, weights, 1.0 / static_cast<Real>(kept));
}

Tensor total_loss(const LossWeights& weights, ObjectiveMode mode, const Tensor& labeled,
                  const Tensor& unlabeled_ws, const Tensor& lcr) {
    weights.validate();
    if (!labeled.defined()) throw std::invalid_argument("total_loss: labeled term is required");
    Tensor total = labeled;
    if (unlabeled_ws.defined()) {
        const Real w = mode == ObjectiveMode::kBaseline ? weights.lambda : weights.lambda1;
        total = add(total, scale(unlabeled_ws, w));
    }
    if (lcr.defined()) {
        if (mode == ObjectiveMode::kBaseline) {
            throw std::invalid_argument("total_loss: baseline objective has no LCR term");
        }
        total = add(total, scale(lcr, weights.lambda2));
    }
    return total;
}

}  // namespace maskmatch
