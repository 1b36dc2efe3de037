#include "maskmatch/pseudo.hpp"

#include <cmath>
#include <stdexcept>

namespace maskmatch {

void ScaleSet::validate() const {
    if (!(sigma1 > 0.0 && sigma1 < 1.0)) {
        throw std::invalid_argument("ScaleSet: sigma1 must be in (0,1), got " +
                                    std::to_string(sigma1));
    }
    if (!(sigma2 > 1.0)) {
        throw std::invalid_argument("ScaleSet: sigma2 must be > 1, got " +
                                    std::to_string(sigma2));
    }
}

std::int64_t PseudoLabel::valid_count() const {
    std::int64_t count = 0;
    for (auto v : valid) count += (v != 0);
    return count;
}

Real PseudoLabel::valid_ratio() const {
    return valid.empty() ? 0.0
                         : static_cast<Real>(valid_count()) / static_cast<Real>(valid.size());
}

PseudoLabel PseudoLabel::slice(std::int64_t index) const {
    PseudoLabel out;
    out.n = 1;
    out.h = h;
    out.w = w;
    out.tau = tau;
    const std::int64_t hw = h * w;
    const auto begin = static_cast<std::size_t>(index * hw);
    out.classes.assign(classes.begin() + begin, classes.begin() + begin + hw);
    out.confidence.assign(confidence.begin() + begin, confidence.begin() + begin + hw);
    out.valid.assign(valid.begin() + begin, valid.begin() + begin + hw);
    return out;
}

PseudoLabel pseudo_from_probs(const Tensor& probs, Real tau) {
    if (tau < 0.0 || tau > 1.0) {
        throw std::invalid_argument("pseudo labels: tau must be in [0,1], got " +
                                    std::to_string(tau));
    }
    PseudoLabel pl;
    pl.n = probs.dim(0);
    pl.h = probs.dim(2);
    pl.w = probs.dim(3);
    pl.tau = tau;
    argmax_channels(probs, pl.classes, pl.confidence);
    pl.valid.resize(pl.confidence.size());
    for (std::size_t i = 0; i < pl.confidence.size(); ++i) {
        pl.valid[i] = pl.confidence[i] > tau ? 1 : 0;
    }
    return pl;
}

PseudoAverage pseudo_average_from_string(const std::string& name) {
    if (name == "probs") return PseudoAverage::kProbs;
    if (name == "logits") return PseudoAverage::kLogits;
    throw std::invalid_argument("unknown pseudo average mode '" + name + "' (probs|logits)");
}

PseudoLabel single_scale_pseudo(const SegNet& teacher, const Tensor& weak_images, Real tau) {
    NoGradGuard no_grad;
    Tensor probs = softmax_channels(teacher.forward(weak_images));
    return pseudo_from_probs(probs, tau);
}

std::int64_t round_to_multiple(Real value, std::int64_t multiple) {
    const std::int64_t rounded =
        static_cast<std::int64_t>(std::llround(value / static_cast<Real>(multiple))) * multiple;
    return std::max(rounded, multiple);
}

PseudoLabel multiscale_pseudo(const SegNet& teacher, const Tensor& weak_images,
                              const ScaleSet& scales, Real tau, PseudoAverage average) {
    scales.validate();
    NoGradGuard no_grad;
    const std::int64_t n = weak_images.dim(0), h = weak_images.dim(2), w = weak_images.dim(3);
    const std::int64_t c = teacher.config.num_classes;
    const std::int64_t div = std::int64_t{1} << teacher.config.depth;

    Tensor accum = Tensor::zeros({n, c, h, w});
    const auto factors = scales.factors();
    for (const Real sigma : factors) {
        Tensor input = weak_images;
        if (sigma != 1.0) {
            const std::int64_t sh = round_to_multiple(static_cast<Real>(h) * sigma, div);
            const std::int64_t sw = round_to_multiple(static_cast<Real>(w) * sigma, div);
            input = bilinear_resize(weak_images, static_cast<int>(sh), static_cast<int>(sw));
        }
        Tensor out = teacher.forward(input);
        if (average == PseudoAverage::kProbs) out = softmax_channels(out);
        if (out.dim(2) != h || out.dim(3) != w) {
            out = bilinear_resize(out, static_cast<int>(h), static_cast<int>(w));
        }
        Real* acc = accum.data();
        const Real* src = out.data();
        const std::int64_t total = accum.numel();
        for (std::int64_t i = 0; i < total; ++i) acc[i] += src[i];
    }

    const Real inv = 1.0 / static_cast<Real>(factors.size());
    for (auto& v : accum.vec()) v *= inv;

    if (average == PseudoAverage::kLogits) {
        accum = softmax_channels(accum);
    } else {
        // bilinear resampling preserves the per-pixel channel sum up to
        // rounding; renormalize to remove the drift
        Real* acc = accum.data();
        const std::int64_t hw = h * w;
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t px = 0; px < hw; ++px) {
                Real total = 0.0;
                for (std::int64_t ch = 0; ch < c; ++ch) total += acc[(i * c + ch) * hw + px];
                if (total > 0.0) {
                    for (std::int64_t ch = 0; ch < c; ++ch) acc[(i * c + ch) * hw + px] /= total;
                }
            }
        }
    }
    return pseudo_from_probs(accum, tau);
}

PseudoAccuracy pseudo_accuracy(const PseudoLabel& pseudo,
                               const std::vector<std::uint8_t>& ground_truth) {
    if (ground_truth.size() != pseudo.classes.size()) {
        throw std::invalid_argument("pseudo_accuracy: ground truth size mismatch");
    }
    std::int64_t correct_all = 0, correct_valid = 0, valid = 0;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const bool match = pseudo.classes[i] == static_cast<std::int32_t>(ground_truth[i]);
        correct_all += match;
        if (pseudo.valid[i]) {
            ++valid;
            correct_valid += match;
        }
    }
    PseudoAccuracy acc;
    const auto total = static_cast<Real>(ground_truth.size());
    acc.accuracy_all = total > 0 ? static_cast<Real>(correct_all) / total : 0.0;
    acc.accuracy_valid = valid > 0 ? static_cast<Real>(correct_valid) / static_cast<Real>(valid) : 0.0;
    acc.valid_ratio = total > 0 ? static_cast<Real>(valid) / total : 0.0;
    return acc;
}

}  // namespace maskmatch
