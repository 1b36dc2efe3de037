#include "maskmatch/masking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace maskmatch {

MaskStrategy mask_strategy_from_string(const std::string& name) {
    if (name == "random") return MaskStrategy::kRandom;
    if (name == "block") return MaskStrategy::kBlock;
    if (name == "grid") return MaskStrategy::kGrid;
    throw std::invalid_argument("unknown mask strategy '" + name + "' (random|block|grid)");
}

std::string mask_strategy_name(MaskStrategy strategy) {
    switch (strategy) {
        case MaskStrategy::kRandom: return "random";
        case MaskStrategy::kBlock: return "block";
        case MaskStrategy::kGrid: return "grid";
    }
    return "?";
}

Real PatchMask::masked_fraction() const {
    if (mask.empty()) return 0.0;
    std::int64_t masked = 0;
    for (auto v : mask) masked += (v == 0);
    return static_cast<Real>(masked) / static_cast<Real>(mask.size());
}

namespace {

void fill_patch(PatchMask& pm, int py, int px, std::uint8_t value) {
    const int p = pm.patch_size;
    for (int y = py * p; y < (py + 1) * p; ++y) {
        std::fill(pm.mask.begin() + static_cast<std::ptrdiff_t>(y) * pm.w + px * p,
                  pm.mask.begin() + static_cast<std::ptrdiff_t>(y) * pm.w + (px + 1) * p, value);
    }
}

}  // namespace

PatchMask generate_mask(int h, int w, const MaskSpec& spec, Rng& rng) {
    if (spec.patch_size < 1 || h % spec.patch_size != 0 || w % spec.patch_size != 0) {
        throw std::invalid_argument("generate_mask: image " + std::to_string(w) + "x" +
                                    std::to_string(h) + " not divisible by patch size " +
                                    std::to_string(spec.patch_size));
    }
    if (spec.ratio < 0.0 || spec.ratio > 1.0) {
        throw std::invalid_argument("generate_mask: ratio must be in [0,1], got " +
                                    std::to_string(spec.ratio));
    }
    PatchMask pm;
    pm.h = h;
    pm.w = w;
    pm.patch_size = spec.patch_size;
    pm.mask.assign(static_cast<std::size_t>(h) * w, 1);

    const int ph = h / spec.patch_size;
    const int pw = w / spec.patch_size;

    if (spec.ratio == 0.0) return pm;
    if (spec.ratio == 1.0) {
        std::fill(pm.mask.begin(), pm.mask.end(), 0);
        return pm;
    }

    switch (spec.strategy) {
        case MaskStrategy::kRandom: {
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px)
                    if (rng.bernoulli(spec.ratio)) fill_patch(pm, py, px, 0);
            break;
        }
        case MaskStrategy::kBlock: {
            const int total = ph * pw;
            const int target = static_cast<int>(std::lround(spec.ratio * total));
            if (target <= 0) return pm;
            const Real aspect = rng.uniform(0.5, 2.0);
            int bh = std::clamp(static_cast<int>(std::lround(std::sqrt(target * aspect))), 1, ph);
            int bw = std::clamp(
                static_cast<int>(std::lround(static_cast<Real>(target) / bh)), 1, pw);
            const int top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ph - bh + 1)));
            const int left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pw - bw + 1)));
            for (int py = top; py < top + bh; ++py)
                for (int px = left; px < left + bw; ++px) fill_patch(pm, py, px, 0);
            break;
        }
        case MaskStrategy::kGrid: {
            // kept fraction 1/k^2 nearest to 1-ratio
            const int k = std::max(
                1, static_cast<int>(std::lround(std::sqrt(1.0 / (1.0 - spec.ratio)))));
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px)
                    if (py % k != 0 || px % k != 0) fill_patch(pm, py, px, 0);
            break;
        }
    }
    return pm;
}

Tensor apply_mask(const Tensor& images, const PatchMask& mask) {
    if (images.rank() != 4) {
        throw std::invalid_argument("apply_mask: expected [N,C,H,W], got " +
                                    shape_str(images.shape()));
    }
    std::vector<PatchMask> masks(static_cast<std::size_t>(images.dim(0)), mask);
    return apply_mask(images, masks);
}

Tensor apply_mask(const Tensor& images, const std::vector<PatchMask>& masks) {
    if (images.rank() != 4) {
        throw std::invalid_argument("apply_mask: expected [N,C,H,W], got " +
                                    shape_str(images.shape()));
    }
    const std::int64_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
    if (static_cast<std::int64_t>(masks.size()) != n) {
        throw std::invalid_argument("apply_mask: " + std::to_string(masks.size()) +
                                    " masks for batch of " + std::to_string(n));
    }
    std::vector<Real> pixel_mask(static_cast<std::size_t>(n * h * w));
    for (std::int64_t i = 0; i < n; ++i) {
        const PatchMask& m = masks[static_cast<std::size_t>(i)];
        if (m.h != h || m.w != w) {
            throw std::invalid_argument("apply_mask: mask " + std::to_string(m.w) + "x" +
                                        std::to_string(m.h) + " for image " + std::to_string(w) +
                                        "x" + std::to_string(h));
        }
        for (std::int64_t j = 0; j < h * w; ++j) {
            pixel_mask[static_cast<std::size_t>(i * h * w + j)] =
                static_cast<Real>(m.mask[static_cast<std::size_t>(j)]);
        }
    }
    return mul_pixel_mask(images, pixel_mask);
}

}  // namespace maskmatch
