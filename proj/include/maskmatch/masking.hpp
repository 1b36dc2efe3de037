#pragma once

#include <cstdint>
#include <vector>

#include "maskmatch/rng.hpp"
#include "maskmatch/tensor.hpp"

namespace maskmatch {

enum class MaskStrategy { kRandom, kBlock, kGrid };

MaskStrategy mask_strategy_from_string(const std::string& name);
std::string mask_strategy_name(MaskStrategy strategy);

struct MaskSpec {
    int patch_size = 32;     // desk-scale configs use 8 on 64x64 images
    Real ratio = 0.7;        // fraction of patches masked
    MaskStrategy strategy = MaskStrategy::kRandom;
};

// Per-pixel binary mask, constant within each patch_size x patch_size patch.
// 0 = masked, 1 = unmasked.
struct PatchMask {
    int h = 0;
    int w = 0;
    int patch_size = 0;
    std::vector<std::uint8_t> mask;

    Real masked_fraction() const;
};

// random: each patch masked independently with probability ratio.
// block:  one contiguous patch rectangle covering ~ratio of all patches.
// grid:   keeps every k-th patch in both axes, k chosen so the kept
//         fraction is nearest to 1-ratio.
PatchMask generate_mask(int h, int w, const MaskSpec& spec, Rng& rng);

// Elementwise product broadcast over channels; masked pixels become exactly
// zero. The single-mask form applies one mask to the whole batch; the batch
// form pairs masks[i] with image i.
Tensor apply_mask(const Tensor& images, const PatchMask& mask);
Tensor apply_mask(const Tensor& images, const std::vector<PatchMask>& masks);

}  // namespace maskmatch
