#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maskmatch/dataset.hpp"
#include "maskmatch/pseudo.hpp"
#include "maskmatch/rng.hpp"

namespace maskmatch {

// Weak augmentations move pixels (resize / crop / flip) and therefore
// transform the label identically with nearest-neighbor resampling. Strong
// augmentations are photometric only: they never move a pixel, so spatial
// supervision produced on the weak image stays aligned.

struct WeakAugConfig {
    Real scale_min = 0.5;
    Real scale_max = 2.0;
    int crop_h = 64;
    int crop_w = 64;
    Real flip_prob = 0.5;
};

// The realized spatial transform, sufficient to replay it exactly.
struct WeakAugRecord {
    int resized_h = 0;
    int resized_w = 0;
    int top = 0;
    int left = 0;
    int crop_h = 0;
    int crop_w = 0;
    bool flip = false;
};

// Resize by a random scale (extents clamped so the crop window fits),
// random-crop to training size, flip with probability flip_prob.
std::pair<SegSample, WeakAugRecord> weak_augment(const SegSample& sample,
                                                 const WeakAugConfig& cfg, Rng& rng);

// Replays a recorded transform; weak_augment(s, cfg, rng) and replaying its
// record on s produce identical samples.
SegSample replay_weak_augment(const SegSample& sample, const WeakAugRecord& record);

struct StrongAugConfig {
    Real jitter_prob = 0.8;
    Real jitter_min = 0.6;
    Real jitter_max = 1.4;
    Real grayscale_prob = 0.2;
    Real blur_prob = 0.5;
    Real blur_sigma_min = 0.1;
    Real blur_sigma_max = 2.0;
};

// Color jitter (brightness, contrast, saturation), random grayscale, random
// Gaussian blur (truncated kernel, reflective padding).
Image strong_augment(const Image& image, const StrongAugConfig& cfg, Rng& rng);

struct CutMixBox {
    int top = 0;
    int left = 0;
    int h = 0;  // zero-area box is a no-op
    int w = 0;
};

struct CutMixConfig {
    Real prob = 1.0;
    Real area_min = 0.2;
    Real area_max = 0.5;
    Real aspect_min = 0.5;
    Real aspect_max = 2.0;
};

CutMixBox sample_cutmix_box(int h, int w, const CutMixConfig& cfg, Rng& rng);

// Replaces the box region of (image a, pseudo a) with the same region of
// (image b, pseudo b); class, confidence and validity move together.
// Both pseudo labels must be single-sample (n == 1).
std::pair<Image, PseudoLabel> cutmix_pair(const Image& a, const Image& b, const PseudoLabel& pa,
                                          const PseudoLabel& pb, const CutMixBox& box);

// In-batch mixing: each sample is (with probability cfg.prob) mixed with a
// random partner, all regions sourced from the pre-mix batch.
void cutmix_batch(std::vector<Image>& images, PseudoLabel& pseudo, const CutMixConfig& cfg,
                  Rng& rng);

// Nearest-neighbor label resize with half-pixel centers (shared by the weak
// pipeline and tests).
std::vector<std::uint8_t> resize_label_nearest(const std::vector<std::uint8_t>& label, int h,
                                               int w, int out_h, int out_w);

Image resize_image_bilinear(const Image& image, int out_h, int out_w);

}  // namespace maskmatch
