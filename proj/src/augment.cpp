#include "maskmatch/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maskmatch {

namespace {

int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

Real luminance(const Image& im, int y, int x) {
    return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
}

void clamp01(Image& im) {
    for (auto& v : im.px) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

Image resize_image_bilinear(const Image& image, int out_h, int out_w) {
    std::vector<Image> one{image};
    Tensor t = images_to_tensor(one);
    Tensor r = bilinear_resize(t, out_h, out_w);
    return tensor_to_image(r, 0);
}

std::vector<std::uint8_t> resize_label_nearest(const std::vector<std::uint8_t>& label, int h,
                                               int w, int out_h, int out_w) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_h) * out_w);
    const Real sy = static_cast<Real>(h) / out_h;
    const Real sx = static_cast<Real>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const int iy = std::clamp(
            static_cast<int>(std::floor((oy + 0.5) * sy - 0.5 + 0.5)), 0, h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const int ix = std::clamp(
                static_cast<int>(std::floor((ox + 0.5) * sx - 0.5 + 0.5)), 0, w - 1);
            out[static_cast<std::size_t>(oy) * out_w + ox] =
                label[static_cast<std::size_t>(iy) * w + ix];
        }
    }
    return out;
}

std::pair<SegSample, WeakAugRecord> weak_augment(const SegSample& sample,
                                                 const WeakAugConfig& cfg, Rng& rng) {
    const Real s = rng.uniform(cfg.scale_min, cfg.scale_max);
    WeakAugRecord rec;
    // clamp the realized extents so the crop window always fits
    rec.resized_h = std::max(cfg.crop_h,
                             static_cast<int>(std::lround(sample.image.h * s)));
    rec.resized_w = std::max(cfg.crop_w,
                             static_cast<int>(std::lround(sample.image.w * s)));
    rec.crop_h = cfg.crop_h;
    rec.crop_w = cfg.crop_w;
    rec.top = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(rec.resized_h - cfg.crop_h + 1)));
    rec.left = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(rec.resized_w - cfg.crop_w + 1)));
    rec.flip = rng.bernoulli(cfg.flip_prob);
    return {replay_weak_augment(sample, rec), rec};
}

SegSample replay_weak_augment(const SegSample& sample, const WeakAugRecord& rec) {
    if (rec.top < 0 || rec.left < 0 || rec.top + rec.crop_h > rec.resized_h ||
        rec.left + rec.crop_w > rec.resized_w) {
        throw std::invalid_argument("weak_augment: crop window outside resized image");
    }
    SegSample out;
    out.id = sample.id;

    Image resized = (rec.resized_h == sample.image.h && rec.resized_w == sample.image.w)
                        ? sample.image
                        : resize_image_bilinear(sample.image, rec.resized_h, rec.resized_w);
    Image cropped = Image::zeros(rec.crop_h, rec.crop_w);
    for (int y = 0; y < rec.crop_h; ++y) {
        for (int x = 0; x < rec.crop_w; ++x) {
            const int sx = rec.flip ? rec.crop_w - 1 - x : x;
            for (int c = 0; c < 3; ++c)
                cropped.at(y, sx, c) = resized.at(rec.top + y, rec.left + x, c);
        }
    }
    out.image = std::move(cropped);

    if (sample.label) {
        auto resized_label = resize_label_nearest(*sample.label, sample.image.h, sample.image.w,
                                                  rec.resized_h, rec.resized_w);
        std::vector<std::uint8_t> cropped_label(
            static_cast<std::size_t>(rec.crop_h) * rec.crop_w);
        for (int y = 0; y < rec.crop_h; ++y) {
            for (int x = 0; x < rec.crop_w; ++x) {
                const int sx = rec.flip ? rec.crop_w - 1 - x : x;
                cropped_label[static_cast<std::size_t>(y) * rec.crop_w + sx] =
                    resized_label[static_cast<std::size_t>(rec.top + y) * rec.resized_w +
                                  rec.left + x];
            }
        }
        out.label = std::move(cropped_label);
    }
    return out;
}

Image strong_augment(const Image& image, const StrongAugConfig& cfg, Rng& rng) {
    Image out = image;

    if (rng.bernoulli(cfg.jitter_prob)) {
        const Real fb = rng.uniform(cfg.jitter_min, cfg.jitter_max);
        const Real fc = rng.uniform(cfg.jitter_min, cfg.jitter_max);
        const Real fs = rng.uniform(cfg.jitter_min, cfg.jitter_max);

        for (auto& v : out.px) v *= fb;
        clamp01(out);

        Real mean_lum = 0.0;
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) mean_lum += luminance(out, y, x);
        mean_lum /= static_cast<Real>(out.h) * out.w;
        for (auto& v : out.px) v = fc * v + (1.0 - fc) * mean_lum;
        clamp01(out);

        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                const Real lum = luminance(out, y, x);
                for (int c = 0; c < 3; ++c)
                    out.at(y, x, c) = fs * out.at(y, x, c) + (1.0 - fs) * lum;
            }
        }
        clamp01(out);
    }

    if (rng.bernoulli(cfg.grayscale_prob)) {
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                const Real lum = luminance(out, y, x);
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = lum;
            }
        }
    }

    if (rng.bernoulli(cfg.blur_prob)) {
        const Real sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
        const int radius = static_cast<int>(std::ceil(3.0 * sigma));
        std::vector<Real> kernel(static_cast<std::size_t>(2 * radius + 1));
        Real ksum = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            const Real v = std::exp(-0.5 * (i / sigma) * (i / sigma));
            kernel[static_cast<std::size_t>(i + radius)] = v;
            ksum += v;
        }
        for (auto& v : kernel) v /= ksum;

        Image tmp = Image::zeros(out.h, out.w);
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    Real acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[static_cast<std::size_t>(i + radius)] *
                               out.at(y, reflect_index(x + i, out.w), c);
                    tmp.at(y, x, c) = acc;
                }
            }
        }
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    Real acc = 0.0;
                    for (int i = -radius; i <= radius; ++i)
                        acc += kernel[static_cast<std::size_t>(i + radius)] *
                               tmp.at(reflect_index(y + i, out.h), x, c);
                    out.at(y, x, c) = acc;
                }
            }
        }
    }
    return out;
}

CutMixBox sample_cutmix_box(int h, int w, const CutMixConfig& cfg, Rng& rng) {
    const Real area = rng.uniform(cfg.area_min, cfg.area_max) * h * w;
    const Real aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
    CutMixBox box;
    box.h = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, h);
    box.w = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 1, w);
    box.top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h - box.h + 1)));
    box.left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(w - box.w + 1)));
    return box;
}

std::pair<Image, PseudoLabel> cutmix_pair(const Image& a, const Image& b, const PseudoLabel& pa,
                                          const PseudoLabel& pb, const CutMixBox& box) {
    if (a.h != b.h || a.w != b.w || pa.n != 1 || pb.n != 1 || pa.h != a.h || pa.w != a.w ||
        pb.h != b.h || pb.w != b.w) {
        throw std::invalid_argument("cutmix_pair: mismatched image/pseudo-label shapes");
    }
    if (box.h < 0 || box.w < 0 || box.top < 0 || box.left < 0 || box.top + box.h > a.h ||
        box.left + box.w > a.w) {
        throw std::invalid_argument("cutmix_pair: box out of bounds");
    }
    Image image = a;
    PseudoLabel pl = pa;
    for (int y = box.top; y < box.top + box.h; ++y) {
        for (int x = box.left; x < box.left + box.w; ++x) {
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = b.at(y, x, c);
            const std::size_t i = static_cast<std::size_t>(y) * a.w + x;
            pl.classes[i] = pb.classes[i];
            pl.confidence[i] = pb.confidence[i];
            pl.valid[i] = pb.valid[i];
        }
    }
    return {std::move(image), std::move(pl)};
}

void cutmix_batch(std::vector<Image>& images, PseudoLabel& pseudo, const CutMixConfig& cfg,
                  Rng& rng) {
    const std::int64_t n = static_cast<std::int64_t>(images.size());
    if (n != pseudo.n) {
        throw std::invalid_argument("cutmix_batch: " + std::to_string(images.size()) +
                                    " images for pseudo batch of " + std::to_string(pseudo.n));
    }
    if (n < 2) return;

    std::vector<std::int64_t> partner(static_cast<std::size_t>(n));
    std::iota(partner.begin(), partner.end(), 0);
    for (std::int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(partner[static_cast<std::size_t>(i)], partner[static_cast<std::size_t>(j)]);
    }

    const std::vector<Image> source_images = images;
    const PseudoLabel source_pseudo = pseudo;
    for (std::int64_t i = 0; i < n; ++i) {
        const bool apply = rng.bernoulli(cfg.prob);
        const CutMixBox box = sample_cutmix_box(static_cast<int>(pseudo.h),
                                                static_cast<int>(pseudo.w), cfg, rng);
        if (!apply) continue;
        const std::int64_t j = partner[static_cast<std::size_t>(i)];
        if (j == i) continue;
        auto [mixed_img, mixed_pl] =
            cutmix_pair(source_images[static_cast<std::size_t>(i)],
                        source_images[static_cast<std::size_t>(j)], source_pseudo.slice(i),
                        source_pseudo.slice(j), box);
        images[static_cast<std::size_t>(i)] = std::move(mixed_img);
        const std::int64_t hw = pseudo.h * pseudo.w;
        std::copy(mixed_pl.classes.begin(), mixed_pl.classes.end(),
                  pseudo.classes.begin() + i * hw);
        std::copy(mixed_pl.confidence.begin(), mixed_pl.confidence.end(),
                  pseudo.confidence.begin() + i * hw);
        std::copy(mixed_pl.valid.begin(), mixed_pl.valid.end(), pseudo.valid.begin() + i * hw);
    }
}

}  // namespace maskmatch
