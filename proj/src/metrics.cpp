#include "maskmatch/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace maskmatch {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (auto v : counts) t += v;
    return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes) {
        throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void accumulate_confusion(ConfusionMatrix& cm, const std::vector<std::int32_t>& pred,
                          const std::vector<std::int32_t>& gt) {
    if (pred.size() != gt.size()) {
        throw std::invalid_argument("accumulate_confusion: size mismatch " +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(gt.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::int32_t p = pred[i], g = gt[i];
        if (p < 0 || p >= cm.num_classes || g < 0 || g >= cm.num_classes) {
            throw std::out_of_range("accumulate_confusion: class id out of range at pixel " +
                                    std::to_string(i) + " (pred=" + std::to_string(p) +
                                    ", gt=" + std::to_string(g) + ")");
        }
        ++cm.at(g, p);
    }
}

MiouResult miou(const ConfusionMatrix& cm) {
    MiouResult result;
    result.per_class.assign(static_cast<std::size_t>(cm.num_classes), 0.0);
    result.present.assign(static_cast<std::size_t>(cm.num_classes), 0);
    Real sum = 0.0;
    int present = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < cm.num_classes; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const std::int64_t denom = row + col - cm.at(c, c);
        if (denom == 0) continue;
        const Real iou = static_cast<Real>(cm.at(c, c)) / static_cast<Real>(denom);
        result.per_class[static_cast<std::size_t>(c)] = iou;
        result.present[static_cast<std::size_t>(c)] = 1;
        sum += iou;
        ++present;
    }
    if (present == 0) throw std::domain_error("miou: no class present in prediction or gt");
    result.mean = sum / static_cast<Real>(present);
    return result;
}

Real pixel_accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) return 0.0;
    std::int64_t diag = 0;
    for (int c = 0; c < cm.num_classes; ++c) diag += cm.at(c, c);
    return static_cast<Real>(diag) / static_cast<Real>(total);
}

void BoundaryCounts::merge(const BoundaryCounts& other) {
    matched_pred += other.matched_pred;
    total_pred += other.total_pred;
    matched_gt += other.matched_gt;
    total_gt += other.total_gt;
}

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

// Felzenszwalb-Huttenlocher 1D squared-distance lower envelope.
void edt_1d(const Real* f, Real* d, int n, std::vector<int>& v, std::vector<Real>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        while (true) {
            if (f[v[static_cast<std::size_t>(k)]] == kInf) {
                // previous parabola is at infinity; replace it
                if (k > 0) {
                    --k;
                    continue;
                }
                v[0] = q;
                z[0] = -kInf;
                z[1] = kInf;
                break;
            }
            const int p = v[static_cast<std::size_t>(k)];
            const Real s =
                ((f[q] + static_cast<Real>(q) * q) - (f[p] + static_cast<Real>(p) * p)) /
                (2.0 * (q - p));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
                continue;
            }
            ++k;
            v[static_cast<std::size_t>(k)] = q;
            z[static_cast<std::size_t>(k)] = s;
            z[static_cast<std::size_t>(k) + 1] = kInf;
            break;
        }
    }
    int k2 = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k2) + 1] < static_cast<Real>(q)) ++k2;
        const int p = v[static_cast<std::size_t>(k2)];
        d[q] = f[p] == kInf ? kInf : static_cast<Real>(q - p) * (q - p) + f[p];
    }
}

}  // namespace

std::vector<Real> squared_distance_transform(const std::vector<std::uint8_t>& set_pixels, int h,
                                             int w) {
    std::vector<Real> dist(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = set_pixels[i] ? 0.0 : kInf;

    const int n = std::max(h, w);
    std::vector<Real> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<Real> z(static_cast<std::size_t>(n) + 1);

    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = dist[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), d.data(), h, v, z);
        for (int y = 0; y < h; ++y) dist[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = dist[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), d.data(), w, v, z);
        for (int x = 0; x < w; ++x) dist[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
    }
    return dist;
}

namespace {

// boundary pixels of class c: map[p] == c with a 4-neighbor of another class
std::vector<std::uint8_t> class_boundary(const std::vector<std::int32_t>& map, int h, int w,
                                         std::int32_t cls) {
    std::vector<std::uint8_t> boundary(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (map[i] != cls) continue;
            const bool edge =
                (y > 0 && map[i - static_cast<std::size_t>(w)] != cls) ||
                (y + 1 < h && map[i + static_cast<std::size_t>(w)] != cls) ||
                (x > 0 && map[i - 1] != cls) || (x + 1 < w && map[i + 1] != cls);
            if (edge) boundary[i] = 1;
        }
    }
    return boundary;
}

}  // namespace

BoundaryCounts boundary_match_counts(const std::vector<std::int32_t>& pred,
                                     const std::vector<std::int32_t>& gt, int h, int w,
                                     int num_classes, Real tol_frac) {
    if (tol_frac < 0.0) throw std::invalid_argument("boundary: tol_frac must be >= 0");
    if (pred.size() != static_cast<std::size_t>(h) * w ||
        gt.size() != static_cast<std::size_t>(h) * w) {
        throw std::invalid_argument("boundary: map size does not match " + std::to_string(w) +
                                    "x" + std::to_string(h));
    }
    const Real diag = std::sqrt(static_cast<Real>(h) * h + static_cast<Real>(w) * w);
    const std::int64_t d = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(tol_frac * diag)));
    const Real d2 = static_cast<Real>(d) * static_cast<Real>(d);

    std::vector<std::uint8_t> gt_present(static_cast<std::size_t>(num_classes), 0);
    for (auto g : gt) gt_present[static_cast<std::size_t>(g)] = 1;

    BoundaryCounts counts;
    for (std::int32_t c = 1; c < num_classes; ++c) {
        if (!gt_present[static_cast<std::size_t>(c)]) continue;
        const auto pb = class_boundary(pred, h, w, c);
        const auto gb = class_boundary(gt, h, w, c);
        const auto dist_to_gt = squared_distance_transform(gb, h, w);
        const auto dist_to_pred = squared_distance_transform(pb, h, w);
        for (std::size_t i = 0; i < pb.size(); ++i) {
            if (pb[i]) {
                ++counts.total_pred;
                if (dist_to_gt[i] <= d2) ++counts.matched_pred;
            }
            if (gb[i]) {
                ++counts.total_gt;
                if (dist_to_pred[i] <= d2) ++counts.matched_gt;
            }
        }
    }
    return counts;
}

BoundaryScore boundary_score(const BoundaryCounts& counts) {
    BoundaryScore s;
    s.precision = counts.total_pred > 0
                      ? static_cast<Real>(counts.matched_pred) / static_cast<Real>(counts.total_pred)
                      : 0.0;
    s.recall = counts.total_gt > 0
                   ? static_cast<Real>(counts.matched_gt) / static_cast<Real>(counts.total_gt)
                   : 0.0;
    s.f = (s.precision + s.recall) > 0.0
              ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
              : 0.0;
    return s;
}

BoundaryScore boundary_fscore(const std::vector<std::int32_t>& pred,
                              const std::vector<std::int32_t>& gt, int h, int w, int num_classes,
                              Real tol_frac) {
    return boundary_score(boundary_match_counts(pred, gt, h, w, num_classes, tol_frac));
}

std::vector<std::int32_t> widen_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::int32_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i];
    return out;
}

}  // namespace maskmatch
