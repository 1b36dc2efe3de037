#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!GradMode::enabled()) return false;
    for (const Tensor* t : inputs) {
        if ((*t).requires_grad() || (*t).impl()->node) return true;
    }
    return false;
}

void attach(Tensor& out, const char* op, std::vector<std::shared_ptr<TensorImpl>> inputs,
            std::function<void(const TensorImpl&)> backprop) {
    auto node = std::make_shared<detail::Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backprop = std::move(backprop);
    out.impl()->node = std::move(node);
    out.set_requires_grad(true);
}

bool wants_grad(const std::shared_ptr<TensorImpl>& t) {
    return t->requires_grad || t->node;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const Real* in = x.data();
    Real* o = out.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
    if (recording({&x})) {
        auto xi = x.impl();
        attach(out, "relu", {xi}, [xi](const TensorImpl& o_) {
            if (!wants_grad(xi)) return;
            xi->ensure_grad();
            const std::int64_t m = xi->numel();
            for (std::int64_t i = 0; i < m; ++i) {
                if (xi->data[static_cast<std::size_t>(i)] > 0.0) {
                    xi->grad[static_cast<std::size_t>(i)] += o_.grad[static_cast<std::size_t>(i)];
                }
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const Real* pa = a.data();
    const Real* pb = b.data();
    Real* o = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = pa[i] + pb[i];
    if (recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl();
        attach(out, "add", {ai, bi}, [ai, bi](const TensorImpl& o_) {
            const std::int64_t m = o_.numel();
            if (wants_grad(ai)) {
                ai->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    ai->grad[static_cast<std::size_t>(i)] += o_.grad[static_cast<std::size_t>(i)];
            }
            if (wants_grad(bi)) {
                bi->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    bi->grad[static_cast<std::size_t>(i)] += o_.grad[static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const Real* pa = a.data();
    const Real* pb = b.data();
    Real* o = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = pa[i] - pb[i];
    if (recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl();
        attach(out, "sub", {ai, bi}, [ai, bi](const TensorImpl& o_) {
            const std::int64_t m = o_.numel();
            if (wants_grad(ai)) {
                ai->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    ai->grad[static_cast<std::size_t>(i)] += o_.grad[static_cast<std::size_t>(i)];
            }
            if (wants_grad(bi)) {
                bi->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    bi->grad[static_cast<std::size_t>(i)] -= o_.grad[static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const Real* pa = a.data();
    const Real* pb = b.data();
    Real* o = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = pa[i] * pb[i];
    if (recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl();
        attach(out, "mul", {ai, bi}, [ai, bi](const TensorImpl& o_) {
            const std::int64_t m = o_.numel();
            if (wants_grad(ai)) {
                ai->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    ai->grad[static_cast<std::size_t>(i)] +=
                        o_.grad[static_cast<std::size_t>(i)] * bi->data[static_cast<std::size_t>(i)];
            }
            if (wants_grad(bi)) {
                bi->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    bi->grad[static_cast<std::size_t>(i)] +=
                        o_.grad[static_cast<std::size_t>(i)] * ai->data[static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, Real factor) {
    Tensor out = Tensor::zeros(x.shape());
    const Real* in = x.data();
    Real* o = out.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] * factor;
    if (recording({&x})) {
        auto xi = x.impl();
        attach(out, "scale", {xi}, [xi, factor](const TensorImpl& o_) {
            if (!wants_grad(xi)) return;
            xi->ensure_grad();
            const std::int64_t m = o_.numel();
            for (std::int64_t i = 0; i < m; ++i)
                xi->grad[static_cast<std::size_t>(i)] +=
                    factor * o_.grad[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3)) {
        throw std::invalid_argument("concat_channels: incompatible shapes " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor out = Tensor::zeros({n, ca + cb, a.dim(2), a.dim(3)});
    Real* o = out.data();
    const Real* pa = a.data();
    const Real* pb = b.data();
    for (std::int64_t i = 0; i < n; ++i) {
        std::copy(pa + i * ca * hw, pa + (i + 1) * ca * hw, o + i * (ca + cb) * hw);
        std::copy(pb + i * cb * hw, pb + (i + 1) * cb * hw, o + i * (ca + cb) * hw + ca * hw);
    }
    if (recording({&a, &b})) {
        auto ai = a.impl(), bi = b.impl();
        attach(out, "concat", {ai, bi}, [ai, bi, n, ca, cb, hw](const TensorImpl& o_) {
            for (std::int64_t i = 0; i < n; ++i) {
                const Real* g = o_.grad.data() + i * (ca + cb) * hw;
                if (wants_grad(ai)) {
                    ai->ensure_grad();
                    Real* ga = ai->grad.data() + i * ca * hw;
                    for (std::int64_t j = 0; j < ca * hw; ++j) ga[j] += g[j];
                }
                if (wants_grad(bi)) {
                    bi->ensure_grad();
                    Real* gb = bi->grad.data() + i * cb * hw;
                    for (std::int64_t j = 0; j < cb * hw; ++j) gb[j] += g[ca * hw + j];
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    Real acc = 0.0;
    const Real* in = x.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += in[i];
    Tensor out = Tensor::scalar(acc);
    if (recording({&x})) {
        auto xi = x.impl();
        attach(out, "sum", {xi}, [xi](const TensorImpl& o_) {
            if (!wants_grad(xi)) return;
            xi->ensure_grad();
            const Real g = o_.grad[0];
            for (auto& gv : xi->grad) gv += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<Real>(x.numel())); }

Tensor softmax_channels(const Tensor& logits) {
    if (logits.rank() != 4) {
        throw std::invalid_argument("softmax_channels: expected [N,C,H,W], got " +
                                    shape_str(logits.shape()));
    }
    const std::int64_t n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (c < 1) throw std::invalid_argument("softmax_channels: C must be >= 1");
    const std::int64_t hw = h * w;
    Tensor out = Tensor::zeros(logits.shape());
    const Real* in = logits.data();
    Real* o = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t px = 0; px < hw; ++px) {
            const Real* base = in + i * c * hw + px;
            Real* obase = o + i * c * hw + px;
            Real mx = base[0];
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const Real v = base[ch * hw];
                if (!std::isfinite(v)) {
                    throw std::domain_error(
                        "softmax_channels: non-finite logit at sample " + std::to_string(i) +
                        ", pixel (" + std::to_string(px / w) + "," + std::to_string(px % w) + ")");
                }
                if (v > mx) mx = v;
            }
            Real denom = 0.0;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const Real e = std::exp(base[ch * hw] - mx);
                obase[ch * hw] = e;
                denom += e;
            }
            for (std::int64_t ch = 0; ch < c; ++ch) obase[ch * hw] /= denom;
        }
    }
    if (recording({&logits})) {
        auto li = logits.impl();
        attach(out, "softmax", {li}, [li, n, c, hw](const TensorImpl& o_) {
            if (!wants_grad(li)) return;
            li->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t px = 0; px < hw; ++px) {
                    const Real* s = o_.data.data() + i * c * hw + px;
                    const Real* g = o_.grad.data() + i * c * hw + px;
                    Real dot = 0.0;
                    for (std::int64_t ch = 0; ch < c; ++ch) dot += g[ch * hw] * s[ch * hw];
                    Real* gi = li->grad.data() + i * c * hw + px;
                    for (std::int64_t ch = 0; ch < c; ++ch)
                        gi[ch * hw] += s[ch * hw] * (g[ch * hw] - dot);
                }
            }
        });
    }
    return out;
}

Tensor ce_pixel(const Tensor& logits, const std::vector<std::int32_t>& targets) {
    if (logits.rank() != 4) {
        throw std::invalid_argument("ce_pixel: expected [N,C,H,W], got " +
                                    shape_str(logits.shape()));
    }
    const std::int64_t n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const std::int64_t hw = h * w;
    if (static_cast<std::int64_t>(targets.size()) != n * hw) {
        throw std::invalid_argument("ce_pixel: targets size " + std::to_string(targets.size()) +
                                    " does not match N*H*W = " + std::to_string(n * hw));
    }
    Tensor out = Tensor::zeros({n, h, w});
    const Real* in = logits.data();
    Real* o = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t px = 0; px < hw; ++px) {
            const std::int32_t tgt = targets[static_cast<std::size_t>(i * hw + px)];
            if (tgt < 0 || tgt >= c) {
                throw std::out_of_range("ce_pixel: target " + std::to_string(tgt) +
                                        " out of range for C=" + std::to_string(c));
            }
            const Real* base = in + i * c * hw + px;
            Real mx = base[0];
            for (std::int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, base[ch * hw]);
            Real denom = 0.0;
            for (std::int64_t ch = 0; ch < c; ++ch) denom += std::exp(base[ch * hw] - mx);
            // -log softmax[target] = logsumexp - logit[target]
            o[i * hw + px] = std::log(denom) + mx - base[static_cast<std::int64_t>(tgt) * hw];
        }
    }
    if (recording({&logits})) {
        auto li = logits.impl();
        auto tgts = targets;  // captured by value; constant w.r.t. the graph
        attach(out, "ce_pixel", {li}, [li, tgts, n, c, hw](const TensorImpl& o_) {
            if (!wants_grad(li)) return;
            li->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t px = 0; px < hw; ++px) {
                    const Real g = o_.grad[static_cast<std::size_t>(i * hw + px)];
                    if (g == 0.0) continue;
                    const Real* base = li->data.data() + i * c * hw + px;
                    Real mx = base[0];
                    for (std::int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, base[ch * hw]);
                    Real denom = 0.0;
                    for (std::int64_t ch = 0; ch < c; ++ch)
                        denom += std::exp(base[ch * hw] - mx);
                    Real* gi = li->grad.data() + i * c * hw + px;
                    const std::int32_t tgt = tgts[static_cast<std::size_t>(i * hw + px)];
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const Real p = std::exp(base[ch * hw] - mx) / denom;
                        gi[ch * hw] += g * (p - (ch == tgt ? 1.0 : 0.0));
                    }
                }
            }
        });
    }
    return out;
}

Tensor weighted_sum(const Tensor& values, const std::vector<Real>& weights, Real factor) {
    if (static_cast<std::int64_t>(weights.size()) != values.numel()) {
        throw std::invalid_argument("weighted_sum: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(values.numel()) + " values");
    }
    Real acc = 0.0;
    const Real* v = values.data();
    const std::int64_t n = values.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += v[i] * weights[static_cast<std::size_t>(i)];
    Tensor out = Tensor::scalar(acc * factor);
    if (recording({&values})) {
        auto vi = values.impl();
        auto w = weights;
        attach(out, "weighted_sum", {vi}, [vi, w, factor](const TensorImpl& o_) {
            if (!wants_grad(vi)) return;
            vi->ensure_grad();
            const Real g = o_.grad[0] * factor;
            const std::int64_t m = vi->numel();
            for (std::int64_t i = 0; i < m; ++i)
                vi->grad[static_cast<std::size_t>(i)] += g * w[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

Tensor mul_pixel_mask(const Tensor& x, const std::vector<Real>& pixel_mask) {
    if (x.rank() != 4) {
        throw std::invalid_argument("mul_pixel_mask: expected [N,C,H,W], got " +
                                    shape_str(x.shape()));
    }
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (static_cast<std::int64_t>(pixel_mask.size()) != n * hw) {
        throw std::invalid_argument("mul_pixel_mask: mask size " +
                                    std::to_string(pixel_mask.size()) + " != N*H*W = " +
                                    std::to_string(n * hw));
    }
    Tensor out = Tensor::zeros(x.shape());
    const Real* in = x.data();
    Real* o = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const Real* src = in + (i * c + ch) * hw;
            Real* dst = o + (i * c + ch) * hw;
            const Real* m = pixel_mask.data() + i * hw;
            for (std::int64_t px = 0; px < hw; ++px) dst[px] = src[px] * m[px];
        }
    }
    if (recording({&x})) {
        auto xi = x.impl();
        auto m = pixel_mask;
        attach(out, "mul_pixel_mask", {xi}, [xi, m, n, c, hw](const TensorImpl& o_) {
            if (!wants_grad(xi)) return;
            xi->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const Real* g = o_.grad.data() + (i * c + ch) * hw;
                    Real* gi = xi->grad.data() + (i * c + ch) * hw;
                    const Real* mm = m.data() + i * hw;
                    for (std::int64_t px = 0; px < hw; ++px) gi[px] += g[px] * mm[px];
                }
            }
        });
    }
    return out;
}

}  // namespace maskmatch
