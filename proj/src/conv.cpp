#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskmatch/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// conv2d is the hot path of the whole trainer, so it is written as
// im2col + a small register-blocked GEMM. Parallel sections only ever split
// work so that each output element is produced by exactly one thread with a
// fixed summation order, which keeps results bitwise identical for any
// thread count.

namespace maskmatch {

namespace {

struct ConvDims {
    std::int64_t n, cin, h, w;
    std::int64_t cout, k;
    std::int64_t stride, pad;
    std::int64_t oh, ow;
    std::int64_t ck() const { return cin * k * k; }
    std::int64_t oxy() const { return oh * ow; }
};

ConvDims check_conv(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                    int stride, int padding) {
    if (input.rank() != 4) {
        throw std::invalid_argument("conv2d: input must be [N,Cin,H,W], got " +
                                    shape_str(input.shape()));
    }
    if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
        throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,k,k], got " +
                                    shape_str(kernel.shape()));
    }
    ConvDims d;
    d.n = input.dim(0);
    d.cin = input.dim(1);
    d.h = input.dim(2);
    d.w = input.dim(3);
    d.cout = kernel.dim(0);
    d.k = kernel.dim(2);
    d.stride = stride;
    d.pad = padding;
    if (kernel.dim(1) != d.cin) {
        throw std::invalid_argument("conv2d: kernel expects Cin=" + std::to_string(kernel.dim(1)) +
                                    " but input has Cin=" + std::to_string(d.cin));
    }
    if (d.k % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd, got k=" +
                                                  std::to_string(d.k));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
    if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
    if (bias.rank() != 1 || bias.dim(0) != d.cout) {
        throw std::invalid_argument("conv2d: bias must be [Cout=" + std::to_string(d.cout) +
                                    "], got " + shape_str(bias.shape()));
    }
    const std::int64_t eh = d.h + 2 * d.pad - d.k;
    const std::int64_t ew = d.w + 2 * d.pad - d.k;
    if (eh < 0 || ew < 0 || eh % d.stride != 0 || ew % d.stride != 0) {
        throw std::invalid_argument("conv2d: output size not integral for H=" +
                                    std::to_string(d.h) + " W=" + std::to_string(d.w) +
                                    " k=" + std::to_string(d.k) + " stride=" +
                                    std::to_string(d.stride) + " pad=" + std::to_string(d.pad));
    }
    d.oh = eh / d.stride + 1;
    d.ow = ew / d.stride + 1;
    return d;
}

// col[(ci*k + ky)*k + kx][oy*ow + ox] = input[ci][oy*stride - pad + ky][...]
void im2col(const Real* img, const ConvDims& d, Real* col) {
    const std::int64_t ck = d.ck(), oxy = d.oxy();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t row = 0; row < ck; ++row) {
        const std::int64_t ci = row / (d.k * d.k);
        const std::int64_t ky = (row / d.k) % d.k;
        const std::int64_t kx = row % d.k;
        Real* dst = col + row * oxy;
        const Real* src = img + ci * d.h * d.w;
        for (std::int64_t oy = 0; oy < d.oh; ++oy) {
            const std::int64_t iy = oy * d.stride - d.pad + ky;
            Real* line = dst + oy * d.ow;
            if (iy < 0 || iy >= d.h) {
                std::fill(line, line + d.ow, 0.0);
                continue;
            }
            for (std::int64_t ox = 0; ox < d.ow; ++ox) {
                const std::int64_t ix = ox * d.stride - d.pad + kx;
                line[ox] = (ix >= 0 && ix < d.w) ? src[iy * d.w + ix] : 0.0;
            }
        }
    }
}

// out[m][j] = bias[m] + sum_k A[m][k] * B[k][j]; A = kernel rows, B = col.
void gemm_bias(const Real* a, const Real* b, const Real* bias, Real* out,
               std::int64_t m, std::int64_t kk, std::int64_t nn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t m0 = 0; m0 < m; m0 += 4) {
        const std::int64_t mb = std::min<std::int64_t>(4, m - m0);
        for (std::int64_t r = 0; r < mb; ++r)
            std::fill(out + (m0 + r) * nn, out + (m0 + r + 1) * nn, bias ? bias[m0 + r] : 0.0);
        if (mb == 4) {
            Real* c0 = out + (m0 + 0) * nn;
            Real* c1 = out + (m0 + 1) * nn;
            Real* c2 = out + (m0 + 2) * nn;
            Real* c3 = out + (m0 + 3) * nn;
            for (std::int64_t k = 0; k < kk; ++k) {
                const Real a0 = a[(m0 + 0) * kk + k];
                const Real a1 = a[(m0 + 1) * kk + k];
                const Real a2 = a[(m0 + 2) * kk + k];
                const Real a3 = a[(m0 + 3) * kk + k];
                const Real* br = b + k * nn;
                for (std::int64_t j = 0; j < nn; ++j) {
                    const Real bv = br[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
        } else {
            for (std::int64_t r = 0; r < mb; ++r) {
                Real* c = out + (m0 + r) * nn;
                for (std::int64_t k = 0; k < kk; ++k) {
                    const Real av = a[(m0 + r) * kk + k];
                    const Real* br = b + k * nn;
                    for (std::int64_t j = 0; j < nn; ++j) c[j] += av * br[j];
                }
            }
        }
    }
}

// Four-lane unrolled dot product with a fixed combine order.
Real dot_fixed(const Real* x, const Real* y, std::int64_t n) {
    Real s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    Real tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
    const ConvDims d = check_conv(input, kernel, bias, stride, padding);
    Tensor out = Tensor::zeros({d.n, d.cout, d.oh, d.ow});

    const std::int64_t ck = d.ck(), oxy = d.oxy();
    std::vector<Real> col(static_cast<std::size_t>(ck * oxy));
    for (std::int64_t i = 0; i < d.n; ++i) {
        im2col(input.data() + i * d.cin * d.h * d.w, d, col.data());
        gemm_bias(kernel.data(), col.data(), bias.data(),
                  out.data() + i * d.cout * oxy, d.cout, ck, oxy);
    }

    const bool rec = GradMode::enabled() &&
                     (input.requires_grad() || input.impl()->node || kernel.requires_grad() ||
                      kernel.impl()->node || bias.requires_grad() || bias.impl()->node);
    if (rec) {
        auto xi = input.impl();
        auto ki = kernel.impl();
        auto bi = bias.impl();
        auto node = std::make_shared<detail::Node>();
        node->op = "conv2d";
        node->inputs = {xi, ki, bi};
        node->backprop = [xi, ki, bi, d](const TensorImpl& o_) {
            const std::int64_t ck = d.ck(), oxy = d.oxy();
            const bool need_x = xi->requires_grad || xi->node;
            const bool need_k = ki->requires_grad || ki->node;
            const bool need_b = bi->requires_grad || bi->node;
            if (need_x) xi->ensure_grad();
            if (need_k) ki->ensure_grad();
            if (need_b) bi->ensure_grad();

            std::vector<Real> col;
            if (need_k) col.resize(static_cast<std::size_t>(ck * oxy));
            std::vector<Real> gcol;
            if (need_x) gcol.resize(static_cast<std::size_t>(ck * oxy));

            for (std::int64_t i = 0; i < d.n; ++i) {
                const Real* gout = o_.grad.data() + i * d.cout * oxy;

                if (need_b) {
                    for (std::int64_t co = 0; co < d.cout; ++co) {
                        Real acc = 0.0;
                        const Real* g = gout + co * oxy;
                        for (std::int64_t j = 0; j < oxy; ++j) acc += g[j];
                        bi->grad[static_cast<std::size_t>(co)] += acc;
                    }
                }

                if (need_k) {
                    im2col(xi->data.data() + i * d.cin * d.h * d.w, d, col.data());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                    for (std::int64_t co = 0; co < d.cout; ++co) {
                        const Real* g = gout + co * oxy;
                        Real* gk = ki->grad.data() + co * ck;
                        for (std::int64_t r = 0; r < ck; ++r)
                            gk[r] += dot_fixed(g, col.data() + r * oxy, oxy);
                    }
                }

                if (need_x) {
                    // gcol = kernel^T * gout, then gather back into the image.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                    for (std::int64_t r = 0; r < ck; ++r) {
                        Real* gc = gcol.data() + r * oxy;
                        std::fill(gc, gc + oxy, 0.0);
                        for (std::int64_t co = 0; co < d.cout; ++co) {
                            const Real kv = ki->data[static_cast<std::size_t>(co * ck + r)];
                            if (kv == 0.0) continue;
                            const Real* g = gout + co * oxy;
                            for (std::int64_t j = 0; j < oxy; ++j) gc[j] += kv * g[j];
                        }
                    }
                    Real* gin = xi->grad.data() + i * d.cin * d.h * d.w;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                    for (std::int64_t row = 0; row < d.cin * d.h; ++row) {
                        const std::int64_t ci = row / d.h;
                        const std::int64_t iy = row % d.h;
                        for (std::int64_t ix = 0; ix < d.w; ++ix) {
                            Real acc = 0.0;
                            for (std::int64_t ky = 0; ky < d.k; ++ky) {
                                const std::int64_t ty = iy + d.pad - ky;
                                if (ty < 0 || ty % d.stride != 0) continue;
                                const std::int64_t oy = ty / d.stride;
                                if (oy >= d.oh) continue;
                                for (std::int64_t kx = 0; kx < d.k; ++kx) {
                                    const std::int64_t tx = ix + d.pad - kx;
                                    if (tx < 0 || tx % d.stride != 0) continue;
                                    const std::int64_t ox = tx / d.stride;
                                    if (ox >= d.ow) continue;
                                    acc += gcol[static_cast<std::size_t>(
                                        ((ci * d.k + ky) * d.k + kx) * oxy + oy * d.ow + ox)];
                                }
                            }
                            gin[iy * d.w + ix] += acc;
                        }
                    }
                }
            }
        };
        out.impl()->node = std::move(node);
        out.set_requires_grad(true);
    }
    return out;
}

namespace {

struct Axis {
    std::vector<std::int64_t> i0, i1;
    std::vector<Real> w1;  // weight on i1; weight on i0 is 1 - w1
};

// Half-pixel-center source coordinates, clamped to the valid range.
Axis resize_axis(std::int64_t in, std::int64_t out) {
    Axis ax;
    ax.i0.resize(static_cast<std::size_t>(out));
    ax.i1.resize(static_cast<std::size_t>(out));
    ax.w1.resize(static_cast<std::size_t>(out));
    const Real scale = static_cast<Real>(in) / static_cast<Real>(out);
    for (std::int64_t o = 0; o < out; ++o) {
        Real src = (static_cast<Real>(o) + 0.5) * scale - 0.5;
        src = std::clamp<Real>(src, 0.0, static_cast<Real>(in - 1));
        const std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
        ax.i0[static_cast<std::size_t>(o)] = lo;
        ax.i1[static_cast<std::size_t>(o)] = std::min(lo + 1, in - 1);
        ax.w1[static_cast<std::size_t>(o)] = src - static_cast<Real>(lo);
    }
    return ax;
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
    if (input.rank() != 4) {
        throw std::invalid_argument("bilinear_resize: expected [N,C,H,W], got " +
                                    shape_str(input.shape()));
    }
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("bilinear_resize: target size must be >= 1, got " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t oh = out_h, ow = out_w;
    Tensor out = Tensor::zeros({n, c, oh, ow});

    const Axis ay = resize_axis(h, oh);
    const Axis axx = resize_axis(w, ow);

    const Real* in = input.data();
    Real* o = out.data();
    const std::int64_t planes = n * c;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const Real* src = in + pl * h * w;
        Real* dst = o + pl * oh * ow;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            const std::int64_t y0 = ay.i0[static_cast<std::size_t>(oy)];
            const std::int64_t y1 = ay.i1[static_cast<std::size_t>(oy)];
            const Real wy = ay.w1[static_cast<std::size_t>(oy)];
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const std::int64_t x0 = axx.i0[static_cast<std::size_t>(ox)];
                const std::int64_t x1 = axx.i1[static_cast<std::size_t>(ox)];
                const Real wx = axx.w1[static_cast<std::size_t>(ox)];
                const Real top = src[y0 * w + x0] * (1.0 - wx) + src[y0 * w + x1] * wx;
                const Real bot = src[y1 * w + x0] * (1.0 - wx) + src[y1 * w + x1] * wx;
                dst[oy * ow + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }

    if (GradMode::enabled() && (input.requires_grad() || input.impl()->node)) {
        auto xi = input.impl();
        auto node = std::make_shared<detail::Node>();
        node->op = "bilinear_resize";
        node->inputs = {xi};
        node->backprop = [xi, ay, axx, n, c, h, w, oh, ow](const TensorImpl& o_) {
            if (!(xi->requires_grad || xi->node)) return;
            xi->ensure_grad();
            const std::int64_t planes = n * c;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (std::int64_t pl = 0; pl < planes; ++pl) {
                const Real* g = o_.grad.data() + pl * oh * ow;
                Real* gi = xi->grad.data() + pl * h * w;
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const std::int64_t y0 = ay.i0[static_cast<std::size_t>(oy)];
                    const std::int64_t y1 = ay.i1[static_cast<std::size_t>(oy)];
                    const Real wy = ay.w1[static_cast<std::size_t>(oy)];
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const std::int64_t x0 = axx.i0[static_cast<std::size_t>(ox)];
                        const std::int64_t x1 = axx.i1[static_cast<std::size_t>(ox)];
                        const Real wx = axx.w1[static_cast<std::size_t>(ox)];
                        const Real gv = g[oy * ow + ox];
                        gi[y0 * w + x0] += gv * (1.0 - wy) * (1.0 - wx);
                        gi[y0 * w + x1] += gv * (1.0 - wy) * wx;
                        gi[y1 * w + x0] += gv * wy * (1.0 - wx);
                        gi[y1 * w + x1] += gv * wy * wx;
                    }
                }
            }
        };
        out.impl()->node = std::move(node);
        out.set_requires_grad(true);
    }
    return out;
}

}  // namespace maskmatch
