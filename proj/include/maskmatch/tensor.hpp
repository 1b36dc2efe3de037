#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace maskmatch {

// Minimal reverse-mode automatic differentiation over dense row-major
// tensors. Every operator the segmentation model and its losses need is a
// free function returning a fresh tensor; when gradient recording is enabled
// and an input requires grad, the result carries an op record so backward()
// can replay the chain. All math is double precision.

using Real = double;

namespace detail {
struct Node;
}

struct TensorImpl {
    std::vector<std::int64_t> shape;
    std::vector<Real> data;
    std::vector<Real> grad;  // empty until backward() touches this tensor
    bool requires_grad = false;
    std::shared_ptr<detail::Node> node;  // producing op, null for leaves

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }
    void ensure_grad();
};

namespace detail {
struct Node {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    // Reads out.grad (and possibly out.data) and accumulates into the
    // gradients of the recorded inputs.
    std::function<void(const TensorImpl& out)> backprop;
    bool done = false;
};
}  // namespace detail

// Thread-local switch; teacher evaluation and pseudo-labeling run with
// recording disabled so no parameter can receive gradient from them.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::int64_t> shape, Real value, bool requires_grad = false);
    static Tensor from_data(std::vector<std::int64_t> shape, std::vector<Real> data,
                            bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::int64_t>& shape() const { return impl_->shape; }
    std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const { return impl_->numel(); }

    Real* data() { return impl_->data.data(); }
    const Real* data() const { return impl_->data.data(); }
    std::vector<Real>& vec() { return impl_->data; }
    const std::vector<Real>& vec() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    Real* grad() { return impl_->grad.data(); }
    const Real* grad() const { return impl_->grad.data(); }
    std::vector<Real>& grad_vec() { return impl_->grad; }
    void zero_grad();
    void clear_grad();  // back to "no grad populated"

    Real item() const;

    std::shared_ptr<TensorImpl>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Runs reverse-mode accumulation from a scalar loss. Each reachable graph
// node is visited exactly once in reverse topological order. Calling it a
// second time on the same graph is an error.
void backward(Tensor& loss);

// --- operator set -----------------------------------------------------------

// Cross-correlation with square odd kernel. input [N,Cin,H,W],
// kernel [Cout,Cin,k,k], bias [Cout]; differentiable in all three.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

// Half-pixel-center bilinear sampling to (out_h, out_w); differentiable.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// Per-pixel softmax over the channel axis of [N,C,H,W], max-stabilized.
Tensor softmax_channels(const Tensor& logits);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Per-pixel -log softmax(logits)[target]; logits [N,C,H,W], targets flat
// [N*H*W] class ids. Returns the [N,H,W] loss map. Fused log-sum-exp form.
Tensor ce_pixel(const Tensor& logits, const std::vector<std::int32_t>& targets);

// factor * sum(values * weights) with constant weights; gradient flows to
// values only. The workhorse behind masked means and OHEM top-k means.
Tensor weighted_sum(const Tensor& values, const std::vector<Real>& weights, Real factor);

// Zeroes pixels of [N,C,H,W] where mask[n*H*W + y*W + x] == 0 (broadcast over
// channels); gradient is zeroed identically.
Tensor mul_pixel_mask(const Tensor& x, const std::vector<Real>& pixel_mask);

// --- non-differentiating helpers --------------------------------------------

// Per-pixel argmax / max over channels of [N,C,H,W].
void argmax_channels(const Tensor& probs, std::vector<std::int32_t>& classes,
                     std::vector<Real>& max_value);

std::string shape_str(const std::vector<std::int64_t>& shape);

}  // namespace maskmatch
