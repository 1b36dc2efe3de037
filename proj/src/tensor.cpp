#include "maskmatch/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace maskmatch {

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void TensorImpl::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(static_cast<std::size_t>(t.impl_->numel()), 0.0);
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, Real value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape, std::vector<Real> data,
                         bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = std::move(shape);
    if (static_cast<std::int64_t>(data.size()) != t.impl_->numel()) {
        throw std::invalid_argument("Tensor::from_data: " + std::to_string(data.size()) +
                                    " values for shape " + shape_str(t.impl_->shape));
    }
    t.impl_->data = std::move(data);
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Real Tensor::item() const {
    if (numel() != 1) {
        throw std::logic_error("Tensor::item: tensor has " + std::to_string(numel()) +
                               " elements, expected 1");
    }
    return impl_->data[0];
}

void Tensor::zero_grad() {
    impl_->ensure_grad();
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::clear_grad() { impl_->grad.clear(); }

void backward(Tensor& loss) {
    if (!loss.defined()) throw std::logic_error("backward: undefined tensor");
    if (loss.numel() != 1) {
        throw std::logic_error("backward: loss must be scalar, got shape " +
                               shape_str(loss.shape()));
    }
    auto root = loss.impl();
    if (!root->requires_grad && !root->node) {
        throw std::logic_error("backward: loss is not connected to any parameter");
    }
    if (root->node && root->node->done) {
        throw std::logic_error("backward: called twice on the same graph without reset");
    }

    // Iterative post-order DFS; yields children-before-parents, so the
    // reverse is a valid topological order for gradient propagation.
    std::vector<TensorImpl*> topo;
    std::unordered_set<TensorImpl*> visited;
    struct Frame {
        TensorImpl* t;
        std::size_t next_input;
    };
    std::vector<Frame> stack;
    if (root->node) stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        auto& inputs = f.t->node->inputs;
        if (f.next_input < inputs.size()) {
            TensorImpl* child = inputs[f.next_input++].get();
            if (child->node && visited.insert(child).second) {
                stack.push_back({child, 0});
            }
        } else {
            topo.push_back(f.t);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorImpl* t = *it;
        if (t->grad.empty()) continue;  // branch that received no gradient
        t->node->backprop(*t);
        t->node->done = true;
    }
}

void argmax_channels(const Tensor& probs, std::vector<std::int32_t>& classes,
                     std::vector<Real>& max_value) {
    if (probs.rank() != 4) {
        throw std::invalid_argument("argmax_channels: expected [N,C,H,W], got " +
                                    shape_str(probs.shape()));
    }
    const std::int64_t n = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
    const std::int64_t hw = h * w;
    classes.assign(static_cast<std::size_t>(n * hw), 0);
    max_value.assign(static_cast<std::size_t>(n * hw), 0.0);
    const Real* p = probs.data();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t px = 0; px < hw; ++px) {
            const Real* base = p + (i * c) * hw + px;
            Real best = base[0];
            std::int32_t best_c = 0;
            for (std::int64_t ch = 1; ch < c; ++ch) {
                const Real v = base[ch * hw];
                if (v > best) {
                    best = v;
                    best_c = static_cast<std::int32_t>(ch);
                }
            }
            classes[static_cast<std::size_t>(i * hw + px)] = best_c;
            max_value[static_cast<std::size_t>(i * hw + px)] = best;
        }
    }
}

}  // namespace maskmatch
