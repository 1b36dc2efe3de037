#include "maskmatch/param.hpp"

#include <stdexcept>

namespace maskmatch {

void ParamSet::add(const std::string& name, Tensor value) {
    if (index_.count(name)) {
        throw std::invalid_argument("ParamSet: duplicate parameter name '" + name + "'");
    }
    value.set_requires_grad(true);
    Entry e;
    e.momentum.assign(static_cast<std::size_t>(value.numel()), 0.0);
    e.value = std::move(value);
    names_.push_back(name);
    index_.emplace(name, std::move(e));
}

ParamSet::Entry& ParamSet::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter '" + name + "'");
    return it->second;
}

const ParamSet::Entry& ParamSet::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter '" + name + "'");
    return it->second;
}

std::int64_t ParamSet::total_elements() const {
    std::int64_t n = 0;
    for (const auto& name : names_) n += at(name).value.numel();
    return n;
}

void ParamSet::clear_grads() {
    for (const auto& name : names_) at(name).value.clear_grad();
}

ParamSet ParamSet::clone() const {
    ParamSet copy;
    for (const auto& name : names_) {
        const Entry& e = at(name);
        Tensor v = Tensor::from_data(e.value.shape(), e.value.vec());
        copy.add(name, std::move(v));
        copy.at(name).momentum = e.momentum;
    }
    return copy;
}

void sgd_momentum_step(ParamSet& params, Real lr, Real momentum, Real weight_decay) {
    for (const auto& name : params.names()) {
        auto& entry = params.at(name);
        Tensor& w = entry.value;
        if (!w.has_grad()) {
            throw std::logic_error("sgd_momentum_step: parameter '" + name +
                                   "' has no gradient (backward not run?)");
        }
        Real* wd = w.data();
        const Real* g = w.grad();
        Real* v = entry.momentum.data();
        const std::int64_t n = w.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            v[i] = momentum * v[i] + (g[i] + weight_decay * wd[i]);
            wd[i] -= lr * v[i];
        }
        w.clear_grad();
    }
}

}  // namespace maskmatch
