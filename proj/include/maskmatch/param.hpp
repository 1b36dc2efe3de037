#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "maskmatch/tensor.hpp"

namespace maskmatch {

// Named, ordered collection of trainable tensors plus their SGD momentum
// buffers. Iteration order is insertion order so optimizer updates and
// checkpoint layout are stable.
class ParamSet {
public:
    struct Entry {
        Tensor value;
        std::vector<Real> momentum;
    };

    void add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    Tensor& param(const std::string& name) { return at(name).value; }
    const Tensor& param(const std::string& name) const { return at(name).value; }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }
    std::int64_t total_elements() const;

    void clear_grads();

    // Deep copy: fresh tensors (values and momentum), grads not carried over.
    ParamSet clone() const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Entry> index_;
};

// v <- momentum*v + (grad + weight_decay*w); w <- w - lr*v; grads cleared.
// Every parameter must have a populated gradient.
void sgd_momentum_step(ParamSet& params, Real lr, Real momentum, Real weight_decay);

}  // namespace maskmatch
