#pragma once

// Named trainable parameters. A ParamStore owns the parameters of one
// network; names are hierarchical ("refine.hg.theta") and unique within a
// store. Gradients accumulate across backward passes until zero_grads().

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgin/rng.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;  // same shape as value, zero-initialized

    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class ParamStore {
  public:
    Parameter<T>& create(const std::string& name, std::vector<int> shape) {
        if (by_name_.count(name))
            throw std::invalid_argument("duplicate parameter name: " + name);
        ordered_.push_back(std::make_unique<Parameter<T>>(name, Tensor<T>(std::move(shape))));
        by_name_[name] = ordered_.back().get();
        return *ordered_.back();
    }

    Parameter<T>* find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }

    Parameter<T>& at(const std::string& name) const {
        Parameter<T>* p = find(name);
        if (!p) throw std::out_of_range("no such parameter: " + name);
        return *p;
    }

    // Creation order; the optimizer iterates this so update order is fixed.
    std::vector<Parameter<T>*> all() const {
        std::vector<Parameter<T>*> v;
        v.reserve(ordered_.size());
        for (auto& p : ordered_) v.push_back(p.get());
        return v;
    }

    std::size_t count() const { return ordered_.size(); }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (auto& p : ordered_) n += p->value.size();
        return n;
    }

    void zero_grads() {
        for (auto& p : ordered_) p->zero_grad();
    }

  private:
    std::vector<std::unique_ptr<Parameter<T>>> ordered_;
    std::unordered_map<std::string, Parameter<T>*> by_name_;
};

// Kaiming-uniform fan-in init, seeded per parameter name so results do not
// depend on registration order.
template <typename T>
void init_kaiming_uniform(Parameter<T>& p, std::int64_t fan_in, std::uint64_t seed) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
    Rng rng(mix_seed(seed, p.name));
    for (std::int64_t i = 0; i < p.value.size(); ++i)
        p.value[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// fan_in for a [k,k,c_in,c_out] conv kernel.
inline std::int64_t conv_fan_in(const std::vector<int>& kshape) {
    return static_cast<std::int64_t>(kshape[0]) * kshape[1] * kshape[2];
}

}  // namespace hgin
