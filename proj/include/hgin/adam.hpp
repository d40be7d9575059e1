#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/params.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

// Bias-corrected Adam over one parameter store. Moments are created lazily
// on the first step (or restored from a checkpoint) and stay aligned with
// the store's creation order.
template <typename T>
struct AdamOptimizer {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;  // completed steps, drives bias correction
    std::vector<Tensor<T>> m, v;

    void ensure_state(const ParamStore<T>& ps) {
        if (!m.empty()) {
            if (m.size() != ps.count() || v.size() != ps.count())
                throw std::logic_error("adam: moment state does not match the parameter store");
            return;
        }
        for (const Parameter<T>* p : ps.all()) {
            m.push_back(Tensor<T>::zeros(p->value.shape()));
            v.push_back(Tensor<T>::zeros(p->value.shape()));
        }
    }

    void step(ParamStore<T>& ps) {
        ensure_state(ps);
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        std::size_t idx = 0;
        for (Parameter<T>* p : ps.all()) {
            Tensor<T>& mi = m[idx];
            Tensor<T>& vi = v[idx];
            ++idx;
            if (!mi.same_shape(p->value))
                throw std::logic_error("adam: moment shape " + mi.shape_str() +
                                       " does not match parameter '" + p->name + "' " +
                                       p->value.shape_str());
            for (std::int64_t i = 0; i < p->value.size(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                if (!std::isfinite(g))
                    throw std::runtime_error("adam: non-finite gradient in parameter '" +
                                             p->name + "' at index " + std::to_string(i));
                const double mn = beta1 * static_cast<double>(mi[i]) + (1.0 - beta1) * g;
                const double vn = beta2 * static_cast<double>(vi[i]) + (1.0 - beta2) * g * g;
                mi[i] = static_cast<T>(mn);
                vi[i] = static_cast<T>(vn);
                const double mhat = mn / bc1;
                const double vhat = vn / bc2;
                p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) -
                                             lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

    void decay_lr(double factor) { lr *= factor; }
};

}  // namespace hgin
