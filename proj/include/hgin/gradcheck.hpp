#pragma once

// Central-difference gradient verification. Each probed coordinate evaluates
// the loss at x+eps and x-eps and compares the numerical slope against the
// tape gradient using max |a-n| / max(|a|, |n|, 1e-8).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/params.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    std::int64_t checked = 0;
};

// loss_fn(want_grad) rebuilds the forward pass from current parameter values
// on a fresh tape and returns the scalar loss; when want_grad it also runs
// backward so gradients land in the store (zeroed here first).
//
// check_stride probes every stride-th coordinate of each parameter, with a
// per-parameter offset so different slices get coverage; 1 checks all.
template <typename T>
GradCheckResult finite_diff_check(ParamStore<T>& params,
                                  const std::function<double(bool)>& loss_fn, double eps,
                                  std::int64_t check_stride = 1) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("finite_diff_check: eps must lie in [1e-7, 1e-3]");
    if (check_stride < 1) throw std::invalid_argument("finite_diff_check: stride must be >= 1");

    params.zero_grads();
    loss_fn(true);

    std::vector<Tensor<T>> analytic;
    analytic.reserve(params.all().size());
    for (auto* p : params.all()) analytic.push_back(p->grad);

    GradCheckResult res;
    std::size_t pi = 0;
    for (auto* p : params.all()) {
        Tensor<T>& v = p->value;
        std::int64_t offset = static_cast<std::int64_t>(pi) % check_stride;
        for (std::int64_t i = offset; i < v.size(); i += check_stride) {
            T keep = v[i];
            v[i] = keep + static_cast<T>(eps);
            double up = loss_fn(false);
            v[i] = keep - static_cast<T>(eps);
            double dn = loss_fn(false);
            v[i] = keep;
            double num = (up - dn) / (2.0 * eps);
            double ana = static_cast<double>(analytic[pi][i]);
            double rel =
                std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
            ++res.checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = p->name;
                res.worst_index = i;
                res.analytic = ana;
                res.numeric = num;
            }
        }
        ++pi;
    }
    return res;
}

}  // namespace hgin
