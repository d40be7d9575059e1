#pragma once

// Reverse-mode autodiff on an append-only tape. Every forward op records a
// node holding its output and a backward closure; backward() walks nodes in
// strict reverse recording order (which is a reverse topological order) and
// accumulates into Parameter::grad at the leaves.
//
// Determinism contract: all reductions run left-to-right in index order on a
// single thread, so forward and backward are bitwise reproducible for fixed
// inputs. Tapes must not be shared between concurrent passes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/params.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

enum class Pad { same, valid };

struct Value {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
  public:
    // Debug guards for div-by-zero / log-of-nonpositive. Off by default:
    // infinities propagate, matching release-mode training behavior.
    bool debug_checks = false;

    Value constant(Tensor<T> v) { return push(std::move(v), false); }

    Value param(Parameter<T>& p) {
        Value v = push(Tensor<T>(p.value), true);
        Parameter<T>* pp = &p;
        std::int32_t self = v.id;
        set_back(v, [self, pp](Tape& t) { pp->grad.add_inplace(t.nodes_[self].grad); });
        return v;
    }

    const Tensor<T>& value(Value v) const { return nodes_.at(check(v)).out; }

    // Copy of the value with no tape history; re-enter via constant().
    Tensor<T> detach(Value v) const { return nodes_.at(check(v)).out; }

    // Gradient of the last backward() w.r.t. an intermediate value. Empty if
    // the value was not reached.
    const Tensor<T>& grad(Value v) const { return nodes_.at(check(v)).grad; }

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    // ---- elementwise binary ----

    Value add(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        require_same_shape("add", av, bv);
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            if (t.needs(a)) t.grad_buf(a).add_inplace(g);
            if (t.needs(b)) t.grad_buf(b).add_inplace(g);
        });
        return r;
    }

    Value sub(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        require_same_shape("sub", av, bv);
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            if (t.needs(a)) t.grad_buf(a).add_inplace(g);
            if (t.needs(b)) {
                Tensor<T>& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
        return r;
    }

    // Elementwise product. Also accepts a trailing-channel broadcast where
    // one operand has channel dim 1 and all leading dims agree (mask times
    // image); no other broadcasting exists in this library.
    Value mul(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        bool bcast = false;
        if (!av.same_shape(bv)) {
            if (!channel_broadcastable(av, bv))
                throw std::invalid_argument("mul shape mismatch " + av.shape_str() + " vs " +
                                            bv.shape_str());
            bcast = true;
        }
        int ca = av.dim(av.rank() - 1);
        int cb = bv.dim(bv.rank() - 1);
        int co = std::max(ca, cb);
        std::int64_t rows = av.size() / ca;
        Tensor<T> o(ca >= cb ? av.shape() : bv.shape());
        if (!bcast) {
            for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
        } else {
            for (std::int64_t rw = 0; rw < rows; ++rw)
                for (int c = 0; c < co; ++c)
                    o[rw * co + c] = av[rw * ca + (ca == 1 ? 0 : c)] * bv[rw * cb + (cb == 1 ? 0 : c)];
        }
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b, ca, cb, co, rows](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            const Tensor<T>& av2 = t.out(a);
            const Tensor<T>& bv2 = t.out(b);
            if (t.needs(a)) {
                Tensor<T>& ga = t.grad_buf(a);
                for (std::int64_t rw = 0; rw < rows; ++rw)
                    for (int c = 0; c < co; ++c)
                        ga[rw * ca + (ca == 1 ? 0 : c)] +=
                            g[rw * co + c] * bv2[rw * cb + (cb == 1 ? 0 : c)];
            }
            if (t.needs(b)) {
                Tensor<T>& gb = t.grad_buf(b);
                for (std::int64_t rw = 0; rw < rows; ++rw)
                    for (int c = 0; c < co; ++c)
                        gb[rw * cb + (cb == 1 ? 0 : c)] +=
                            g[rw * co + c] * av2[rw * ca + (ca == 1 ? 0 : c)];
            }
        });
        return r;
    }

    Value div(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        require_same_shape("div", av, bv);
        if (debug_checks)
            for (std::int64_t i = 0; i < bv.size(); ++i)
                if (bv[i] == T(0)) throw std::domain_error("div: zero divisor at index " +
                                                           std::to_string(i));
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] / bv[i];
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            const Tensor<T>& av2 = t.out(a);
            const Tensor<T>& bv2 = t.out(b);
            if (t.needs(a)) {
                Tensor<T>& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv2[i];
            }
            if (t.needs(b)) {
                Tensor<T>& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i)
                    gb[i] -= g[i] * av2[i] / (bv2[i] * bv2[i]);
            }
        });
        return r;
    }

    Value scale(Value a, T s) {
        const Tensor<T>& av = out(a);
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] * s;
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, s](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        });
        return r;
    }

    Value add_scalar(Value a, T s) {
        const Tensor<T>& av = out(a);
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = av[i] + s;
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a](Tape& t) {
            if (t.needs(a)) t.grad_buf(a).add_inplace(t.nodes_[r.id].grad);
        });
        return r;
    }

    // ---- elementwise unary ----
    // Backward rules read the op's input and output straight off the tape;
    // nothing else is saved. abs uses subgradient 0 at exactly 0, relu and
    // leaky_relu take the x<=0 branch value there.

    Value vabs(Value a) {
        return unary(a, [](T x) { return std::abs(x); },
                     [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
    }

    Value vsqrt(Value a) {
        return unary(a, [](T x) { return std::sqrt(x); },
                     [](T, T y) { return T(0.5) / y; });
    }

    Value vexp(Value a) {
        return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
    }

    Value vlog(Value a) {
        if (debug_checks) {
            const Tensor<T>& av = out(a);
            for (std::int64_t i = 0; i < av.size(); ++i)
                if (av[i] <= T(0))
                    throw std::domain_error("log: non-positive input at index " +
                                            std::to_string(i));
        }
        return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
    }

    Value relu(Value a) {
        return unary(a, [](T x) { return x > T(0) ? x : T(0); },
                     [](T x, T) { return x > T(0) ? T(1) : T(0); });
    }

    Value leaky_relu(Value a, T slope) {
        return unary(a, [slope](T x) { return x > T(0) ? x : slope * x; },
                     [slope](T x, T) { return x > T(0) ? T(1) : slope; });
    }

    // alpha = 1
    Value elu(Value a) {
        return unary(a, [](T x) { return x > T(0) ? x : T(std::expm1(x)); },
                     [](T x, T y) { return x > T(0) ? T(1) : y + T(1); });
    }

    Value sigmoid(Value a) {
        return unary(a, [](T x) { return stable_sigmoid(x); },
                     [](T, T y) { return y * (T(1) - y); });
    }

    Value vtanh(Value a) {
        return unary(a, [](T x) { return std::tanh(x); },
                     [](T, T y) { return T(1) - y * y; });
    }

    // log(1 + e^x), overflow-safe
    Value softplus(Value a) {
        return unary(a,
                     [](T x) {
                         T m = x > T(0) ? x : T(0);
                         return m + T(std::log1p(std::exp(-std::abs(x))));
                     },
                     [](T x, T) { return stable_sigmoid(x); });
    }

    // ---- reductions ----

    Value sum(Value a) {
        const Tensor<T>& av = out(a);
        T acc = T(0);
        for (std::int64_t i = 0; i < av.size(); ++i) acc += av[i];
        Value r = push(Tensor<T>::scalar(acc), needs(a));
        set_back(r, [r, a](Tape& t) {
            if (!t.needs(a)) return;
            T g = t.nodes_[r.id].grad[0];
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
        return r;
    }

    Value mean(Value a) {
        const Tensor<T>& av = out(a);
        T acc = T(0);
        for (std::int64_t i = 0; i < av.size(); ++i) acc += av[i];
        T inv = T(1) / static_cast<T>(av.size());
        Value r = push(Tensor<T>::scalar(acc * inv), needs(a));
        set_back(r, [r, a, inv](Tape& t) {
            if (!t.needs(a)) return;
            T g = t.nodes_[r.id].grad[0] * inv;
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
        return r;
    }

    // ---- linear algebra ----

    Value matmul(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
            throw std::invalid_argument("matmul shape mismatch " + av.shape_str() + " x " +
                                        bv.shape_str());
        int m = av.dim(0), k = av.dim(1), n = bv.dim(1);
        Tensor<T> o({m, n});
        matmul_into(o.data(), av.data(), bv.data(), m, k, n, false, false);
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b, m, k, n](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            if (t.needs(a))  // gA += g . B^T
                matmul_into(t.grad_buf(a).data(), g.data(), t.out(b).data(), m, n, k, false, true);
            if (t.needs(b))  // gB += A^T . g
                matmul_into(t.grad_buf(b).data(), t.out(a).data(), g.data(), k, m, n, true, false);
        });
        return r;
    }

    Value transpose(Value a) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 2) throw std::invalid_argument("transpose expects rank-2");
        int m = av.dim(0), n = av.dim(1);
        Tensor<T> o({n, m});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) o.at(j, i) = av.at(i, j);
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, m, n](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
        });
        return r;
    }

    // vector [n] -> diagonal matrix [n,n]
    Value diag(Value a) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 1) throw std::invalid_argument("diag expects rank-1");
        int n = av.dim(0);
        Tensor<T> o({n, n});
        for (int i = 0; i < n; ++i) o.at(i, i) = av[i];
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, n](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (int i = 0; i < n; ++i) ga[i] += g.at(i, i);
        });
        return r;
    }

    Value reshape(Value a, std::vector<int> shape) {
        const Tensor<T>& av = out(a);
        Tensor<T> o = av.reshaped(std::move(shape));
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
        return r;
    }

    // ---- convolution & spatial ops ----

    // Cross-correlation with dilation on [b,h,w,c_in] by [k,k,c_in,c_out].
    // same-padding zero-fills (TF convention: floor(pad/2) on top/left).
    // bias is optional; pass Value{} for none.
    Value conv2d(Value x, Value w, Value bias, int stride, int dilation, Pad pad) {
        const Tensor<T>& xv = out(x);
        const Tensor<T>& wv = out(w);
        if (xv.rank() != 4 || wv.rank() != 4)
            throw std::invalid_argument("conv2d expects rank-4 input and kernel");
        if (wv.dim(0) != wv.dim(1)) throw std::invalid_argument("conv2d kernel must be square");
        if (wv.dim(2) != xv.dim(3))
            throw std::invalid_argument("conv2d channel mismatch: kernel " + wv.shape_str() +
                                        " expects c_in=" + std::to_string(wv.dim(2)) +
                                        ", input " + xv.shape_str() + " has c=" +
                                        std::to_string(xv.dim(3)));
        if (stride < 1 || dilation < 1)
            throw std::invalid_argument("conv2d: stride and dilation must be >= 1");
        const bool has_bias = bias.valid();
        if (has_bias) {
            const Tensor<T>& bv = out(bias);
            if (bv.rank() != 1 || bv.dim(0) != wv.dim(3))
                throw std::invalid_argument("conv2d bias shape " + bv.shape_str() +
                                            " does not match c_out=" + std::to_string(wv.dim(3)));
        }
        ConvGeom geo = conv_geometry(xv.dim(1), xv.dim(2), wv.dim(0), stride, dilation, pad);
        int B = xv.dim(0), cin = xv.dim(3), cout = wv.dim(3), k = wv.dim(0);
        Tensor<T> o({B, geo.oh, geo.ow, cout});
        const T* bptr = has_bias ? out(bias).data() : nullptr;
        conv2d_forward(o, xv, wv, bptr, geo, k, cin, cout, stride, dilation);
        Value r = push(std::move(o), needs(x) || needs(w) || (has_bias && needs(bias)));
        set_back(r, [r, x, w, bias, has_bias, geo, k, cin, cout, stride, dilation, B](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            const Tensor<T>& xv2 = t.out(x);
            const Tensor<T>& wv2 = t.out(w);
            Tensor<T>* gx = t.needs(x) ? &t.grad_buf(x) : nullptr;
            Tensor<T>* gw = t.needs(w) ? &t.grad_buf(w) : nullptr;
            conv2d_backward(g, xv2, wv2, gx, gw, geo, k, cin, cout, stride, dilation, B);
            if (has_bias && t.needs(bias)) {
                Tensor<T>& gb = t.grad_buf(bias);
                std::int64_t pixels = g.size() / cout;
                for (std::int64_t p = 0; p < pixels; ++p)
                    for (int c = 0; c < cout; ++c) gb[c] += g[p * cout + c];
            }
        });
        return r;
    }

    Value global_avg_pool(Value a) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 4) throw std::invalid_argument("global_avg_pool expects rank-4");
        int B = av.dim(0), h = av.dim(1), w = av.dim(2), c = av.dim(3);
        T inv = T(1) / static_cast<T>(h * w);
        Tensor<T> o({B, 1, 1, c});
        for (int b = 0; b < B; ++b) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int ch = 0; ch < c; ++ch) o.at(b, 0, 0, ch) += av.at(b, y, x, ch);
            for (int ch = 0; ch < c; ++ch) o.at(b, 0, 0, ch) *= inv;
        }
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, B, h, w, c, inv](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (int b = 0; b < B; ++b)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        for (int ch = 0; ch < c; ++ch)
                            ga.at(b, y, x, ch) += g.at(b, 0, 0, ch) * inv;
        });
        return r;
    }

    Value upsample_nearest(Value a, int factor) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 4) throw std::invalid_argument("upsample_nearest expects rank-4");
        if (factor < 1) throw std::invalid_argument("upsample factor must be >= 1");
        int B = av.dim(0), h = av.dim(1), w = av.dim(2), c = av.dim(3);
        Tensor<T> o({B, h * factor, w * factor, c});
        for (int b = 0; b < B; ++b)
            for (int y = 0; y < h * factor; ++y)
                for (int x = 0; x < w * factor; ++x)
                    for (int ch = 0; ch < c; ++ch)
                        o.at(b, y, x, ch) = av.at(b, y / factor, x / factor, ch);
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, B, h, w, c, factor](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (int b = 0; b < B; ++b)
                for (int y = 0; y < h * factor; ++y)
                    for (int x = 0; x < w * factor; ++x)
                        for (int ch = 0; ch < c; ++ch)
                            ga.at(b, y / factor, x / factor, ch) += g.at(b, y, x, ch);
        });
        return r;
    }

    Value concat_channels(Value a, Value b) {
        const Tensor<T>& av = out(a);
        const Tensor<T>& bv = out(b);
        if (av.rank() != 4 || bv.rank() != 4 || av.dim(0) != bv.dim(0) ||
            av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
            throw std::invalid_argument("concat_channels spatial mismatch " + av.shape_str() +
                                        " vs " + bv.shape_str());
        int ca = av.dim(3), cb = bv.dim(3);
        std::int64_t rows = av.size() / ca;
        Tensor<T> o({av.dim(0), av.dim(1), av.dim(2), ca + cb});
        for (std::int64_t rw = 0; rw < rows; ++rw) {
            for (int c = 0; c < ca; ++c) o[rw * (ca + cb) + c] = av[rw * ca + c];
            for (int c = 0; c < cb; ++c) o[rw * (ca + cb) + ca + c] = bv[rw * cb + c];
        }
        Value r = push(std::move(o), needs(a) || needs(b));
        set_back(r, [r, a, b, ca, cb, rows](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            if (t.needs(a)) {
                Tensor<T>& ga = t.grad_buf(a);
                for (std::int64_t rw = 0; rw < rows; ++rw)
                    for (int c = 0; c < ca; ++c) ga[rw * ca + c] += g[rw * (ca + cb) + c];
            }
            if (t.needs(b)) {
                Tensor<T>& gb = t.grad_buf(b);
                for (std::int64_t rw = 0; rw < rows; ++rw)
                    for (int c = 0; c < cb; ++c) gb[rw * cb + c] += g[rw * (ca + cb) + ca + c];
            }
        });
        return r;
    }

    // Single batch item as [1, h, w, c].
    Value select_batch(Value a, int index) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 4 || index < 0 || index >= av.dim(0))
            throw std::invalid_argument("select_batch: bad index");
        std::int64_t stride_b = av.size() / av.dim(0);
        Tensor<T> o({1, av.dim(1), av.dim(2), av.dim(3)});
        for (std::int64_t i = 0; i < stride_b; ++i) o[i] = av[index * stride_b + i];
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, index, stride_b](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < stride_b; ++i) ga[index * stride_b + i] += g[i];
        });
        return r;
    }

    // Stack [1,h,w,c] items along the batch axis.
    Value concat_batch(const std::vector<Value>& items) {
        if (items.empty()) throw std::invalid_argument("concat_batch: empty list");
        const Tensor<T>& first = out(items[0]);
        if (first.rank() != 4 || first.dim(0) != 1)
            throw std::invalid_argument("concat_batch expects [1,h,w,c] items");
        std::int64_t stride_b = first.size();
        bool any = false;
        for (Value v : items) {
            if (!out(v).same_shape(first))
                throw std::invalid_argument("concat_batch shape mismatch");
            any = any || needs(v);
        }
        int n = static_cast<int>(items.size());
        Tensor<T> o({n, first.dim(1), first.dim(2), first.dim(3)});
        for (int b = 0; b < n; ++b) {
            const Tensor<T>& item = out(items[b]);
            for (std::int64_t i = 0; i < stride_b; ++i) o[b * stride_b + i] = item[i];
        }
        Value r = push(std::move(o), any);
        std::vector<Value> saved = items;
        set_back(r, [r, saved, stride_b](Tape& t) {
            const Tensor<T>& g = t.nodes_[r.id].grad;
            for (std::size_t b = 0; b < saved.size(); ++b) {
                if (!t.needs(saved[b])) continue;
                Tensor<T>& gi = t.grad_buf(saved[b]);
                for (std::int64_t i = 0; i < stride_b; ++i)
                    gi[i] += g[static_cast<std::int64_t>(b) * stride_b + i];
            }
        });
        return r;
    }

    // Clamp-to-edge spatial padding by n pixels on each side.
    Value pad_replicate(Value a, int n) {
        const Tensor<T>& av = out(a);
        if (av.rank() != 4) throw std::invalid_argument("pad_replicate expects rank-4");
        int B = av.dim(0), h = av.dim(1), w = av.dim(2), c = av.dim(3);
        Tensor<T> o({B, h + 2 * n, w + 2 * n, c});
        auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
        for (int b = 0; b < B; ++b)
            for (int y = 0; y < h + 2 * n; ++y)
                for (int x = 0; x < w + 2 * n; ++x) {
                    int sy = clampi(y - n, 0, h - 1);
                    int sx = clampi(x - n, 0, w - 1);
                    for (int ch = 0; ch < c; ++ch) o.at(b, y, x, ch) = av.at(b, sy, sx, ch);
                }
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, B, h, w, c, n](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            Tensor<T>& ga = t.grad_buf(a);
            auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
            for (int b = 0; b < B; ++b)
                for (int y = 0; y < h + 2 * n; ++y)
                    for (int x = 0; x < w + 2 * n; ++x) {
                        int sy = clampi(y - n, 0, h - 1);
                        int sx = clampi(x - n, 0, w - 1);
                        for (int ch = 0; ch < c; ++ch)
                            ga.at(b, sy, sx, ch) += g.at(b, y, x, ch);
                    }
        });
        return r;
    }

    // ---- backward ----

    // Seeds the scalar loss with gradient 1 and walks the tape backwards.
    // Parameter gradients accumulate; the caller zeroes them between steps.
    void backward(Value loss) {
        const Tensor<T>& lv = out(loss);
        if (lv.size() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " + lv.shape_str());
        for (auto& n : nodes_) n.grad = Tensor<T>();
        nodes_[loss.id].grad = Tensor<T>::scalar(T(1));
        for (std::int32_t id = loss.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.empty() || !n.back) continue;
            n.back->run(*this);
        }
    }

    bool needs(Value v) const { return nodes_.at(check(v)).requires_grad; }

  private:
    struct ConvGeom {
        int oh, ow, pad_y, pad_x;
    };

    // Hand-rolled type erasure for backward closures. gcc 11 miscompiles
    // std::function built from lambdas local to a class-template member
    // ("used but never defined"), so the tape dispatches through a tiny
    // virtual holder instead.
    struct BackBase {
        virtual ~BackBase() = default;
        virtual void run(Tape& t) = 0;
    };
    template <typename F>
    struct BackHolder final : BackBase {
        F fn;
        explicit BackHolder(F f) : fn(std::move(f)) {}
        void run(Tape& t) override { fn(t); }
    };

    struct Node {
        Tensor<T> out;
        Tensor<T> grad;
        std::unique_ptr<BackBase> back;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;

    static T stable_sigmoid(T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        T e = std::exp(x);
        return e / (T(1) + e);
    }

    std::int32_t check(Value v) const {
        if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
            throw std::out_of_range("invalid tape value");
        return v.id;
    }

    const Tensor<T>& out(Value v) const { return nodes_.at(check(v)).out; }

    Tensor<T>& grad_buf(Value v) {
        Node& n = nodes_[check(v)];
        if (n.grad.empty()) n.grad = Tensor<T>(n.out.shape());
        return n.grad;
    }

    Value push(Tensor<T> out_tensor, bool req) {
        nodes_.push_back(Node{std::move(out_tensor), Tensor<T>(), nullptr, req});
        return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
    }

    template <typename F>
    void set_back(Value v, F fn) {
        if (nodes_[v.id].requires_grad)
            nodes_[v.id].back = std::make_unique<BackHolder<F>>(std::move(fn));
    }

    template <typename Fwd, typename Bwd>
    Value unary(Value a, Fwd fwd, Bwd dydx) {
        const Tensor<T>& av = out(a);
        Tensor<T> o(av.shape());
        for (std::int64_t i = 0; i < o.size(); ++i) o[i] = fwd(av[i]);
        Value r = push(std::move(o), needs(a));
        set_back(r, [r, a, dydx](Tape& t) {
            if (!t.needs(a)) return;
            const Tensor<T>& g = t.nodes_[r.id].grad;
            const Tensor<T>& x = t.out(a);
            const Tensor<T>& y = t.nodes_[r.id].out;
            Tensor<T>& ga = t.grad_buf(a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dydx(x[i], y[i]);
        });
        return r;
    }

    static void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
        if (!a.same_shape(b))
            throw std::invalid_argument(std::string(op) + " shape mismatch " + a.shape_str() +
                                        " vs " + b.shape_str());
    }

    static bool channel_broadcastable(const Tensor<T>& a, const Tensor<T>& b) {
        if (a.rank() != b.rank() || a.rank() < 1) return false;
        for (int i = 0; i + 1 < a.rank(); ++i)
            if (a.dim(i) != b.dim(i)) return false;
        int ca = a.dim(a.rank() - 1), cb = b.dim(b.rank() - 1);
        return ca == cb || ca == 1 || cb == 1;
    }

    // C += (opA ? A^T : A) . (opB ? B^T : B), where the untransposed A is
    // [m,k] and B is [k,n]. Fixed i,k,j loop order keeps per-element
    // accumulation strictly left-to-right in k.
    static void matmul_into(T* c, const T* a, const T* b, int m, int k, int n, bool ta, bool tb) {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::int64_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                T av = ta ? a[static_cast<std::int64_t>(kk) * m + i]
                          : a[static_cast<std::int64_t>(i) * k + kk];
                if (!tb) {
                    const T* brow = b + static_cast<std::int64_t>(kk) * n;
                    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
                } else {
                    const T* bcol = b + kk;
                    for (int j = 0; j < n; ++j)
                        crow[j] += av * bcol[static_cast<std::int64_t>(j) * k];
                }
            }
        }
    }

    static ConvGeom conv_geometry(int h, int w, int k, int stride, int dilation, Pad pad) {
        int eff = (k - 1) * dilation + 1;
        ConvGeom g{};
        if (pad == Pad::same) {
            g.oh = (h + stride - 1) / stride;
            g.ow = (w + stride - 1) / stride;
            int ph = std::max((g.oh - 1) * stride + eff - h, 0);
            int pw = std::max((g.ow - 1) * stride + eff - w, 0);
            g.pad_y = ph / 2;
            g.pad_x = pw / 2;
        } else {
            if (h < eff || w < eff)
                throw std::invalid_argument("conv2d valid: input smaller than effective kernel");
            g.oh = (h - eff) / stride + 1;
            g.ow = (w - eff) / stride + 1;
            g.pad_y = g.pad_x = 0;
        }
        return g;
    }

    static void conv2d_forward(Tensor<T>& o, const Tensor<T>& x, const Tensor<T>& w,
                               const T* bias, ConvGeom geo, int k, int cin, int cout, int stride,
                               int dilation) {
        int B = x.dim(0), h = x.dim(1), wd = x.dim(2);
        std::vector<T> acc(static_cast<std::size_t>(cout));
        for (int b = 0; b < B; ++b)
            for (int oy = 0; oy < geo.oh; ++oy)
                for (int ox = 0; ox < geo.ow; ++ox) {
                    if (bias)
                        for (int c = 0; c < cout; ++c) acc[c] = bias[c];
                    else
                        std::fill(acc.begin(), acc.end(), T(0));
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride - geo.pad_y + ky * dilation;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride - geo.pad_x + kx * dilation;
                            if (ix < 0 || ix >= wd) continue;
                            const T* px = &x.at(b, iy, ix, 0);
                            const T* kp = w.data() + (static_cast<std::int64_t>(ky) * k + kx) *
                                                         cin * cout;
                            for (int ci = 0; ci < cin; ++ci) {
                                T xv = px[ci];
                                const T* kr = kp + static_cast<std::int64_t>(ci) * cout;
                                for (int co = 0; co < cout; ++co) acc[co] += xv * kr[co];
                            }
                        }
                    }
                    T* op = &o.at(b, oy, ox, 0);
                    for (int c = 0; c < cout; ++c) op[c] = acc[c];
                }
    }

    static void conv2d_backward(const Tensor<T>& g, const Tensor<T>& x, const Tensor<T>& w,
                                Tensor<T>* gx, Tensor<T>* gw, ConvGeom geo, int k, int cin,
                                int cout, int stride, int dilation, int B) {
        int h = x.dim(1), wd = x.dim(2);
        for (int b = 0; b < B; ++b)
            for (int oy = 0; oy < geo.oh; ++oy)
                for (int ox = 0; ox < geo.ow; ++ox) {
                    const T* gp = &g.at(b, oy, ox, 0);
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride - geo.pad_y + ky * dilation;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride - geo.pad_x + kx * dilation;
                            if (ix < 0 || ix >= wd) continue;
                            const T* px = &x.at(b, iy, ix, 0);
                            const T* kp = w.data() + (static_cast<std::int64_t>(ky) * k + kx) *
                                                         cin * cout;
                            T* gxp = gx ? &gx->at(b, iy, ix, 0) : nullptr;
                            T* gwp = gw ? gw->data() + (static_cast<std::int64_t>(ky) * k + kx) *
                                                           cin * cout
                                        : nullptr;
                            for (int ci = 0; ci < cin; ++ci) {
                                const T* kr = kp + static_cast<std::int64_t>(ci) * cout;
                                if (gxp) {
                                    T s = T(0);
                                    for (int co = 0; co < cout; ++co) s += kr[co] * gp[co];
                                    gxp[ci] += s;
                                }
                                if (gwp) {
                                    T xv = px[ci];
                                    T* gr = gwp + static_cast<std::int64_t>(ci) * cout;
                                    for (int co = 0; co < cout; ++co) gr[co] += xv * gp[co];
                                }
                            }
                        }
                    }
                }
    }
};

using Tape64 = Tape<double>;
using Tape32 = Tape<float>;

}  // namespace hgin
