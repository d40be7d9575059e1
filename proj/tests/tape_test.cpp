#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "hgin/gradcheck.hpp"
#include "hgin/params.hpp"
#include "hgin/rng.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

using namespace hgin;

namespace {

// Builds the loss on a fresh tape each call so finite differences see a pure
// function of the parameter store.
template <typename BuildFn>
double fd_max_err(ParamStore<double>& ps, BuildFn build, double eps = 1e-5,
                  std::int64_t stride = 1) {
    auto fn = [&](bool want_grad) {
        Tape64 t;
        Value loss = build(t);
        double v = t.value(loss)[0];
        if (want_grad) t.backward(loss);
        return v;
    };
    return finite_diff_check<double>(ps, fn, eps, stride).max_rel_err;
}

void fill_rng(Tensor64& t, std::uint64_t seed, double lo, double hi) {
    Rng r(seed);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.uniform(lo, hi);
}

// Reference convolution written the dumb way: materialize the zero-padded
// input, then quadruple loop. Gives a second route for checking the tape's
// fused implementation.
Tensor64 conv_oracle(const Tensor64& x, const Tensor64& w, const Tensor64* bias, int stride,
                     int dilation, bool same_pad) {
    int B = x.dim(0), h = x.dim(1), wd = x.dim(2), cin = x.dim(3);
    int k = w.dim(0), cout = w.dim(3);
    int eff = (k - 1) * dilation + 1;
    int oh, ow, py, px;
    if (same_pad) {
        oh = (h + stride - 1) / stride;
        ow = (wd + stride - 1) / stride;
        py = std::max((oh - 1) * stride + eff - h, 0) / 2;
        px = std::max((ow - 1) * stride + eff - wd, 0) / 2;
    } else {
        oh = (h - eff) / stride + 1;
        ow = (wd - eff) / stride + 1;
        py = px = 0;
    }
    Tensor64 padded({B, h + 2 * py + eff, wd + 2 * px + eff, cin});
    for (int b = 0; b < B; ++b)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < wd; ++xx)
                for (int c = 0; c < cin; ++c)
                    padded.at(b, y + py, xx + px, c) = x.at(b, y, xx, c);
    Tensor64 o({B, oh, ow, cout});
    for (int b = 0; b < B; ++b)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int co = 0; co < cout; ++co) {
                    double acc = bias ? (*bias)[co] : 0.0;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            for (int ci = 0; ci < cin; ++ci)
                                acc += padded.at(b, oy * stride + ky * dilation,
                                                 ox * stride + kx * dilation, ci) *
                                       w.data()[((static_cast<std::int64_t>(ky) * k + kx) * cin +
                                                 ci) *
                                                    cout +
                                                co];
                    o.at(b, oy, ox, co) = acc;
                }
    return o;
}

}  // namespace

TEST_CASE("pointwise 1x1 kernel scales every element") {
    Tape64 t;
    Value x = t.constant(Tensor64::ones({1, 3, 3, 1}));
    Value w = t.constant(Tensor64({1, 1, 1, 1}, {2.0}));
    Value b = t.constant(Tensor64::zeros({1}));
    Value y = t.conv2d(x, w, b, 1, 1, Pad::same);
    for (std::int64_t i = 0; i < t.value(y).size(); ++i) CHECK(t.value(y)[i] == 2.0);
}

TEST_CASE("sobel-x over a column ramp gives 8 everywhere valid") {
    Tensor64 ramp({1, 5, 5, 1});
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) ramp.at(0, y, x, 0) = static_cast<double>(x);
    Tensor64 sobel({3, 3, 1, 1}, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
    Tape64 t;
    Value y = t.conv2d(t.constant(ramp), t.constant(sobel), Value{}, 1, 1, Pad::valid);
    CHECK(t.value(y).shape() == std::vector<int>{1, 3, 3, 1});
    for (std::int64_t i = 0; i < 9; ++i) CHECK(t.value(y)[i] == 8.0);
}

TEST_CASE("identity 1x1 kernel is the identity map") {
    Tensor64 x({1, 4, 4, 2});
    fill_rng(x, 5, -2, 2);
    Tape64 t;
    Value y = t.conv2d(t.constant(x), t.constant(Tensor64::identity(2).reshaped({1, 1, 2, 2})),
                       Value{}, 1, 1, Pad::same);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(t.value(y)[i] == x[i]);
}

TEST_CASE("conv2d is linear in the input to machine precision") {
    Tensor64 x({1, 5, 5, 3});
    fill_rng(x, 6, -1, 1);
    Tensor64 w({3, 3, 3, 4});
    fill_rng(w, 7, -1, 1);
    Tensor64 ax = x;
    for (std::int64_t i = 0; i < ax.size(); ++i) ax[i] *= 3.0;
    Tape64 t;
    Value y1 = t.conv2d(t.constant(x), t.constant(w), Value{}, 1, 1, Pad::same);
    Value y2 = t.conv2d(t.constant(ax), t.constant(w), Value{}, 1, 1, Pad::same);
    for (std::int64_t i = 0; i < t.value(y1).size(); ++i)
        CHECK(t.value(y2)[i] == doctest::Approx(3.0 * t.value(y1)[i]).epsilon(1e-13));
}

TEST_CASE("conv2d matches the padded-loop reference across geometries") {
    struct Case {
        int h, w, cin, cout, k, stride, dil;
        bool same;
    };
    const Case cases[] = {
        {6, 6, 1, 1, 3, 1, 1, true},  {7, 5, 2, 3, 3, 2, 1, true},
        {8, 8, 3, 2, 3, 1, 2, true},  {9, 9, 2, 2, 3, 1, 4, true},
        {6, 6, 2, 2, 3, 1, 1, false}, {10, 7, 1, 2, 5, 2, 1, true},
        {5, 5, 2, 1, 1, 1, 1, true},  {12, 12, 2, 2, 5, 2, 1, false},
    };
    int idx = 0;
    for (const Case& c : cases) {
        Tensor64 x({2, c.h, c.w, c.cin});
        Tensor64 w({c.k, c.k, c.cin, c.cout});
        Tensor64 b({c.cout});
        fill_rng(x, 100 + idx, -1, 1);
        fill_rng(w, 200 + idx, -1, 1);
        fill_rng(b, 300 + idx, -1, 1);
        ++idx;
        Tensor64 want = conv_oracle(x, w, &b, c.stride, c.dil, c.same);
        Tape64 t;
        Value y = t.conv2d(t.constant(x), t.constant(w), t.constant(b), c.stride, c.dil,
                           c.same ? Pad::same : Pad::valid);
        REQUIRE(t.value(y).shape() == want.shape());
        for (std::int64_t i = 0; i < want.size(); ++i)
            CHECK(t.value(y)[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d rejects channel mismatch with both shapes in the message") {
    Tape64 t;
    Value x = t.constant(Tensor64::ones({1, 4, 4, 3}));
    Value w = t.constant(Tensor64::ones({3, 3, 2, 4}));
    CHECK_THROWS_WITH_AS(t.conv2d(x, w, Value{}, 1, 1, Pad::same),
                         doctest::Contains("c_in=2"), std::invalid_argument);
}

TEST_CASE("matmul identity, hand case, annihilation") {
    Tape64 t;
    Tensor64 a({2, 2}, {1, 2, 3, 4});
    Value va = t.constant(a);
    Value eye = t.constant(Tensor64::identity(2));
    Value r1 = t.matmul(eye, va);
    for (int i = 0; i < 4; ++i) CHECK(t.value(r1)[i] == a[i]);

    Value ones21 = t.constant(Tensor64({2, 1}, {1, 1}));
    Value r2 = t.matmul(va, ones21);
    CHECK(t.value(r2)[0] == 3.0);
    CHECK(t.value(r2)[1] == 7.0);

    Value z = t.constant(Tensor64::zeros({2, 3}));
    Value r3 = t.matmul(va, z);
    for (int i = 0; i < 6; ++i) CHECK(t.value(r3)[i] == 0.0);

    CHECK_THROWS_AS(t.matmul(va, t.constant(Tensor64::zeros({3, 1}))), std::invalid_argument);
}

TEST_CASE("elementwise forward values") {
    Tape64 t;
    Value x = t.constant(Tensor64({3}, {0.0, -3.0, -1.0}));
    CHECK(t.value(t.sigmoid(x))[0] == 0.5);
    CHECK(t.value(t.vabs(x))[1] == 3.0);
    CHECK(t.value(t.elu(x))[2] == doctest::Approx(std::expm1(-1.0)).epsilon(1e-12));
    CHECK(t.value(t.relu(x))[1] == 0.0);
    CHECK(t.value(t.leaky_relu(x, 0.2))[1] == doctest::Approx(-0.6));
    CHECK(t.value(t.softplus(t.constant(Tensor64::scalar(0.0))))[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(t.value(t.vtanh(t.constant(Tensor64::scalar(0.0))))[0] == 0.0);
}

TEST_CASE("abs backward uses slope sign with subgradient 0 at zero") {
    Tape64 t;
    ParamStore<double> ps;
    auto& p = ps.create("p", {3});
    p.value = Tensor64({3}, {-3.0, 0.0, 2.0});
    Value v = t.param(p);
    Value loss = t.sum(t.vabs(v));
    t.backward(loss);
    CHECK(p.grad[0] == -1.0);
    CHECK(p.grad[1] == 0.0);
    CHECK(p.grad[2] == 1.0);
}

TEST_CASE("global average pool examples") {
    Tape64 t;
    Value c = t.global_avg_pool(t.constant(Tensor64::full({2, 3, 3, 4}, 7.5)));
    for (std::int64_t i = 0; i < t.value(c).size(); ++i) CHECK(t.value(c)[i] == 7.5);

    Value m = t.global_avg_pool(t.constant(Tensor64({1, 2, 2, 1}, {1, 2, 3, 4})));
    CHECK(t.value(m)[0] == 2.5);

    Value z = t.global_avg_pool(t.constant(Tensor64::zeros({1, 4, 4, 2})));
    for (std::int64_t i = 0; i < t.value(z).size(); ++i) CHECK(t.value(z)[i] == 0.0);
}

TEST_CASE("upsample nearest examples") {
    Tape64 t;
    Tensor64 x({1, 2, 2, 1}, {1, 2, 3, 4});
    Value id = t.upsample_nearest(t.constant(x), 1);
    for (int i = 0; i < 4; ++i) CHECK(t.value(id)[i] == x[i]);

    Value five = t.upsample_nearest(t.constant(Tensor64::full({1, 1, 1, 1}, 5.0)), 2);
    CHECK(t.value(five).shape() == std::vector<int>{1, 2, 2, 1});
    for (int i = 0; i < 4; ++i) CHECK(t.value(five)[i] == 5.0);

    ParamStore<double> ps;
    auto& p = ps.create("px", {1, 1, 1, 1});
    p.value[0] = 3.0;
    Value loss = t.sum(t.upsample_nearest(t.param(p), 2));
    t.backward(loss);
    CHECK(p.grad[0] == 4.0);
}

TEST_CASE("backward of sum gives ones and of sum of squares gives 2p") {
    ParamStore<double> ps;
    auto& p = ps.create("p", {2});
    p.value = Tensor64({2}, {1.0, 2.0});

    Tape64 t1;
    t1.backward(t1.sum(t1.param(p)));
    CHECK(p.grad[0] == 1.0);
    CHECK(p.grad[1] == 1.0);

    ps.zero_grads();
    Tape64 t2;
    Value v = t2.param(p);
    t2.backward(t2.sum(t2.mul(v, v)));
    CHECK(p.grad[0] == 2.0);
    CHECK(p.grad[1] == 4.0);
}

TEST_CASE("grad of sum(matmul(A,B)) w.r.t. A is ones times B transpose") {
    ParamStore<double> ps;
    auto& a = ps.create("A", {2, 3});
    auto& b = ps.create("B", {3, 2});
    fill_rng(a.value, 21, -1, 1);
    fill_rng(b.value, 22, -1, 1);

    Tape64 t;
    t.backward(t.sum(t.matmul(t.param(a), t.param(b))));
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) {
            double want = b.value.at(k, 0) + b.value.at(k, 1);
            CHECK(a.grad.at(i, k) == doctest::Approx(want).epsilon(1e-12));
        }

    double err = fd_max_err(ps, [&](Tape64& t2) {
        return t2.sum(t2.matmul(t2.param(a), t2.param(b)));
    });
    CHECK(err < 1e-6);
}

TEST_CASE("backward requires a scalar loss") {
    Tape64 t;
    Value v = t.constant(Tensor64::ones({2, 2}));
    CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
}

TEST_CASE("gradient additivity: backward of a sum equals summed backwards") {
    ParamStore<double> ps;
    auto& p = ps.create("p", {4});
    fill_rng(p.value, 31, 0.5, 1.5);

    Tape64 ta;
    Value va = ta.param(p);
    ta.backward(ta.add(ta.sum(ta.mul(va, va)), ta.mean(ta.vexp(va))));
    Tensor64 combined = p.grad;

    ps.zero_grads();
    Tape64 tb;
    Value vb = tb.param(p);
    tb.backward(tb.sum(tb.mul(vb, vb)));
    Tape64 tc;
    Value vc = tc.param(p);
    tc.backward(tc.mean(tc.vexp(vc)));
    for (int i = 0; i < 4; ++i) CHECK(p.grad[i] == combined[i]);
}

TEST_CASE("channel-broadcast mul forward and backward") {
    ParamStore<double> ps;
    auto& img = ps.create("img", {1, 2, 2, 3});
    auto& mask = ps.create("mask", {1, 2, 2, 1});
    fill_rng(img.value, 41, -1, 1);
    fill_rng(mask.value, 42, 0.2, 0.9);

    Tape64 t;
    Value prod = t.mul(t.param(img), t.param(mask));
    CHECK(t.value(prod).shape() == img.value.shape());
    CHECK(t.value(prod).at(0, 1, 0, 2) ==
          doctest::Approx(img.value.at(0, 1, 0, 2) * mask.value.at(0, 1, 0, 0)).epsilon(1e-15));

    double err = fd_max_err(ps, [&](Tape64& t2) {
        return t2.sum(t2.mul(t2.param(img), t2.param(mask)));
    });
    CHECK(err < 1e-6);

    Tape64 t3;
    CHECK_THROWS_AS(t3.mul(t3.constant(Tensor64::ones({1, 2, 2, 3})),
                           t3.constant(Tensor64::ones({1, 2, 3, 1}))),
                    std::invalid_argument);
}

TEST_CASE("debug checks flag div and log domain errors") {
    Tape64 t;
    t.debug_checks = true;
    Value num = t.constant(Tensor64::ones({2}));
    Value zero = t.constant(Tensor64::zeros({2}));
    CHECK_THROWS_AS(t.div(num, zero), std::domain_error);
    CHECK_THROWS_AS(t.vlog(t.constant(Tensor64({1}, {-1.0}))), std::domain_error);

    Tape64 u;
    Value inf = u.div(u.constant(Tensor64::ones({1})), u.constant(Tensor64::zeros({1})));
    CHECK(std::isinf(u.value(inf)[0]));
}

TEST_CASE("pad replicate clamps to the border") {
    Tape64 t;
    Tensor64 x({1, 2, 2, 1}, {1, 2, 3, 4});
    Value p = t.pad_replicate(t.constant(x), 1);
    const Tensor64& o = t.value(p);
    CHECK(o.shape() == std::vector<int>{1, 4, 4, 1});
    CHECK(o.at(0, 0, 0, 0) == 1.0);
    CHECK(o.at(0, 0, 3, 0) == 2.0);
    CHECK(o.at(0, 3, 0, 0) == 3.0);
    CHECK(o.at(0, 3, 3, 0) == 4.0);
    CHECK(o.at(0, 1, 1, 0) == 1.0);
    CHECK(o.at(0, 0, 1, 0) == 1.0);
}

TEST_CASE("concat channels splits gradients back") {
    ParamStore<double> ps;
    auto& a = ps.create("a", {1, 2, 2, 2});
    auto& b = ps.create("b", {1, 2, 2, 1});
    fill_rng(a.value, 51, -1, 1);
    fill_rng(b.value, 52, -1, 1);
    Tape64 t;
    Value cat = t.concat_channels(t.param(a), t.param(b));
    CHECK(t.value(cat).shape() == std::vector<int>{1, 2, 2, 3});
    CHECK(t.value(cat).at(0, 1, 1, 2) == b.value.at(0, 1, 1, 0));
    double err = fd_max_err(ps, [&](Tape64& t2) {
        Value c = t2.concat_channels(t2.param(a), t2.param(b));
        return t2.sum(t2.mul(c, c));
    });
    CHECK(err < 1e-5);
}

TEST_CASE("select and concat along the batch axis round-trip") {
    ParamStore<double> ps;
    auto& x = ps.create("x", {3, 2, 2, 1});
    fill_rng(x.value, 61, -1, 1);
    Tape64 t;
    Value v = t.param(x);
    std::vector<Value> items;
    for (int i = 0; i < 3; ++i) items.push_back(t.select_batch(v, i));
    Value re = t.concat_batch(items);
    for (std::int64_t i = 0; i < x.value.size(); ++i) CHECK(t.value(re)[i] == x.value[i]);
    double err = fd_max_err(ps, [&](Tape64& t2) {
        Value v2 = t2.param(x);
        Value mid = t2.select_batch(v2, 1);
        return t2.sum(t2.mul(mid, mid));
    });
    CHECK(err < 1e-5);
}

TEST_CASE("finite differences report near-zero error for a linear function") {
    ParamStore<double> ps;
    auto& p = ps.create("p", {5});
    fill_rng(p.value, 71, -2, 2);
    double err = fd_max_err(ps, [&](Tape64& t) { return t.sum(t.param(p)); }, 1e-5);
    CHECK(err < 1e-10);
    CHECK_THROWS_AS(
        finite_diff_check<double>(ps, [](bool) { return 0.0; }, 1e-2),
        std::invalid_argument);
}

TEST_CASE("every differentiable op passes finite differences") {
    // inputs kept away from activation kinks so central differences are valid
    auto check_unary = [](const char* name, auto apply, double lo, double hi) {
        ParamStore<double> ps;
        auto& p = ps.create("p", {2, 3});
        fill_rng(p.value, fnv1a(name), lo, hi);
        double err = fd_max_err(ps, [&](Tape64& t) { return t.mean(apply(t, t.param(p))); });
        INFO(name);
        CHECK(err < 1e-4);
    };
    check_unary("vabs", [](Tape64& t, Value v) { return t.vabs(v); }, 0.3, 1.5);
    check_unary("vsqrt", [](Tape64& t, Value v) { return t.vsqrt(v); }, 0.5, 2.0);
    check_unary("vexp", [](Tape64& t, Value v) { return t.vexp(v); }, -1.0, 1.0);
    check_unary("vlog", [](Tape64& t, Value v) { return t.vlog(v); }, 0.5, 2.0);
    check_unary("relu", [](Tape64& t, Value v) { return t.relu(v); }, 0.3, 1.5);
    check_unary("leaky", [](Tape64& t, Value v) { return t.leaky_relu(v, 0.2); }, -1.5, -0.3);
    check_unary("elu", [](Tape64& t, Value v) { return t.elu(v); }, -1.5, -0.3);
    check_unary("sigmoid", [](Tape64& t, Value v) { return t.sigmoid(v); }, -2.0, 2.0);
    check_unary("vtanh", [](Tape64& t, Value v) { return t.vtanh(v); }, -2.0, 2.0);
    check_unary("softplus", [](Tape64& t, Value v) { return t.softplus(v); }, -2.0, 2.0);
    check_unary("scale", [](Tape64& t, Value v) { return t.scale(v, -1.7); }, -1.0, 1.0);
    check_unary("addsc", [](Tape64& t, Value v) { return t.add_scalar(v, 0.9); }, -1.0, 1.0);

    ParamStore<double> ps;
    auto& a = ps.create("a", {2, 3});
    auto& b = ps.create("b", {2, 3});
    fill_rng(a.value, 81, 0.5, 1.5);
    fill_rng(b.value, 82, 0.5, 1.5);
    auto binop = [&](auto op) {
        return fd_max_err(ps, [&](Tape64& t) {
            return t.mean(op(t, t.param(a), t.param(b)));
        });
    };
    CHECK(binop([](Tape64& t, Value x, Value y) { return t.add(x, y); }) < 1e-4);
    CHECK(binop([](Tape64& t, Value x, Value y) { return t.sub(x, y); }) < 1e-4);
    CHECK(binop([](Tape64& t, Value x, Value y) { return t.mul(x, y); }) < 1e-4);
    CHECK(binop([](Tape64& t, Value x, Value y) { return t.div(x, y); }) < 1e-4);

    ParamStore<double> ps2;
    auto& m = ps2.create("m", {3, 4});
    fill_rng(m.value, 83, -1, 1);
    double terr = fd_max_err(ps2, [&](Tape64& t) {
        Value tr = t.transpose(t.param(m));
        return t.sum(t.mul(tr, tr));
    });
    CHECK(terr < 1e-4);

    ParamStore<double> ps3;
    auto& d = ps3.create("d", {4});
    fill_rng(d.value, 84, 0.5, 1.5);
    double derr = fd_max_err(ps3, [&](Tape64& t) {
        Value dm = t.diag(t.param(d));
        return t.sum(t.matmul(dm, dm));
    });
    CHECK(derr < 1e-4);

    ParamStore<double> ps4;
    auto& x4 = ps4.create("x", {1, 4, 4, 2});
    auto& w4 = ps4.create("w", {3, 3, 2, 2});
    auto& b4 = ps4.create("bias", {2});
    fill_rng(x4.value, 85, -1, 1);
    fill_rng(w4.value, 86, -1, 1);
    fill_rng(b4.value, 87, -1, 1);
    double cerr = fd_max_err(ps4, [&](Tape64& t) {
        Value y = t.conv2d(t.param(x4), t.param(w4), t.param(b4), 1, 1, Pad::same);
        return t.mean(t.mul(y, y));
    });
    CHECK(cerr < 1e-4);
    double cerr2 = fd_max_err(ps4, [&](Tape64& t) {
        Value y = t.conv2d(t.param(x4), t.param(w4), t.param(b4), 2, 1, Pad::valid);
        return t.mean(t.mul(y, y));
    });
    CHECK(cerr2 < 1e-4);

    ParamStore<double> ps5;
    auto& x5 = ps5.create("x", {1, 3, 3, 2});
    fill_rng(x5.value, 88, -1, 1);
    double perr = fd_max_err(ps5, [&](Tape64& t) {
        Value p = t.pad_replicate(t.param(x5), 1);
        return t.mean(t.mul(p, p));
    });
    CHECK(perr < 1e-4);
    double gerr = fd_max_err(ps5, [&](Tape64& t) {
        Value g = t.global_avg_pool(t.param(x5));
        return t.sum(t.mul(g, g));
    });
    CHECK(gerr < 1e-4);
    double uerr = fd_max_err(ps5, [&](Tape64& t) {
        Value u = t.upsample_nearest(t.param(x5), 2);
        return t.mean(t.mul(u, u));
    });
    CHECK(uerr < 1e-4);
    double rerr = fd_max_err(ps5, [&](Tape64& t) {
        Value rs = t.reshape(t.param(x5), {2, 9});
        return t.sum(t.mul(rs, rs));
    });
    CHECK(rerr < 1e-4);
}

TEST_CASE("forward and backward are bitwise deterministic") {
    auto run = [](Tensor64* grads_out) {
        ParamStore<double> ps;
        auto& w = ps.create("w", {3, 3, 2, 4});
        auto& x = ps.create("x", {1, 6, 6, 2});
        init_kaiming_uniform(w, conv_fan_in(w.value.shape()), 1234);
        fill_rng(x.value, 4321, -1, 1);
        Tape64 t;
        Value y = t.conv2d(t.param(x), t.param(w), Value{}, 1, 2, Pad::same);
        Value loss = t.mean(t.mul(t.sigmoid(y), t.elu(y)));
        t.backward(loss);
        Tensor64 cat({static_cast<int>(w.grad.size() + x.grad.size() + 1)});
        std::int64_t j = 0;
        cat[j++] = t.value(loss)[0];
        for (std::int64_t i = 0; i < w.grad.size(); ++i) cat[j++] = w.grad[i];
        for (std::int64_t i = 0; i < x.grad.size(); ++i) cat[j++] = x.grad[i];
        *grads_out = cat;
    };
    Tensor64 a, b;
    run(&a);
    run(&b);
    REQUIRE(a.size() == b.size());
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("detach cuts gradient flow") {
    ParamStore<double> ps;
    auto& p = ps.create("p", {3});
    fill_rng(p.value, 91, 0.5, 1.5);
    Tape64 t;
    Value v = t.param(p);
    Value frozen = t.constant(t.detach(v));
    t.backward(t.sum(t.mul(frozen, frozen)));
    for (int i = 0; i < 3; ++i) CHECK(p.grad[i] == 0.0);
}
