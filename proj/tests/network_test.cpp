#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "hgin/gradcheck.hpp"
#include "hgin/network.hpp"
#include "hgin/params.hpp"
#include "hgin/rng.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

using namespace hgin;

namespace {

void fill_rng(Tensor64& t, std::uint64_t seed, double lo, double hi) {
    Rng r(seed);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.uniform(lo, hi);
}

std::uint64_t hash_tensor(const Tensor64& t) {
    std::uint64_t h = kFnvOffset;
    for (std::int64_t i = 0; i < t.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &t[i], sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= kFnvPrime;
        }
    }
    return h;
}

// small config so forward passes stay cheap
NetworkConfig tiny_config(int res, int bc) {
    NetworkConfig cfg;
    cfg.base_channels = bc;
    cfg.input_resolution = res;
    cfg.hypergraph.window = 3;
    return cfg;
}

Tensor64 checker_mask(int b, int res) {
    Tensor64 m({b, res, res, 1});
    for (int bi = 0; bi < b; ++bi)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                m.at(bi, y, x, 0) = (y >= res / 4 && y < 3 * res / 4 && x >= res / 4 &&
                                     x < 3 * res / 4)
                                        ? 1.0
                                        : 0.0;
    return m;
}

}  // namespace

TEST_CASE("zero gating kernel halves the activated features exactly") {
    ParamStore<double> ps;
    GatedConvSpec spec;
    spec.kernel = 3;
    spec.c_out = 4;
    spec.act = Act::elu;
    auto stack = make_gated_stack(ps, "g", 3, {spec}, true);
    for (auto* p : ps.all()) fill_rng(p->value, fnv1a(p->name), -1, 1);
    ps.at("g.l0.g_w").value.fill(0.0);
    ps.at("g.l0.g_b").value.fill(0.0);

    Tensor64 x({1, 5, 5, 3});
    fill_rng(x, 3, -1, 1);
    Tape64 t;
    Value xin = t.constant(x);
    Value out = gated_conv(t, xin, stack[0]);
    Value feats = t.elu(t.conv2d(xin, t.param(*stack[0].f_w), t.param(*stack[0].f_b), 1, 1,
                                 Pad::same));
    const Tensor64& o = t.value(out);
    const Tensor64& f = t.value(feats);
    for (std::int64_t i = 0; i < o.size(); ++i) CHECK(o[i] == 0.5 * f[i]);
}

TEST_CASE("zero feature kernel with elu kills the output") {
    ParamStore<double> ps;
    GatedConvSpec spec;
    spec.kernel = 3;
    spec.c_out = 2;
    auto stack = make_gated_stack(ps, "g", 2, {spec}, true);
    for (auto* p : ps.all()) fill_rng(p->value, fnv1a(p->name), -1, 1);
    ps.at("g.l0.f_w").value.fill(0.0);
    ps.at("g.l0.f_b").value.fill(0.0);

    Tensor64 x({1, 4, 4, 2});
    fill_rng(x, 4, -1, 1);
    Tape64 t;
    const Tensor64& o = t.value(gated_conv(t, t.constant(x), stack[0]));
    for (std::int64_t i = 0; i < o.size(); ++i) CHECK(o[i] == 0.0);
}

TEST_CASE("gated conv gradients pass finite differences") {
    ParamStore<double> ps;
    auto& xin = ps.create("x", {1, 8, 8, 4});
    GatedConvSpec spec;
    spec.kernel = 3;
    spec.c_out = 3;
    auto stack = make_gated_stack(ps, "g", 4, {spec}, true);
    for (auto* p : ps.all()) fill_rng(p->value, mix_seed(11, p->name), -0.5, 0.5);

    auto fn = [&](bool want_grad) {
        Tape64 t;
        Value out = gated_conv(t, t.param(xin), stack[0]);
        Value loss = t.mean(t.mul(out, out));
        double v = t.value(loss)[0];
        if (want_grad) t.backward(loss);
        return v;
    };
    GradCheckResult res = finite_diff_check<double>(ps, fn, 1e-5);
    INFO("worst ", res.worst_param, " rel ", res.max_rel_err);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("table validation rejects even kernels and broken chains") {
    ParamStore<double> ps;
    GatedConvSpec even;
    even.kernel = 4;
    even.c_out = 2;
    CHECK_THROWS_AS(make_gated_stack(ps, "a", 3, {even}, true), std::invalid_argument);
    GatedConvSpec broken;
    broken.kernel = 3;
    broken.c_in = 5;  // previous layer emits 3
    broken.c_out = 2;
    CHECK_THROWS_AS(make_gated_stack(ps, "b", 3, {broken}, true), std::invalid_argument);
}

TEST_CASE("blend returns input where mask is 0 and coarse where mask is 1") {
    Tensor64 input({1, 4, 4, 3}), coarse({1, 4, 4, 3});
    fill_rng(input, 5, 0, 1);
    fill_rng(coarse, 6, 0, 1);

    Tape64 t;
    Value vi = t.constant(input), vc = t.constant(coarse);
    const Tensor64& all_in =
        t.value(blend(t, vi, vc, t.constant(Tensor64::zeros({1, 4, 4, 1}))));
    for (std::int64_t i = 0; i < input.size(); ++i) CHECK(all_in[i] == input[i]);

    const Tensor64& all_coarse =
        t.value(blend(t, vi, vc, t.constant(Tensor64::ones({1, 4, 4, 1}))));
    for (std::int64_t i = 0; i < coarse.size(); ++i) CHECK(all_coarse[i] == coarse[i]);

    Tensor64 half = checker_mask(1, 4);
    const Tensor64& mixed = t.value(blend(t, vi, vc, t.constant(half)));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                double want = half.at(0, y, x, 0) == 1.0 ? coarse.at(0, y, x, c)
                                                          : input.at(0, y, x, c);
                CHECK(mixed.at(0, y, x, c) == want);
            }
}

TEST_CASE("generator keeps outputs in the unit interval with any parameters") {
    for (std::uint64_t seed : {1ULL, 99ULL}) {
        ParamStore<double> ps;
        Generator<double> gen = make_generator(ps, tiny_config(8, 4));
        for (auto* p : ps.all()) fill_rng(p->value, mix_seed(seed, p->name), -3, 3);

        Tensor64 img({2, 8, 8, 3});
        fill_rng(img, seed, 0, 1);
        Tensor64 mask = checker_mask(2, 8);
        for (std::int64_t i = 0; i < img.size(); ++i)
            img[i] *= 1.0 - mask[i / 3];  // zero the hole

        Tape64 t;
        GeneratorOut<double> out = generator_forward(t, t.constant(img), t.constant(mask), gen);
        const Tensor64& c = t.value(out.coarse);
        const Tensor64& r = t.value(out.refine);
        CHECK(c.shape() == img.shape());
        CHECK(r.shape() == img.shape());
        for (std::int64_t i = 0; i < c.size(); ++i) {
            CHECK(c[i] >= 0.0);
            CHECK(c[i] <= 1.0);
            CHECK(r[i] >= 0.0);
            CHECK(r[i] <= 1.0);
        }
    }
}

TEST_CASE("blended output equals the input bitwise outside the hole") {
    ParamStore<double> ps;
    Generator<double> gen = make_generator(ps, tiny_config(8, 4));
    init_params(ps, 17);
    Tensor64 img({1, 8, 8, 3});
    fill_rng(img, 23, 0, 1);
    Tensor64 mask = checker_mask(1, 8);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] *= 1.0 - mask[i / 3];

    Tape64 t;
    GeneratorOut<double> out = generator_forward(t, t.constant(img), t.constant(mask), gen);
    const Tensor64& bl = t.value(out.blended);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (mask.at(0, y, x, 0) == 0.0)
                for (int c = 0; c < 3; ++c) CHECK(bl.at(0, y, x, c) == img.at(0, y, x, c));
}

TEST_CASE("generator rejects resolutions not divisible by 4") {
    ParamStore<double> ps;
    CHECK_THROWS_AS(make_generator(ps, tiny_config(6, 4)), std::invalid_argument);

    ParamStore<double> ps2;
    Generator<double> gen = make_generator(ps2, tiny_config(8, 4));
    init_params(ps2, 1);
    Tape64 t;
    CHECK_THROWS_AS(generator_forward(t, t.constant(Tensor64::zeros({1, 6, 6, 3})),
                                      t.constant(Tensor64::zeros({1, 6, 6, 1})), gen),
                    std::invalid_argument);
}

TEST_CASE("hypergraph ablation still runs and changes the output") {
    Tensor64 img({1, 8, 8, 3});
    fill_rng(img, 31, 0, 1);
    Tensor64 mask = checker_mask(1, 8);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] *= 1.0 - mask[i / 3];

    auto run = [&](bool use_hg) {
        ParamStore<double> ps;
        NetworkConfig cfg = tiny_config(8, 4);
        cfg.use_hypergraph = use_hg;
        Generator<double> gen = make_generator(ps, cfg);
        init_params(ps, 7);
        Tape64 t;
        GeneratorOut<double> out = generator_forward(t, t.constant(img), t.constant(mask), gen);
        return t.detach(out.refine);
    };
    Tensor64 with_hg = run(true);
    Tensor64 without = run(false);
    REQUIRE(with_hg.same_shape(without));
    double maxdiff = 0;
    for (std::int64_t i = 0; i < with_hg.size(); ++i)
        maxdiff = std::max(maxdiff, std::abs(with_hg[i] - without[i]));
    CHECK(maxdiff > 0.0);
}

TEST_CASE("every generator and discriminator parameter receives gradient") {
    ParamStore<double> ps;
    NetworkConfig cfg = tiny_config(8, 4);
    Generator<double> gen = make_generator(ps, cfg);
    Discriminator<double> disc = make_discriminator<double>(ps, cfg);
    init_params(ps, 41);

    Tensor64 img({1, 8, 8, 3});
    fill_rng(img, 42, 0, 1);
    Tensor64 mask = checker_mask(1, 8);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] *= 1.0 - mask[i / 3];

    Tape64 t;
    GeneratorOut<double> out = generator_forward(t, t.constant(img), t.constant(mask), gen);
    Value dlogits = discriminator_forward(t, out.refine, t.constant(mask), disc);
    Value loss = t.add(t.add(t.mean(t.mul(out.refine, out.refine)),
                             t.mean(t.mul(out.coarse, out.coarse))),
                       t.mean(t.mul(dlogits, dlogits)));
    t.backward(loss);

    for (auto* p : ps.all()) {
        double mag = 0;
        for (std::int64_t i = 0; i < p->grad.size(); ++i) mag += std::abs(p->grad[i]);
        INFO(p->name);
        CHECK(mag > 0.0);
    }
}

TEST_CASE("discriminator shrinks resolution sixteenfold and sees the mask") {
    ParamStore<double> ps;
    NetworkConfig cfg = tiny_config(16, 4);
    Discriminator<double> disc = make_discriminator<double>(ps, cfg);
    init_params(ps, 51);

    Tensor64 img({1, 16, 16, 3});
    fill_rng(img, 52, 0, 1);
    Tape64 t;
    Value logits = discriminator_forward(t, t.constant(img), t.constant(checker_mask(1, 16)),
                                         disc);
    CHECK(t.value(logits).shape() == std::vector<int>{1, 1, 1, 1});

    Value logits2 = discriminator_forward(
        t, t.constant(img), t.constant(Tensor64::zeros({1, 16, 16, 1})), disc);
    double diff = 0;
    for (std::int64_t i = 0; i < t.value(logits).size(); ++i)
        diff = std::max(diff, std::abs(t.value(logits)[i] - t.value(logits2)[i]));
    CHECK(diff > 0.0);
}

TEST_CASE("plain-conv discriminator ablation runs") {
    ParamStore<double> ps;
    NetworkConfig cfg = tiny_config(16, 4);
    cfg.gated_discriminator = false;
    Discriminator<double> disc = make_discriminator<double>(ps, cfg);
    init_params(ps, 61);
    CHECK(ps.find("disc.l0.g_w") == nullptr);

    Tensor64 img({1, 16, 16, 3});
    fill_rng(img, 62, 0, 1);
    Tape64 t;
    Value logits = discriminator_forward(t, t.constant(img), t.constant(checker_mask(1, 16)),
                                         disc);
    CHECK(t.value(logits).size() == 1);
}

TEST_CASE("untrained forward passes are reproducible snapshots") {
    ParamStore<double> ps;
    NetworkConfig cfg = tiny_config(8, 4);
    Generator<double> gen = make_generator(ps, cfg);
    Discriminator<double> disc = make_discriminator<double>(ps, cfg);
    init_params(ps, 2024);

    Tensor64 img({1, 8, 8, 3});
    fill_rng(img, 2025, 0, 1);
    Tensor64 mask = checker_mask(1, 8);
    for (std::int64_t i = 0; i < img.size(); ++i) img[i] *= 1.0 - mask[i / 3];

    Tape64 t;
    GeneratorOut<double> out = generator_forward(t, t.constant(img), t.constant(mask), gen);
    Value dl = discriminator_forward(t, out.refine, t.constant(mask), disc);

    std::uint64_t hc = hash_tensor(t.value(out.coarse));
    std::uint64_t hr = hash_tensor(t.value(out.refine));
    std::uint64_t hd = hash_tensor(t.value(dl));

    // golden snapshot: values captured from the first implementation run;
    // any change here means the forward pass is no longer reproducible
    CHECK(hc == 11412026067526371776ULL);
    CHECK(hr == 2715373496936932059ULL);
    CHECK(hd == 5836445589165190419ULL);
}

TEST_CASE("full generator pipeline passes sampled finite differences") {
    ParamStore<double> ps;
    auto& img_p = ps.create("input.image", {1, 16, 16, 3});
    auto& mask_c = ps.create("input.maskless", {1});  // placeholder so store is nonempty first
    (void)mask_c;
    NetworkConfig cfg = tiny_config(16, 4);
    Generator<double> gen = make_generator(ps, cfg);
    init_params(ps, 71);
    fill_rng(img_p.value, 72, 0.1, 0.9);
    Tensor64 mask = checker_mask(1, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (mask.at(0, y, x, 0) == 1.0)
                for (int c = 0; c < 3; ++c) img_p.value.at(0, y, x, c) = 0.0;

    auto fn = [&](bool want_grad) {
        Tape64 t;
        GeneratorOut<double> out =
            generator_forward(t, t.param(img_p), t.constant(mask), gen);
        Value loss = t.add(t.mean(t.mul(out.refine, out.refine)), t.mean(out.coarse));
        double v = t.value(loss)[0];
        if (want_grad) t.backward(loss);
        return v;
    };
    // eps 1e-4: the deep pipeline has coordinates with ~1e-9 gradients where
    // smaller steps leave central differences dominated by rounding noise
    GradCheckResult res = finite_diff_check<double>(ps, fn, 1e-4, 97);
    INFO("worst ", res.worst_param, "[", res.worst_index, "] analytic ", res.analytic,
         " numeric ", res.numeric, " over ", res.checked, " coords");
    CHECK(res.max_rel_err < 1e-3);
    CHECK(res.checked > 50);
}
