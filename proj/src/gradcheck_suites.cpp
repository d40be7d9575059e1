#include "hgin/gradcheck_suites.hpp"

#include <cstdio>
#include <stdexcept>
#include <utility>

#include "hgin/hypergraph.hpp"
#include "hgin/losses.hpp"
#include "hgin/network.hpp"
#include "hgin/params.hpp"
#include "hgin/rng.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

namespace {

void fill_rng(Tensor64& t, std::uint64_t seed, double lo, double hi) {
    Rng r(seed);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.uniform(lo, hi);
}

SuiteResult check_hypergraph() {
    HypergraphConfig cfg;
    cfg.hyperedges = 4;
    cfg.embed_channels = 2;
    cfg.window = 3;
    ParamStore<double> ps;
    auto& xin = ps.create("x", {1, 4, 4, 3});
    HypergraphLayer<double> layer = make_hypergraph_layer(ps, "hg", 3, 3, 16, cfg);
    for (auto* p : ps.all()) fill_rng(p->value, mix_seed(7, p->name), -0.6, 0.6);

    auto fn = [&](bool want_grad) {
        Tape64 t;
        Value out = hypergraph_forward(t, t.param(xin), layer);
        Value loss = t.mean(t.mul(out, out));
        double v = t.value(loss)[0];
        if (want_grad) t.backward(loss);
        return v;
    };
    return {"hypergraph.layer", finite_diff_check<double>(ps, fn, 1e-5), 1e-5, 1e-4};
}

SuiteResult check_gated() {
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
    return {"gated.conv", finite_diff_check<double>(ps, fn, 1e-5), 1e-5, 1e-4};
}

Tensor64 center_mask_8() {
    Tensor64 m({1, 8, 8, 1});
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) m.at(0, y, x, 0) = 1.0;
    return m;
}

std::vector<SuiteResult> check_losses() {
    std::vector<SuiteResult> out;
    Tensor64 mask = center_mask_8();

    {
        ParamStore<double> ps;
        auto& coarse = ps.create("coarse", {1, 8, 8, 3});
        auto& refine = ps.create("refine", {1, 8, 8, 3});
        auto& gt = ps.create("gt", {1, 8, 8, 3});
        fill_rng(coarse.value, 21, 0, 1);
        fill_rng(refine.value, 22, 0, 1);
        fill_rng(gt.value, 23, 0, 1);
        auto fn = [&](bool g) {
            Tape64 t;
            auto [h, v] = content_loss(t, t.param(coarse), t.param(refine), t.param(gt),
                                       t.constant(mask));
            Value loss = t.add(h, t.scale(v, 0.7));
            double val = t.value(loss)[0];
            if (g) t.backward(loss);
            return val;
        };
        out.push_back({"losses.content", finite_diff_check<double>(ps, fn, 1e-6), 1e-6, 1e-4});
    }
    {
        ParamStore<double> ps;
        auto& real = ps.create("real", {1, 2, 2, 1});
        auto& fake = ps.create("fake", {1, 2, 2, 1});
        fill_rng(real.value, 24, -2, 2);
        fill_rng(fake.value, 25, -2, 2);
        auto fn = [&](bool g) {
            Tape64 t;
            Value loss = t.add(gan_loss_d(t, t.param(real), t.param(fake)),
                               t.scale(gan_loss_g(t, t.param(fake)), 0.5));
            double val = t.value(loss)[0];
            if (g) t.backward(loss);
            return val;
        };
        out.push_back(
            {"losses.adversarial", finite_diff_check<double>(ps, fn, 1e-5), 1e-5, 1e-4});
    }
    {
        ParamStore<double> ps;
        auto& refine = ps.create("refine", {1, 8, 8, 3});
        auto& gt = ps.create("gt", {1, 8, 8, 3});
        fill_rng(refine.value, 26, 0, 1);
        fill_rng(gt.value, 27, 0, 1);
        auto fe = FeatureExtractor<double>::seeded(3, 31);
        auto fn = [&](bool g) {
            Tape64 t;
            Value vr = t.param(refine);
            Value vg = t.param(gt);
            Value vm = t.constant(mask);
            Value keep = t.add_scalar(t.scale(vm, -1.0), 1.0);
            Value comp = t.add(t.mul(vm, vr), t.mul(keep, vg));
            Value loss = perceptual_loss(t, vr, comp, vg, fe);
            double val = t.value(loss)[0];
            if (g) t.backward(loss);
            return val;
        };
        out.push_back(
            {"losses.perceptual", finite_diff_check<double>(ps, fn, 1e-6), 1e-6, 1e-4});
    }
    {
        ParamStore<double> ps;
        auto& a = ps.create("a", {1, 5, 5, 2});
        auto& b = ps.create("b", {1, 5, 5, 2});
        // structured images keep both Sobel responses far from the sqrt kink
        Rng r(33);
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x)
                for (int c = 0; c < 2; ++c) {
                    a.value.at(0, y, x, c) =
                        0.5 * x + 0.09 * (y + 1) * (y + 1) + 0.01 * r.uniform01();
                    b.value.at(0, y, x, c) =
                        0.8 * x + 0.05 * (y + 1) * (y + 1) + 0.01 * r.uniform01();
                }
        auto fn = [&](bool g) {
            Tape64 t;
            Value loss = edge_loss(t, t.param(a), t.param(b));
            double val = t.value(loss)[0];
            if (g) t.backward(loss);
            return val;
        };
        out.push_back({"losses.edge", finite_diff_check<double>(ps, fn, 1e-6), 1e-6, 1e-4});
    }
    return out;
}

SuiteResult check_generator() {
    ParamStore<double> ps;
    auto& img_p = ps.create("input.image", {1, 16, 16, 3});
    NetworkConfig cfg;
    cfg.base_channels = 4;
    cfg.input_resolution = 16;
    cfg.hypergraph.window = 3;
    Generator<double> gen = make_generator(ps, cfg);
    init_params(ps, 71);
    fill_rng(img_p.value, 72, 0.1, 0.9);

    Tensor64 mask({1, 16, 16, 1});
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) {
            mask.at(0, y, x, 0) = 1.0;
            for (int c = 0; c < 3; ++c) img_p.value.at(0, y, x, c) = 0.0;
        }

    auto fn = [&](bool want_grad) {
        Tape64 t;
        GeneratorOut<double> out = generator_forward(t, t.param(img_p), t.constant(mask), gen);
        Value loss = t.add(t.mean(t.mul(out.refine, out.refine)), t.mean(out.coarse));
        double v = t.value(loss)[0];
        if (want_grad) t.backward(loss);
        return v;
    };
    // eps 1e-4 and a sampling stride: the deep pipeline has ~1e-9 gradients
    // where smaller steps drown central differences in rounding noise, and
    // probing every coordinate would take minutes
    return {"generator.pipeline", finite_diff_check<double>(ps, fn, 1e-4, 97), 1e-4, 1e-3};
}

}  // namespace

std::vector<SuiteResult> run_gradcheck_suites(const std::string& module) {
    std::vector<SuiteResult> out;
    bool all = module == "all";
    bool known = all;
    if (all || module == "hypergraph") {
        out.push_back(check_hypergraph());
        known = true;
    }
    if (all || module == "gated") {
        out.push_back(check_gated());
        known = true;
    }
    if (all || module == "losses") {
        auto ls = check_losses();
        out.insert(out.end(), ls.begin(), ls.end());
        known = true;
    }
    if (all) out.push_back(check_generator());
    if (!known)
        throw std::invalid_argument("unknown gradcheck module '" + module +
                                    "' (expected all, hypergraph, gated, or losses)");
    return out;
}

std::string format_suite_result(const SuiteResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%-20s %s  max_rel_err=%.3e (threshold %.0e, eps %.0e, %lld coords, worst %s)",
                  r.name.c_str(), r.passed() ? "PASS" : "FAIL", r.check.max_rel_err,
                  r.threshold, r.eps, static_cast<long long>(r.check.checked),
                  r.check.worst_param.empty() ? "-" : r.check.worst_param.c_str());
    return buf;
}

}  // namespace hgin
