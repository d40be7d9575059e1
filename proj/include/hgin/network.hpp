#pragma once

// Network assembly: gated convolution blocks, the coarse -> blend -> refine
// generator, and the gated patch discriminator. A gated layer runs two
// convolutions of identical geometry and combines them as
// phi(conv_f(x)) * sigmoid(conv_g(x)); no normalization layers anywhere.
//
// Layer tables are data: each entry describes one gated conv, optionally
// preceded by a 2x nearest upsample. The refine stage inserts the hypergraph
// layer right before the first upsampling entry, i.e. at the bottleneck.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/hypergraph.hpp"
#include "hgin/params.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

enum class Act : std::uint8_t { elu, leaky_relu, none };

struct GatedConvSpec {
    int kernel = 3;
    int stride = 1;
    int dilation = 1;
    int c_in = 0;  // 0: inferred from the previous layer when the table is built
    int c_out = 0;
    Act act = Act::elu;
    bool upsample_before = false;  // 2x nearest upsample ahead of the conv
};

struct NetworkConfig {
    int base_channels = 32;
    int input_resolution = 0;
    int image_channels = 3;
    bool use_hypergraph = true;
    bool gated_discriminator = true;
    HypergraphConfig hypergraph;
    // empty tables resolve to the defaults below
    std::vector<GatedConvSpec> coarse_layers;
    std::vector<GatedConvSpec> refine_layers;
    std::vector<GatedConvSpec> disc_layers;
};

inline std::vector<GatedConvSpec> default_generator_table(int bc) {
    auto L = [](int k, int s, int d, int c, bool up = false) {
        GatedConvSpec g;
        g.kernel = k;
        g.stride = s;
        g.dilation = d;
        g.c_out = c;
        g.act = Act::elu;
        g.upsample_before = up;
        return g;
    };
    return {L(3, 1, 1, bc),      L(3, 2, 1, 2 * bc), L(3, 1, 1, 2 * bc),
            L(3, 2, 1, 4 * bc), L(3, 1, 2, 4 * bc), L(3, 1, 4, 4 * bc),
            L(3, 1, 1, 2 * bc, true), L(3, 1, 1, bc, true)};
}

inline std::vector<GatedConvSpec> default_disc_table(int bc) {
    auto L = [](int c) {
        GatedConvSpec g;
        g.kernel = 5;
        g.stride = 2;
        g.dilation = 1;
        g.c_out = c;
        g.act = Act::leaky_relu;
        return g;
    };
    return {L(2 * bc), L(4 * bc), L(4 * bc), L(4 * bc)};
}

template <typename T>
struct GatedLayer {
    GatedConvSpec spec;
    Parameter<T>* f_w = nullptr;
    Parameter<T>* f_b = nullptr;
    Parameter<T>* g_w = nullptr;
    Parameter<T>* g_b = nullptr;
};

template <typename T>
struct PlainConv {
    Parameter<T>* w = nullptr;
    Parameter<T>* b = nullptr;
};

// Builds parameters for one table, inferring c_in along the chain.
template <typename T>
std::vector<GatedLayer<T>> make_gated_stack(ParamStore<T>& ps, const std::string& prefix,
                                            int c_in, std::vector<GatedConvSpec> table,
                                            bool gated) {
    std::vector<GatedLayer<T>> stack;
    stack.reserve(table.size());
    int c = c_in;
    int idx = 0;
    for (GatedConvSpec spec : table) {
        if (spec.kernel < 1 || spec.kernel % 2 == 0)
            throw std::invalid_argument("gated conv kernel must be odd");
        if (spec.c_out < 1) throw std::invalid_argument("gated conv needs c_out >= 1");
        if (spec.c_in == 0) spec.c_in = c;
        if (spec.c_in != c)
            throw std::invalid_argument("layer table channel chain broken at index " +
                                        std::to_string(idx));
        GatedLayer<T> layer;
        layer.spec = spec;
        std::string base = prefix + ".l" + std::to_string(idx);
        layer.f_w = &ps.create(base + ".f_w", {spec.kernel, spec.kernel, spec.c_in, spec.c_out});
        layer.f_b = &ps.create(base + ".f_b", {spec.c_out});
        if (gated) {
            layer.g_w =
                &ps.create(base + ".g_w", {spec.kernel, spec.kernel, spec.c_in, spec.c_out});
            layer.g_b = &ps.create(base + ".g_b", {spec.c_out});
        }
        stack.push_back(layer);
        c = spec.c_out;
        ++idx;
    }
    return stack;
}

template <typename T>
Value apply_activation(Tape<T>& t, Value v, Act act) {
    switch (act) {
        case Act::elu: return t.elu(v);
        case Act::leaky_relu: return t.leaky_relu(v, T(0.2));
        case Act::none: return v;
    }
    throw std::logic_error("unknown activation");
}

template <typename T>
Value gated_conv(Tape<T>& t, Value x, const GatedLayer<T>& layer) {
    const GatedConvSpec& s = layer.spec;
    if (s.upsample_before) x = t.upsample_nearest(x, 2);
    Value feats = t.conv2d(x, t.param(*layer.f_w), t.param(*layer.f_b), s.stride, s.dilation,
                           Pad::same);
    Value act = apply_activation(t, feats, s.act);
    if (!layer.g_w) return act;  // gating ablated: plain activated conv
    Value gate = t.conv2d(x, t.param(*layer.g_w), t.param(*layer.g_b), s.stride, s.dilation,
                          Pad::same);
    return t.mul(act, t.sigmoid(gate));
}

// R * a + (1 - R) * b, with R broadcast over channels.
template <typename T>
Value blend(Tape<T>& t, Value b_input, Value a_coarse, Value mask) {
    Value keep = t.add_scalar(t.scale(mask, T(-1)), T(1));
    return t.add(t.mul(a_coarse, mask), t.mul(b_input, keep));
}

template <typename T>
struct Generator {
    NetworkConfig cfg;
    std::vector<GatedLayer<T>> coarse;
    std::vector<GatedLayer<T>> refine;
    PlainConv<T> coarse_out;
    PlainConv<T> refine_out;
    HypergraphLayer<T> hg;       // live only when cfg.use_hypergraph
    std::size_t hg_before = 0;   // refine index the hypergraph precedes
};

template <typename T>
struct Discriminator {
    std::vector<GatedLayer<T>> stack;
    PlainConv<T> out;
};

namespace detail {

// Spatial size right before the first upsample layer (the bottleneck).
inline int bottleneck_resolution(const std::vector<GatedConvSpec>& table, int res,
                                 std::size_t* insert_at) {
    int r = res;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table[i].upsample_before) {
            *insert_at = i;
            return r;
        }
        r = (r + table[i].stride - 1) / table[i].stride;
    }
    *insert_at = table.size();
    return r;
}

}  // namespace detail

template <typename T>
Generator<T> make_generator(ParamStore<T>& ps, NetworkConfig cfg) {
    if (cfg.input_resolution < 4 || cfg.input_resolution % 4 != 0)
        throw std::invalid_argument("input resolution must be a positive multiple of 4");
    if (cfg.coarse_layers.empty()) cfg.coarse_layers = default_generator_table(cfg.base_channels);
    if (cfg.refine_layers.empty()) cfg.refine_layers = default_generator_table(cfg.base_channels);

    Generator<T> gen;
    int in_ch = cfg.image_channels + 1;  // image plus mask channel
    gen.coarse = make_gated_stack(ps, "coarse", in_ch, cfg.coarse_layers, true);
    gen.refine = make_gated_stack(ps, "refine", in_ch, cfg.refine_layers, true);

    int c_last = cfg.coarse_layers.back().c_out;
    gen.coarse_out.w = &ps.create("coarse.out.w", {1, 1, c_last, cfg.image_channels});
    gen.coarse_out.b = &ps.create("coarse.out.b", {cfg.image_channels});
    int r_last = cfg.refine_layers.back().c_out;
    gen.refine_out.w = &ps.create("refine.out.w", {1, 1, r_last, cfg.image_channels});
    gen.refine_out.b = &ps.create("refine.out.b", {cfg.image_channels});

    if (cfg.use_hypergraph) {
        std::size_t at = 0;
        int res = detail::bottleneck_resolution(cfg.refine_layers, cfg.input_resolution, &at);
        int c = at == 0 ? in_ch : cfg.refine_layers[at - 1].c_out;
        gen.hg = make_hypergraph_layer(ps, "refine.hg", c, c, res * res, cfg.hypergraph);
        gen.hg_before = at;
    }
    gen.cfg = std::move(cfg);
    return gen;
}

template <typename T>
Discriminator<T> make_discriminator(ParamStore<T>& ps, const NetworkConfig& cfg) {
    std::vector<GatedConvSpec> table =
        cfg.disc_layers.empty() ? default_disc_table(cfg.base_channels) : cfg.disc_layers;
    Discriminator<T> d;
    d.stack = make_gated_stack(ps, "disc", cfg.image_channels + 1, table,
                               cfg.gated_discriminator);
    int c_last = table.back().c_out;
    d.out.w = &ps.create("disc.out.w", {1, 1, c_last, 1});
    d.out.b = &ps.create("disc.out.b", {1});
    return d;
}

// Kaiming-uniform for kernels and matrices, zeros for biases, all seeded per
// parameter name so initialization ignores registration order.
template <typename T>
void init_params(ParamStore<T>& ps, std::uint64_t seed) {
    for (auto* p : ps.all()) {
        if (p->value.rank() == 4)
            init_kaiming_uniform(*p, conv_fan_in(p->value.shape()), seed);
        else if (p->value.rank() == 2)
            init_kaiming_uniform(*p, p->value.dim(0), seed);
        else
            p->value.fill(T(0));
    }
}

template <typename T>
struct GeneratorOut {
    Value coarse;   // [b,h,w,3] in [0,1]
    Value blended;  // coarse blended into the input
    Value refine;   // [b,h,w,3] in [0,1]
};

namespace detail {

template <typename T>
void check_gen_input(Tape<T>& t, Value image, Value mask, int image_channels) {
    const Tensor<T>& iv = t.value(image);
    const Tensor<T>& mv = t.value(mask);
    if (iv.rank() != 4 || mv.rank() != 4 || iv.dim(3) != image_channels || mv.dim(3) != 1)
        throw std::invalid_argument("generator expects [b,h,w,c] image and [b,h,w,1] mask");
    if (iv.dim(0) != mv.dim(0) || iv.dim(1) != mv.dim(1) || iv.dim(2) != mv.dim(2))
        throw std::invalid_argument("image and mask disagree: " + iv.shape_str() + " vs " +
                                    mv.shape_str());
    if (iv.dim(1) % 4 != 0 || iv.dim(2) % 4 != 0)
        throw std::invalid_argument("input resolution must be divisible by 4, got " +
                                    iv.shape_str());
}

template <typename T>
Value to_unit_range(Tape<T>& t, Value v) {
    return t.scale(t.add_scalar(t.vtanh(v), T(1)), T(0.5));
}

}  // namespace detail

// masked_image must have hole pixels zeroed; mask is 1 inside the hole.
template <typename T>
GeneratorOut<T> generator_forward(Tape<T>& t, Value masked_image, Value mask,
                                  const Generator<T>& gen) {
    detail::check_gen_input(t, masked_image, mask, gen.cfg.image_channels);

    Value x = t.concat_channels(masked_image, mask);
    for (const auto& layer : gen.coarse) x = gated_conv(t, x, layer);
    Value coarse_logits =
        t.conv2d(x, t.param(*gen.coarse_out.w), t.param(*gen.coarse_out.b), 1, 1, Pad::same);
    GeneratorOut<T> out;
    out.coarse = detail::to_unit_range(t, coarse_logits);
    out.blended = blend(t, masked_image, out.coarse, mask);

    Value y = t.concat_channels(out.blended, mask);
    for (std::size_t i = 0; i < gen.refine.size(); ++i) {
        if (gen.cfg.use_hypergraph && i == gen.hg_before) y = hypergraph_forward(t, y, gen.hg);
        y = gated_conv(t, y, gen.refine[i]);
    }
    if (gen.cfg.use_hypergraph && gen.hg_before == gen.refine.size())
        y = hypergraph_forward(t, y, gen.hg);
    Value refine_logits =
        t.conv2d(y, t.param(*gen.refine_out.w), t.param(*gen.refine_out.b), 1, 1, Pad::same);
    out.refine = detail::to_unit_range(t, refine_logits);
    return out;
}

// Patch logits on concat(image, mask); spatial dims shrink by the product of
// the table's strides (1/16 with the default four stride-2 layers).
template <typename T>
Value discriminator_forward(Tape<T>& t, Value image, Value mask, const Discriminator<T>& d) {
    const Tensor<T>& iv = t.value(image);
    const Tensor<T>& mv = t.value(mask);
    if (iv.rank() != 4 || mv.rank() != 4 || mv.dim(3) != 1)
        throw std::invalid_argument("discriminator expects [b,h,w,c] image and [b,h,w,1] mask");
    Value x = t.concat_channels(image, mask);
    for (const auto& layer : d.stack) x = gated_conv(t, x, layer);
    return t.conv2d(x, t.param(*d.out.w), t.param(*d.out.b), 1, 1, Pad::same);
}

}  // namespace hgin
