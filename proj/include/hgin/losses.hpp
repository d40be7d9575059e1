#pragma once

// The five training objectives. All L1 terms are means over every tensor
// element, which keeps the default weights resolution-independent. GAN terms
// use the softplus identities (-log sigmoid(x) = softplus(-x)) so they stay
// finite for any finite logit; a hinge variant sits behind a flag.
//
// The perceptual extractor is a fixed, seeded, random-weight conv stack
// standing in for a pretrained network: weights are plain constants, frozen
// by construction, and bit-identical across runs for a given seed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hgin/rng.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

struct LossWeights {
    double hole = 6.0;
    double valid = 1.0;
    double adv = 0.1;
    double perceptual = 0.05;
    double edge = 0.1;
};

inline void validate_weights(const LossWeights& w) {
    const double all[] = {w.hole, w.valid, w.adv, w.perceptual, w.edge};
    bool any = false;
    for (double v : all) {
        if (!std::isfinite(v) || v < 0)
            throw std::invalid_argument("loss weights must be finite and nonnegative");
        any = any || v > 0;
    }
    if (!any) throw std::invalid_argument("at least one loss weight must be positive");
}

template <typename T>
Value mean_abs(Tape<T>& t, Value v) {
    return t.mean(t.vabs(v));
}

// L_hole = mean|R(refine-gt)| + 1/2 mean|R(coarse-gt)|, L_valid the same
// with the mask complement. The mask multiplies exactly, so non-hole pixels
// cannot leak into L_hole.
template <typename T>
std::pair<Value, Value> content_loss(Tape<T>& t, Value coarse, Value refine, Value gt,
                                     Value mask) {
    Value keep = t.add_scalar(t.scale(mask, T(-1)), T(1));
    Value dr = t.sub(refine, gt);
    Value dc = t.sub(coarse, gt);
    Value hole = t.add(mean_abs(t, t.mul(dr, mask)),
                       t.scale(mean_abs(t, t.mul(dc, mask)), T(0.5)));
    Value valid = t.add(mean_abs(t, t.mul(dr, keep)),
                        t.scale(mean_abs(t, t.mul(dc, keep)), T(0.5)));
    return {hole, valid};
}

// -mean log s(real) - mean log(1 - s(fake)) = mean sp(-real) + mean sp(fake)
template <typename T>
Value gan_loss_d(Tape<T>& t, Value real_logits, Value fake_logits, bool hinge = false) {
    if (hinge) {
        Value r = t.mean(t.relu(t.add_scalar(t.scale(real_logits, T(-1)), T(1))));
        Value f = t.mean(t.relu(t.add_scalar(fake_logits, T(1))));
        return t.add(r, f);
    }
    return t.add(t.mean(t.softplus(t.scale(real_logits, T(-1)))),
                 t.mean(t.softplus(fake_logits)));
}

// -mean log s(fake) = mean sp(-fake); hinge: -mean fake
template <typename T>
Value gan_loss_g(Tape<T>& t, Value fake_logits, bool hinge = false) {
    if (hinge) return t.scale(t.mean(fake_logits), T(-1));
    return t.mean(t.softplus(t.scale(fake_logits, T(-1))));
}

template <typename T>
struct FeatureExtractor {
    std::vector<Tensor<T>> kernels;  // three [3,3,c_in,c_out] stages

    static FeatureExtractor seeded(int in_channels, std::uint64_t seed) {
        FeatureExtractor fe;
        const int widths[] = {16, 32, 64};
        int c = in_channels;
        for (int stage = 0; stage < 3; ++stage) {
            Tensor<T> k({3, 3, c, widths[stage]});
            double bound = std::sqrt(6.0 / (9.0 * c));
            Rng rng(mix_seed(seed, "perceptual.stage", static_cast<std::uint64_t>(stage)));
            for (std::int64_t i = 0; i < k.size(); ++i)
                k[i] = static_cast<T>(rng.uniform(-bound, bound));
            fe.kernels.push_back(std::move(k));
            c = widths[stage];
        }
        return fe;
    }

    // ReLU activations of each stride-2 stage
    std::vector<Value> features(Tape<T>& t, Value img) const {
        std::vector<Value> feats;
        Value x = img;
        for (const Tensor<T>& k : kernels) {
            x = t.relu(t.conv2d(x, t.constant(k), Value{}, 2, 1, Pad::same));
            feats.push_back(x);
        }
        return feats;
    }
};

// Sum over stages of mean-abs feature difference, for refine and for the
// composited prediction, both against ground truth.
template <typename T>
Value perceptual_loss(Tape<T>& t, Value refine, Value comp, Value gt,
                      const FeatureExtractor<T>& fe) {
    std::vector<Value> fr = fe.features(t, refine);
    std::vector<Value> fc = fe.features(t, comp);
    std::vector<Value> fg = fe.features(t, gt);
    Value acc;
    for (std::size_t s = 0; s < fr.size(); ++s) {
        Value term = t.add(mean_abs(t, t.sub(fr[s], fg[s])), mean_abs(t, t.sub(fc[s], fg[s])));
        acc = s == 0 ? term : t.add(acc, term);
    }
    return acc;
}

namespace detail {

// Per-channel Sobel as a block-diagonal kernel so one conv call filters each
// channel independently.
template <typename T>
Tensor<T> sobel_kernel(int channels, bool horizontal) {
    const double gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    Tensor<T> k({3, 3, channels, channels});
    for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
            for (int c = 0; c < channels; ++c)
                k.data()[((static_cast<std::int64_t>(ky) * 3 + kx) * channels + c) * channels +
                         c] = static_cast<T>(horizontal ? gx[ky][kx] : gx[kx][ky]);
    return k;
}

// Gradient magnitude sqrt(Gx^2 + Gy^2 + 1e-12). Border pixels see
// edge-replicated neighbors, so constant images produce an exactly constant
// map (a zero-filled border would fake edges at the frame).
template <typename T>
Value edge_map(Tape<T>& t, Value img) {
    int c = t.value(img).dim(3);
    Value padded = t.pad_replicate(img, 1);
    Value gx = t.conv2d(padded, t.constant(sobel_kernel<T>(c, true)), Value{}, 1, 1, Pad::valid);
    Value gy = t.conv2d(padded, t.constant(sobel_kernel<T>(c, false)), Value{}, 1, 1,
                        Pad::valid);
    return t.vsqrt(t.add_scalar(t.add(t.mul(gx, gx), t.mul(gy, gy)), T(1e-12)));
}

}  // namespace detail

template <typename T>
Value edge_loss(Tape<T>& t, Value a, Value b) {
    return mean_abs(t, t.sub(detail::edge_map(t, a), detail::edge_map(t, b)));
}

struct LossBreakdown {
    Value hole, valid, adv, perceptual, edge;
    Value total;
};

// Accepts any weights; the invariant that at least one weight is positive is
// enforced where user configuration enters, not here (zero-everything is a
// legitimate probe in tests).
template <typename T>
LossBreakdown total_loss(Tape<T>& t, Value hole, Value valid, Value adv, Value perceptual,
                         Value edge, const LossWeights& w) {
    LossBreakdown b;
    b.hole = hole;
    b.valid = valid;
    b.adv = adv;
    b.perceptual = perceptual;
    b.edge = edge;
    b.total = t.add(
        t.add(t.add(t.scale(hole, static_cast<T>(w.hole)),
                    t.scale(valid, static_cast<T>(w.valid))),
              t.add(t.scale(adv, static_cast<T>(w.adv)),
                    t.scale(perceptual, static_cast<T>(w.perceptual)))),
        t.scale(edge, static_cast<T>(w.edge)));
    return b;
}

}  // namespace hgin
