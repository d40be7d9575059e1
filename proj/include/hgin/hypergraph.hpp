#pragma once

// Data-dependent hypergraph convolution. The incidence matrix is produced
// from the feature map itself, H = |Psi(X) Lambda(X) Psi(X)^T Omega(X)|,
// then features propagate through the degree-normalized operator
// P = D^{-1/2} H W B^{-1} H^T D^{-1/2} with W fixed to identity:
// out = ELU(P X Theta), per batch item.
//
// spectral_oracle() is the brute-force reference: explicit nested sums over
// a binary incidence matrix, no tape, no matrix shortcuts. Production code
// never calls it; tests compare the layer against it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgin/params.hpp"
#include "hgin/tape.hpp"
#include "hgin/tensor.hpp"

namespace hgin {

struct HypergraphConfig {
    int hyperedges = 0;      // M; 0 resolves to ceil(N/4)
    int embed_channels = 0;  // C_hat; 0 resolves to max(C/4, 8)
    int window = 7;          // s, odd
    double epsilon = 1e-6;   // added to every degree before inversion
};

template <typename T>
struct HypergraphLayer {
    HypergraphConfig cfg;  // fully resolved (no zeros)
    int c_in = 0;
    int c_out = 0;
    Parameter<T>* psi_w = nullptr;     // [1,1,C,C_hat]
    Parameter<T>* psi_b = nullptr;     // [C_hat]
    Parameter<T>* lambda_w = nullptr;  // [1,1,C_hat,C_hat]
    Parameter<T>* lambda_b = nullptr;  // [C_hat]
    Parameter<T>* omega_w = nullptr;   // [s,s,C,M]
    Parameter<T>* omega_b = nullptr;   // [M]
    Parameter<T>* theta = nullptr;     // [C, C_out]
};

// On-tape incidence factors for one batch item.
struct IncidenceFactors {
    Value psi;          // [N, C_hat]
    Value lambda_diag;  // [C_hat]
    Value omega;        // [N, M]
    Value H;            // [N, M], elementwise nonnegative
    Value D_diag;       // [N], regularized vertex degrees
    Value B_diag;       // [M], regularized hyperedge degrees
};

inline HypergraphConfig resolve_hypergraph_config(HypergraphConfig cfg, int c_in,
                                                  int n_vertices) {
    if (cfg.embed_channels == 0) cfg.embed_channels = std::max(c_in / 4, 8);
    if (cfg.hyperedges == 0) cfg.hyperedges = (n_vertices + 3) / 4;
    if (cfg.window < 1 || cfg.window % 2 == 0)
        throw std::invalid_argument("hypergraph window must be odd and positive");
    if (cfg.hyperedges < 1 || cfg.embed_channels < 1)
        throw std::invalid_argument("hypergraph needs hyperedges >= 1 and embed channels >= 1");
    if (cfg.epsilon <= 0) throw std::invalid_argument("hypergraph epsilon must be positive");
    return cfg;
}

template <typename T>
HypergraphLayer<T> make_hypergraph_layer(ParamStore<T>& ps, const std::string& prefix, int c_in,
                                         int c_out, int n_vertices, HypergraphConfig cfg) {
    HypergraphLayer<T> layer;
    layer.cfg = resolve_hypergraph_config(cfg, c_in, n_vertices);
    layer.c_in = c_in;
    layer.c_out = c_out;
    int ch = layer.cfg.embed_channels, m = layer.cfg.hyperedges, s = layer.cfg.window;
    layer.psi_w = &ps.create(prefix + ".psi_w", {1, 1, c_in, ch});
    layer.psi_b = &ps.create(prefix + ".psi_b", {ch});
    layer.lambda_w = &ps.create(prefix + ".lambda_w", {1, 1, ch, ch});
    layer.lambda_b = &ps.create(prefix + ".lambda_b", {ch});
    layer.omega_w = &ps.create(prefix + ".omega_w", {s, s, c_in, m});
    layer.omega_b = &ps.create(prefix + ".omega_b", {m});
    layer.theta = &ps.create(prefix + ".theta", {c_in, c_out});
    return layer;
}

// Degree vectors from an on-tape H, epsilon-regularized. eps may be zero for
// verification paths whose preconditions already guarantee positive degrees.
template <typename T>
IncidenceFactors incidence_from_matrix(Tape<T>& t, Value H, double eps) {
    const Tensor<T>& hv = t.value(H);
    if (hv.rank() != 2) throw std::invalid_argument("incidence matrix must be rank-2");
    int n = hv.dim(0), m = hv.dim(1);
    IncidenceFactors f;
    f.H = H;
    Value ones_m = t.constant(Tensor<T>::ones({m, 1}));
    Value ones_n = t.constant(Tensor<T>::ones({n, 1}));
    f.D_diag = t.add_scalar(t.reshape(t.matmul(H, ones_m), {n}), static_cast<T>(eps));
    f.B_diag = t.add_scalar(t.reshape(t.matmul(t.transpose(H), ones_n), {m}),
                            static_cast<T>(eps));
    return f;
}

// Incidence construction for one batch item [1,h,w,C].
template <typename T>
IncidenceFactors build_incidence(Tape<T>& t, Value x_item, const HypergraphLayer<T>& layer) {
    const Tensor<T>& xv = t.value(x_item);
    if (xv.rank() != 4 || xv.dim(0) != 1)
        throw std::invalid_argument("build_incidence expects a [1,h,w,c] item");
    if (xv.dim(3) != layer.c_in)
        throw std::invalid_argument("build_incidence channel mismatch: got " +
                                    std::to_string(xv.dim(3)) + ", layer expects " +
                                    std::to_string(layer.c_in));
    int n = xv.dim(1) * xv.dim(2);
    int ch = layer.cfg.embed_channels, m = layer.cfg.hyperedges;

    Value psi_map = t.relu(t.conv2d(x_item, t.param(*layer.psi_w), t.param(*layer.psi_b), 1, 1,
                                    Pad::same));
    // Lambda pools the embedded (C_hat-channel) features; the 1x1 kernel is
    // C_hat x C_hat so the pooled vector must already live in embedding space.
    Value lam_map = t.conv2d(t.global_avg_pool(psi_map), t.param(*layer.lambda_w),
                             t.param(*layer.lambda_b), 1, 1, Pad::same);
    Value omega_map = t.conv2d(x_item, t.param(*layer.omega_w), t.param(*layer.omega_b), 1, 1,
                               Pad::same);

    IncidenceFactors f;
    f.psi = t.reshape(psi_map, {n, ch});
    f.lambda_diag = t.reshape(lam_map, {ch});
    f.omega = t.reshape(omega_map, {n, m});
    Value left = t.matmul(f.psi, t.diag(f.lambda_diag));           // [N, C_hat]
    Value right = t.matmul(t.transpose(f.psi), f.omega);           // [C_hat, M]
    Value h = t.vabs(t.matmul(left, right));                       // [N, M]
    IncidenceFactors deg = incidence_from_matrix(t, h, layer.cfg.epsilon);
    f.H = deg.H;
    f.D_diag = deg.D_diag;
    f.B_diag = deg.B_diag;
    return f;
}

// P = D^{-1/2} H B^{-1} H^T D^{-1/2}, symmetric [N,N].
template <typename T>
Value propagation_matrix(Tape<T>& t, const IncidenceFactors& f) {
    const Tensor<T>& dv = t.value(f.D_diag);
    const Tensor<T>& bv = t.value(f.B_diag);
    for (std::int64_t i = 0; i < dv.size(); ++i)
        if (!(dv[i] > T(0)))
            throw std::logic_error("propagation_matrix: nonpositive vertex degree");
    for (std::int64_t i = 0; i < bv.size(); ++i)
        if (!(bv[i] > T(0)))
            throw std::logic_error("propagation_matrix: nonpositive hyperedge degree");
    int n = dv.dim(0), m = bv.dim(0);
    Value dinv_sqrt = t.diag(t.div(t.constant(Tensor<T>::ones({n})), t.vsqrt(f.D_diag)));
    Value binv = t.diag(t.div(t.constant(Tensor<T>::ones({m})), f.B_diag));
    Value hb = t.matmul(f.H, binv);                          // [N, M]
    Value core = t.matmul(hb, t.transpose(f.H));             // [N, N]
    return t.matmul(dinv_sqrt, t.matmul(core, dinv_sqrt));
}

// I - P, exposed for verification; the forward layer propagates with P.
template <typename T>
Value laplacian(Tape<T>& t, const IncidenceFactors& f) {
    Value p = propagation_matrix(t, f);
    int n = t.value(p).dim(0);
    return t.sub(t.constant(Tensor<T>::identity(n)), p);
}

// ELU(P X Theta) for one item given prebuilt factors.
template <typename T>
Value hypergraph_apply(Tape<T>& t, Value x_item, const IncidenceFactors& f,
                       const HypergraphLayer<T>& layer) {
    const Tensor<T>& xv = t.value(x_item);
    int h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    Value p = propagation_matrix(t, f);
    Value flat = t.reshape(x_item, {h * w, c});
    Value mixed = t.matmul(t.matmul(p, flat), t.param(*layer.theta));
    return t.reshape(t.elu(mixed), {1, h, w, layer.c_out});
}

template <typename T>
Value hypergraph_forward(Tape<T>& t, Value x, const HypergraphLayer<T>& layer) {
    if (t.value(x).rank() != 4)
        throw std::invalid_argument("hypergraph_forward expects rank-4 input");
    // note: recording ops can reallocate the tape, so never hold a reference
    // to a node's tensor across op calls
    int batch = t.value(x).dim(0);
    std::vector<Value> items;
    items.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        Value xi = t.select_batch(x, b);
        IncidenceFactors f = build_incidence(t, xi, layer);
        items.push_back(hypergraph_apply(t, xi, f, layer));
    }
    return items.size() == 1 ? items[0] : t.concat_batch(items);
}

// Brute-force reference: P X with Theta = I and identity activation, written
// as explicit per-element sums over a binary incidence matrix.
template <typename T>
Tensor<T> spectral_oracle(const Tensor<T>& hb, const Tensor<T>& x) {
    if (hb.rank() != 2 || x.rank() != 2 || hb.dim(0) != x.dim(0))
        throw std::invalid_argument("spectral_oracle: H is [N,M], X is [N,C]");
    int n = hb.dim(0), m = hb.dim(1), c = x.dim(1);
    for (std::int64_t i = 0; i < hb.size(); ++i)
        if (hb[i] != T(0) && hb[i] != T(1))
            throw std::invalid_argument("spectral_oracle: H must be binary");
    std::vector<T> d(static_cast<std::size_t>(n), T(0));
    std::vector<T> bdeg(static_cast<std::size_t>(m), T(0));
    for (int i = 0; i < n; ++i)
        for (int e = 0; e < m; ++e) {
            d[i] += hb.at(i, e);
            bdeg[e] += hb.at(i, e);
        }
    for (int e = 0; e < m; ++e)
        if (bdeg[e] == T(0)) throw std::invalid_argument("spectral_oracle: empty hyperedge");
    for (int i = 0; i < n; ++i)
        if (d[i] == T(0)) throw std::invalid_argument("spectral_oracle: isolated vertex");

    Tensor<T> out({n, c});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            T pij = T(0);
            for (int e = 0; e < m; ++e) pij += hb.at(i, e) * hb.at(j, e) / bdeg[e];
            pij /= std::sqrt(d[i]) * std::sqrt(d[j]);
            for (int ch = 0; ch < c; ++ch) out.at(i, ch) += pij * x.at(j, ch);
        }
    return out;
}

}  // namespace hgin
