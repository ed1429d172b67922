#pragma once

// Test-side oracles, independent of the library's analytic gradient / JVP
// paths: central finite differences over parameters and inputs, and a
// dual-scalar re-implementation of the network forward pass for monolithic
// JVP comparison.

#include <cmath>
#include <functional>
#include <vector>

#include "flowlab/net.hpp"

namespace flowlab::testing {

// Central finite difference d loss / d p for every parameter entry.
// `loss` must re-evaluate from the (possibly perturbed) net.
inline VelocityNet fd_param_grad(VelocityNet net, const std::function<double(const VelocityNet&)>& loss,
                                 double h = 1e-5) {
    VelocityNet grads = VelocityNet::zeros(net.cfg);
    auto params = named_params(net);
    auto gparams = named_params(grads);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p].second;
        Tensor& g = *gparams[p].second;
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const double orig = t[i];
            t[i] = orig + h;
            const double lp = loss(net);
            t[i] = orig - h;
            const double lm = loss(net);
            t[i] = orig;
            g[i] = (lp - lm) / (2.0 * h);
        }
    }
    return grads;
}

// Max relative error between two gradient sets, entries below `floor`
// compared absolutely.
inline double max_rel_err(const VelocityNet& a, const VelocityNet& b, double floor = 1e-4) {
    auto pa = named_params(a);
    auto pb = named_params(b);
    double worst = 0.0;
    for (std::size_t p = 0; p < pa.size(); ++p) {
        const Tensor& ta = *pa[p].second;
        const Tensor& tb = *pb[p].second;
        for (std::size_t i = 0; i < ta.numel(); ++i) {
            const double denom = std::max({std::abs(ta[i]), std::abs(tb[i]), floor});
            worst = std::max(worst, std::abs(ta[i] - tb[i]) / denom);
        }
    }
    return worst;
}

// Directional central difference (F(x+h v_x, t+h v_t) - F(x-h v_x, t-h v_t)) / 2h.
inline Tensor fd_directional(const VelocityNet& net, const Tensor& x, double t, const Tensor& cond,
                             const Tensor& v_x, double v_t, double h = 1e-5) {
    Tensor xp = x, xm = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        xp[i] += h * v_x[i];
        xm[i] -= h * v_x[i];
    }
    Tensor fp = net_forward(net, xp, t + h * v_t, cond);
    Tensor fm = net_forward(net, xm, t - h * v_t, cond);
    Tensor out = fp;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (fp[i] - fm[i]) / (2.0 * h);
    return out;
}

// First-order dual scalar; composing the whole forward pass in this type
// yields the monolithic JVP of the composed function.
struct Dual {
    double v = 0.0;
    double d = 0.0;
};
inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
inline Dual operator*(double s, Dual a) { return {s * a.v, s * a.d}; }
inline Dual dual_sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual dual_cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual dual_silu(Dual a) {
    return {silu(a.v), silu_grad(a.v) * a.d};
}

inline std::vector<Dual> dual_affine(const Affine& a, const std::vector<Dual>& x) {
    const std::size_t out = a.w.shape[0], in = a.w.shape[1];
    std::vector<Dual> y(out);
    for (std::size_t r = 0; r < out; ++r) {
        Dual acc{a.b[r], 0.0};
        for (std::size_t c = 0; c < in; ++c) acc = acc + a.w.at(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

// Whole-network forward with dual scalars: the independent route for the
// block-wise JVP invariant.
inline std::pair<Tensor, Tensor> dual_net_jvp(const VelocityNet& net, const Tensor& x, double t,
                                              const Tensor& cond, const Tensor& v_x, double v_t) {
    const auto& cfg = net.cfg;
    Dual td{t, v_t};
    std::vector<Dual> tf(2 * cfg.n_freq);
    for (int k = 0; k < cfg.n_freq; ++k) {
        const double w = std::pow(cfg.max_freq, static_cast<double>(k) / (cfg.n_freq - 1));
        tf[k] = dual_sin(w * td);
        tf[cfg.n_freq + k] = dual_cos(w * td);
    }
    std::vector<Dual> temb = dual_affine(net.time_embed, tf);

    std::vector<Dual> cd(cond.numel());
    for (std::size_t i = 0; i < cond.numel(); ++i) cd[i] = {cond[i], 0.0};
    std::vector<Dual> cemb = dual_affine(net.cond_embed, cd);

    std::vector<Dual> xd(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) xd[i] = {x[i], v_x[i]};
    std::vector<Dual> h = dual_affine(net.input_embed, xd);

    for (const auto& blk : net.blocks) {
        std::vector<Dual> u(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) u[i] = h[i] + temb[i] + cemb[i];
        std::vector<Dual> a1 = dual_affine(blk.fc1, u);
        for (auto& v : a1) v = dual_silu(v);
        std::vector<Dual> delta = dual_affine(blk.fc2, a1);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + delta[i];
    }
    std::vector<Dual> y = dual_affine(net.output_layer, h);

    Tensor value({y.size()}), tangent({y.size()});
    for (std::size_t i = 0; i < y.size(); ++i) {
        value[i] = y[i].v;
        tangent[i] = y[i].d;
    }
    return {value, tangent};
}

}  // namespace flowlab::testing
