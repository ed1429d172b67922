#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

struct Affine {
    Tensor w;  // {out, in}
    Tensor b;  // {out}
};

Tensor affine_apply(const Affine& a, const Tensor& x);
// Accumulates dL/dw, dL/db into grads and returns dL/dx.
Tensor affine_backward(const Affine& a, const Tensor& x, const Tensor& upstream, Affine& grads);

// Residual block: h_out = h + fc2(silu(fc1(h + temb + cemb))).
struct ResBlock {
    Affine fc1;
    Affine fc2;
};

struct NetConfig {
    int dim_in = 32;    // flattened sample, F*D
    int dim_cond = 4;   // conditioning frame, D
    int width = 32;
    int n_blocks = 2;
    int n_freq = 8;         // sinusoidal time features, geometric frequency ladder
    double max_freq = 8.0;  // kept low: t-derivatives enter the distillation targets

    bool operator==(const NetConfig&) const = default;
};

// Block-structured velocity network F(x, t, cond): input embed, sinusoidal
// time embed, conditioning embed added into every block input, N residual
// blocks, zero-initialized output layer.
struct VelocityNet {
    NetConfig cfg;
    Affine input_embed;   // dim_in -> width
    Affine time_embed;    // 2*n_freq -> width
    Affine cond_embed;    // dim_cond -> width
    std::vector<ResBlock> blocks;
    Affine output_layer;  // width -> dim_in

    static VelocityNet init(const NetConfig& cfg, Rng& rng);
    static VelocityNet zeros(const NetConfig& cfg);
};

std::vector<std::pair<std::string, Tensor*>> named_params(VelocityNet& net);
std::vector<std::pair<std::string, const Tensor*>> named_params(const VelocityNet& net);

// [sin(w_k t)..., cos(w_k t)...] with w_k spaced geometrically in [1, max_freq].
Tensor time_features(const NetConfig& cfg, double t);
Tensor time_features_dt(const NetConfig& cfg, double t);

struct ForwardCache {
    Tensor tf, temb, cemb;
    std::vector<Tensor> h;     // h[0] = input embed output, h[i+1] = block i output
    std::vector<Tensor> u;     // block input after injections
    std::vector<Tensor> pre1;  // fc1 pre-activation
    std::vector<Tensor> a1;    // silu(pre1)
};

Tensor net_forward(const VelocityNet& net, const Tensor& x, double t, const Tensor& cond,
                   ForwardCache* cache = nullptr);

// Reverse mode for the scalar upstream·F. Accumulates parameter gradients into
// `grads` (a zero- or partially-filled net of identical layout) and returns
// dL/dx.
Tensor net_backward(const VelocityNet& net, const ForwardCache& cache, const Tensor& x,
                    const Tensor& cond, const Tensor& upstream, VelocityNet& grads);

// Iterative block-wise JVP: time-embed tangent, input-embed tangent, then each
// block consumes the previous block's (value, tangent) pair, then the output
// layer. Returns (F(x,t,cond), dF/d(direction)) with direction (v_x, v_t).
// The tangent is a plain value; nothing here participates in reverse mode.
std::pair<Tensor, Tensor> net_jvp_blockwise(const VelocityNet& net, const Tensor& x, double t,
                                            const Tensor& cond, const Tensor& v_x, double v_t);

}  // namespace flowlab
