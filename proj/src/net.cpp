#include "flowlab/net.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

Tensor affine_apply(const Affine& a, const Tensor& x) {
    const std::size_t out = a.w.shape[0], in = a.w.shape[1];
    if (x.numel() != in) {
        throw std::invalid_argument("affine: input dimension " + std::to_string(x.numel()) +
                                    " != expected " + std::to_string(in));
    }
    Tensor y({out});
    for (std::size_t r = 0; r < out; ++r) {
        double acc = a.b[r];
        const double* wr = &a.w.data[r * in];
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Tensor affine_backward(const Affine& a, const Tensor& x, const Tensor& upstream, Affine& grads) {
    const std::size_t out = a.w.shape[0], in = a.w.shape[1];
    Tensor gx({in});
    for (std::size_t r = 0; r < out; ++r) {
        const double u = upstream[r];
        grads.b[r] += u;
        const double* wr = &a.w.data[r * in];
        double* gwr = &grads.w.data[r * in];
        for (std::size_t c = 0; c < in; ++c) {
            gwr[c] += u * x[c];
            gx[c] += wr[c] * u;
        }
    }
    return gx;
}

namespace {

// W·x without the bias, for tangent propagation.
Tensor linear_apply(const Affine& a, const Tensor& x) {
    const std::size_t out = a.w.shape[0], in = a.w.shape[1];
    Tensor y({out});
    for (std::size_t r = 0; r < out; ++r) {
        double acc = 0.0;
        const double* wr = &a.w.data[r * in];
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Affine affine_zeros(std::size_t out, std::size_t in) {
    return Affine{Tensor({out, in}), Tensor({out})};
}

// He-style fan-in scaled uniform.
Affine affine_init(std::size_t out, std::size_t in, Rng& rng) {
    Affine a = affine_zeros(out, in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    for (double& v : a.w.data) v = rng.uniform(-bound, bound);
    return a;
}

}  // namespace

VelocityNet VelocityNet::zeros(const NetConfig& cfg) {
    if (cfg.n_blocks < 2) throw std::invalid_argument("VelocityNet: n_blocks must be >= 2");
    VelocityNet net;
    net.cfg = cfg;
    const std::size_t w = cfg.width;
    net.input_embed = affine_zeros(w, cfg.dim_in);
    net.time_embed = affine_zeros(w, 2 * cfg.n_freq);
    net.cond_embed = affine_zeros(w, cfg.dim_cond);
    net.blocks.resize(cfg.n_blocks);
    for (auto& blk : net.blocks) {
        blk.fc1 = affine_zeros(w, w);
        blk.fc2 = affine_zeros(w, w);
    }
    net.output_layer = affine_zeros(cfg.dim_in, w);
    return net;
}

VelocityNet VelocityNet::init(const NetConfig& cfg, Rng& rng) {
    VelocityNet net = zeros(cfg);
    const std::size_t w = cfg.width;
    net.input_embed = affine_init(w, cfg.dim_in, rng);
    net.time_embed = affine_init(w, 2 * cfg.n_freq, rng);
    net.cond_embed = affine_init(w, cfg.dim_cond, rng);
    for (auto& blk : net.blocks) {
        blk.fc1 = affine_init(w, w, rng);
        blk.fc2 = affine_init(w, w, rng);
    }
    // Output stays zero: the untrained net predicts zero velocity.
    return net;
}

std::vector<std::pair<std::string, Tensor*>> named_params(VelocityNet& net) {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("input_embed.w", &net.input_embed.w);
    out.emplace_back("input_embed.b", &net.input_embed.b);
    out.emplace_back("time_embed.w", &net.time_embed.w);
    out.emplace_back("time_embed.b", &net.time_embed.b);
    out.emplace_back("cond_embed.w", &net.cond_embed.w);
    out.emplace_back("cond_embed.b", &net.cond_embed.b);
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const std::string p = "blocks." + std::to_string(i) + ".";
        out.emplace_back(p + "fc1.w", &net.blocks[i].fc1.w);
        out.emplace_back(p + "fc1.b", &net.blocks[i].fc1.b);
        out.emplace_back(p + "fc2.w", &net.blocks[i].fc2.w);
        out.emplace_back(p + "fc2.b", &net.blocks[i].fc2.b);
    }
    out.emplace_back("output_layer.w", &net.output_layer.w);
    out.emplace_back("output_layer.b", &net.output_layer.b);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> named_params(const VelocityNet& net) {
    auto mut = named_params(const_cast<VelocityNet&>(net));
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
}

Tensor time_features(const NetConfig& cfg, double t) {
    Tensor f({static_cast<std::size_t>(2 * cfg.n_freq)});
    for (int k = 0; k < cfg.n_freq; ++k) {
        const double w = std::pow(cfg.max_freq, static_cast<double>(k) / (cfg.n_freq - 1));
        f[k] = std::sin(w * t);
        f[cfg.n_freq + k] = std::cos(w * t);
    }
    return f;
}

Tensor time_features_dt(const NetConfig& cfg, double t) {
    Tensor f({static_cast<std::size_t>(2 * cfg.n_freq)});
    for (int k = 0; k < cfg.n_freq; ++k) {
        const double w = std::pow(cfg.max_freq, static_cast<double>(k) / (cfg.n_freq - 1));
        f[k] = w * std::cos(w * t);
        f[cfg.n_freq + k] = -w * std::sin(w * t);
    }
    return f;
}

Tensor net_forward(const VelocityNet& net, const Tensor& x, double t, const Tensor& cond,
                   ForwardCache* cache) {
    if (x.numel() != static_cast<std::size_t>(net.cfg.dim_in)) {
        throw std::invalid_argument("net_forward: sample dimension " + std::to_string(x.numel()) +
                                    " != dim_in " + std::to_string(net.cfg.dim_in));
    }
    if (cond.numel() != static_cast<std::size_t>(net.cfg.dim_cond)) {
        throw std::invalid_argument("net_forward: cond dimension " + std::to_string(cond.numel()) +
                                    " != dim_cond " + std::to_string(net.cfg.dim_cond));
    }
    Tensor tf = time_features(net.cfg, t);
    Tensor temb = affine_apply(net.time_embed, tf);
    Tensor cemb = affine_apply(net.cond_embed, cond);
    Tensor h = affine_apply(net.input_embed, x);

    if (cache) {
        cache->tf = tf;
        cache->temb = temb;
        cache->cemb = cemb;
        cache->h.clear();
        cache->u.clear();
        cache->pre1.clear();
        cache->a1.clear();
        cache->h.push_back(h);
    }

    for (const auto& blk : net.blocks) {
        Tensor u = h;
        for (std::size_t i = 0; i < u.numel(); ++i) u[i] += temb[i] + cemb[i];
        Tensor pre1 = affine_apply(blk.fc1, u);
        Tensor a1 = pre1;
        for (double& v : a1.data) v = silu(v);
        Tensor delta = affine_apply(blk.fc2, a1);
        for (std::size_t i = 0; i < h.numel(); ++i) h[i] += delta[i];
        if (cache) {
            cache->u.push_back(std::move(u));
            cache->pre1.push_back(std::move(pre1));
            cache->a1.push_back(std::move(a1));
            cache->h.push_back(h);
        }
    }
    Tensor y = affine_apply(net.output_layer, h);
    check_finite(y, "net_forward");
    return y;
}

Tensor net_backward(const VelocityNet& net, const ForwardCache& cache, const Tensor& x,
                    const Tensor& cond, const Tensor& upstream, VelocityNet& grads) {
    if (upstream.numel() != static_cast<std::size_t>(net.cfg.dim_in)) {
        throw std::invalid_argument("net_backward: upstream dimension " +
                                    std::to_string(upstream.numel()) + " != dim_in " +
                                    std::to_string(net.cfg.dim_in));
    }
    const std::size_t n_blocks = net.blocks.size();
    Tensor g_h = affine_backward(net.output_layer, cache.h[n_blocks], upstream, grads.output_layer);
    Tensor g_temb({cache.temb.shape});
    Tensor g_cemb({cache.cemb.shape});

    for (std::size_t bi = n_blocks; bi-- > 0;) {
        const auto& blk = net.blocks[bi];
        // h_next = h + fc2(silu(fc1(u))), u = h + temb + cemb
        Tensor g_a1 = affine_backward(blk.fc2, cache.a1[bi], g_h, grads.blocks[bi].fc2);
        Tensor g_pre1 = g_a1;
        for (std::size_t i = 0; i < g_pre1.numel(); ++i) g_pre1[i] *= silu_grad(cache.pre1[bi][i]);
        Tensor g_u = affine_backward(blk.fc1, cache.u[bi], g_pre1, grads.blocks[bi].fc1);
        for (std::size_t i = 0; i < g_h.numel(); ++i) {
            g_h[i] += g_u[i];  // residual path plus the block-input path
            g_temb[i] += g_u[i];
            g_cemb[i] += g_u[i];
        }
    }
    affine_backward(net.time_embed, cache.tf, g_temb, grads.time_embed);
    affine_backward(net.cond_embed, cond, g_cemb, grads.cond_embed);
    Tensor g_x = affine_backward(net.input_embed, x, g_h, grads.input_embed);
    check_finite(g_x, "net_backward");
    return g_x;
}

std::pair<Tensor, Tensor> net_jvp_blockwise(const VelocityNet& net, const Tensor& x, double t,
                                            const Tensor& cond, const Tensor& v_x, double v_t) {
    check_same_shape(x, v_x, "net_jvp_blockwise tangent");

    // Time embedding JVP.
    Tensor tf = time_features(net.cfg, t);
    Tensor dtf = scale(time_features_dt(net.cfg, t), v_t);
    Tensor temb = affine_apply(net.time_embed, tf);
    Tensor g_temb = linear_apply(net.time_embed, dtf);

    Tensor cemb = affine_apply(net.cond_embed, cond);  // cond carries no tangent

    // Input embedding JVP.
    Tensor h = affine_apply(net.input_embed, x);
    Tensor g_h = linear_apply(net.input_embed, v_x);

    // Per-block JVP, each block fed the previous block's (value, tangent).
    for (const auto& blk : net.blocks) {
        Tensor u = h;
        Tensor g_u = g_h;
        for (std::size_t i = 0; i < u.numel(); ++i) {
            u[i] += temb[i] + cemb[i];
            g_u[i] += g_temb[i];
        }
        Tensor pre1 = affine_apply(blk.fc1, u);
        Tensor g_pre1 = linear_apply(blk.fc1, g_u);
        Tensor a1 = pre1;
        Tensor g_a1 = g_pre1;
        for (std::size_t i = 0; i < a1.numel(); ++i) {
            g_a1[i] *= silu_grad(pre1[i]);
            a1[i] = silu(a1[i]);
        }
        Tensor delta = affine_apply(blk.fc2, a1);
        Tensor g_delta = linear_apply(blk.fc2, g_a1);
        for (std::size_t i = 0; i < h.numel(); ++i) {
            h[i] += delta[i];
            g_h[i] += g_delta[i];
        }
    }

    // Output layer JVP.
    Tensor y = affine_apply(net.output_layer, h);
    Tensor g_y = linear_apply(net.output_layer, g_h);
    check_finite(g_y, "net_jvp_blockwise");
    return {std::move(y), std::move(g_y)};
}

}  // namespace flowlab
