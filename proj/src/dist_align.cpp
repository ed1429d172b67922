#include "flowlab/dist_align.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace flowlab {

namespace {

Affine affine_zeros(std::size_t out, std::size_t in) {
    return Affine{Tensor({out, in}), Tensor({out})};
}

Affine affine_init(std::size_t out, std::size_t in, Rng& rng) {
    Affine a = affine_zeros(out, in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    for (double& v : a.w.data) v = rng.uniform(-bound, bound);
    return a;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out({a.numel() + b.numel()});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
    return out;
}

Tensor frame_of(const Tensor& frames, std::size_t f) {
    const std::size_t d = frames.shape[1];
    Tensor out({d});
    std::copy(frames.data.begin() + f * d, frames.data.begin() + (f + 1) * d, out.data.begin());
    return out;
}

}  // namespace

FeatureNet FeatureNet::init(int dim, int hidden, int features, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, "feature_net");
    FeatureNet f;
    f.fc1 = affine_init(hidden, dim, rng);
    f.fc2 = affine_init(features, hidden, rng);
    return f;
}

Tensor FeatureNet::forward(const Tensor& frame) const {
    Tensor h = affine_apply(fc1, frame);
    for (double& v : h.data) v = silu(v);
    return affine_apply(fc2, h);
}

Tensor FeatureNet::backward_input(const Tensor& frame, const Tensor& upstream) const {
    Tensor pre = affine_apply(fc1, frame);
    // dL/dh through fc2
    const std::size_t out = fc2.w.shape[0], hid = fc2.w.shape[1], in = fc1.w.shape[1];
    Tensor gh({hid});
    for (std::size_t r = 0; r < out; ++r) {
        for (std::size_t c = 0; c < hid; ++c) gh[c] += fc2.w.at(r, c) * upstream[r];
    }
    for (std::size_t c = 0; c < hid; ++c) gh[c] *= silu_grad(pre[c]);
    Tensor gx({in});
    for (std::size_t r = 0; r < hid; ++r) {
        for (std::size_t c = 0; c < in; ++c) gx[c] += fc1.w.at(r, c) * gh[r];
    }
    return gx;
}

std::uint64_t FeatureNet::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Tensor& t) {
        for (double v : t.data) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            h ^= bits;
            h *= 0x100000001b3ULL;
        }
    };
    mix(fc1.w);
    mix(fc1.b);
    mix(fc2.w);
    mix(fc2.b);
    return h;
}

double ScoreHead::forward(const Tensor& in) const {
    Tensor h = affine_apply(fc1, in);
    for (double& v : h.data) v = silu(v);
    return affine_apply(fc2, h)[0];
}

Tensor ScoreHead::backward(const Tensor& in, double u, ScoreHead& grads) const {
    Tensor pre = affine_apply(fc1, in);
    Tensor h = pre;
    for (double& v : h.data) v = silu(v);
    Tensor up({1});
    up[0] = u;
    Tensor gh = affine_backward(fc2, h, up, grads.fc2);
    for (std::size_t i = 0; i < gh.numel(); ++i) gh[i] *= silu_grad(pre[i]);
    return affine_backward(fc1, in, gh, grads.fc1);
}

DiscriminatorHeads DiscriminatorHeads::init(int dim_cond, int features, int hidden, Rng& rng) {
    DiscriminatorHeads h;
    h.cond_proj = affine_init(features, dim_cond, rng);
    h.spatial.fc1 = affine_init(hidden, 2 * features, rng);
    h.spatial.fc2 = affine_init(1, hidden, rng);
    h.temporal.fc1 = affine_init(hidden, 3 * features, rng);
    h.temporal.fc2 = affine_init(1, hidden, rng);
    return h;
}

DiscriminatorHeads DiscriminatorHeads::zeros_like(const DiscriminatorHeads& h) {
    DiscriminatorHeads z;
    z.cond_proj = Affine{Tensor(h.cond_proj.w.shape), Tensor(h.cond_proj.b.shape)};
    z.spatial.fc1 = Affine{Tensor(h.spatial.fc1.w.shape), Tensor(h.spatial.fc1.b.shape)};
    z.spatial.fc2 = Affine{Tensor(h.spatial.fc2.w.shape), Tensor(h.spatial.fc2.b.shape)};
    z.temporal.fc1 = Affine{Tensor(h.temporal.fc1.w.shape), Tensor(h.temporal.fc1.b.shape)};
    z.temporal.fc2 = Affine{Tensor(h.temporal.fc2.w.shape), Tensor(h.temporal.fc2.b.shape)};
    return z;
}

std::vector<Tensor*> head_params(DiscriminatorHeads& h) {
    return {&h.cond_proj.w,    &h.cond_proj.b,    &h.spatial.fc1.w,  &h.spatial.fc1.b,
            &h.spatial.fc2.w,  &h.spatial.fc2.b,  &h.temporal.fc1.w, &h.temporal.fc1.b,
            &h.temporal.fc2.w, &h.temporal.fc2.b};
}

void DaConfig::validate() const {
    if (lambda_adv <= 0.0) throw std::invalid_argument("da: lambda_adv must be positive");
    if (n_warmup < 0) throw std::invalid_argument("da: n_warmup must be non-negative");
    if (disc_lr <= 0.0) throw std::invalid_argument("da: disc_lr must be positive");
}

Tensor predict_x0_hat(const VelocityNet& student, const Tensor& x_t, double t, const Tensor& cond) {
    return consistency_fn(student, x_t, t, cond);
}

std::vector<double> disc_logits(const DiscriminatorHeads& heads, const FeatureNet& features,
                                const Tensor& frames, const Tensor& cond) {
    if (frames.shape.size() != 2) throw std::invalid_argument("disc_logits: frames must be [F, D]");
    const std::size_t F = frames.shape[0];
    if (F < 2) throw std::invalid_argument("disc_logits: need at least 2 frames for temporal heads");
    Tensor cf = affine_apply(heads.cond_proj, cond);
    std::vector<Tensor> phi(F);
    for (std::size_t f = 0; f < F; ++f) phi[f] = features.forward(frame_of(frames, f));
    std::vector<double> logits;
    logits.reserve(2 * F - 1);
    for (std::size_t f = 0; f < F; ++f) logits.push_back(heads.spatial.forward(concat(phi[f], cf)));
    for (std::size_t f = 0; f + 1 < F; ++f) {
        logits.push_back(heads.temporal.forward(concat(concat(phi[f], phi[f + 1]), cf)));
    }
    return logits;
}

namespace {

// Shared hinge-backward over one sample's heads. `sign` selects the hinge arm:
// d/dlogit max(0, 1 - s*logit) = -s when active. Head gradients accumulate into
// `hgrads` when non-null; returns per-frame feature gradients and the hinge sum.
double hinge_sample(const DiscriminatorHeads& heads, const FeatureNet& features,
                    const Tensor& frames, const Tensor& cond, double sign, double weight,
                    DiscriminatorHeads* hgrads, std::vector<Tensor>* phi_grads_out) {
    const std::size_t F = frames.shape[0];
    const std::size_t K = features.fc2.w.shape[0];
    Tensor cf = affine_apply(heads.cond_proj, cond);
    std::vector<Tensor> phi(F);
    for (std::size_t f = 0; f < F; ++f) phi[f] = features.forward(frame_of(frames, f));

    std::vector<Tensor> phi_grads(F, Tensor({K}));
    Tensor cf_grad({K});
    double loss = 0.0;

    auto route = [&](const Tensor& in, const ScoreHead& head, ScoreHead* hg,
                     std::vector<std::size_t> frame_idx) {
        const double logit = head.forward(in);
        const double margin = 1.0 - sign * logit;
        if (margin > 0.0) {
            loss += margin;
            if (hgrads || phi_grads_out) {
                ScoreHead dummy;
                ScoreHead* sink = hg;
                if (!sink) {
                    dummy.fc1 = Affine{Tensor(head.fc1.w.shape), Tensor(head.fc1.b.shape)};
                    dummy.fc2 = Affine{Tensor(head.fc2.w.shape), Tensor(head.fc2.b.shape)};
                    sink = &dummy;
                }
                Tensor gin = head.backward(in, -sign * weight, *sink);
                for (std::size_t j = 0; j < frame_idx.size(); ++j) {
                    for (std::size_t k = 0; k < K; ++k) {
                        phi_grads[frame_idx[j]][k] += gin[j * K + k];
                    }
                }
                for (std::size_t k = 0; k < K; ++k) cf_grad[k] += gin[frame_idx.size() * K + k];
            }
        }
    };

    for (std::size_t f = 0; f < F; ++f) {
        route(concat(phi[f], cf), heads.spatial, hgrads ? &hgrads->spatial : nullptr, {f});
    }
    for (std::size_t f = 0; f + 1 < F; ++f) {
        route(concat(concat(phi[f], phi[f + 1]), cf), heads.temporal,
              hgrads ? &hgrads->temporal : nullptr, {f, f + 1});
    }
    if (hgrads) affine_backward(heads.cond_proj, cond, cf_grad, hgrads->cond_proj);
    if (phi_grads_out) *phi_grads_out = std::move(phi_grads);
    return loss;
}

}  // namespace

double d_loss(const DiscriminatorHeads& heads, const FeatureNet& features,
              const std::vector<DaBatchItem>& batch, DiscriminatorHeads& grads) {
    if (batch.empty()) throw std::invalid_argument("d_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        loss += hinge_sample(heads, features, item.real_frames, item.cond, +1.0, inv_b, &grads,
                             nullptr) *
                inv_b;
        loss += hinge_sample(heads, features, item.fake_frames, item.cond, -1.0, inv_b, &grads,
                             nullptr) *
                inv_b;
    }
    return loss;
}

double g_adv_loss(const VelocityNet& student, const DiscriminatorHeads& heads,
                  const FeatureNet& features, const std::vector<GAdvItem>& batch,
                  VelocityNet& grads) {
    if (batch.empty()) throw std::invalid_argument("g_adv_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::size_t D = features.fc1.w.shape[1];
    double loss = 0.0;
    for (const auto& item : batch) {
        ForwardCache cache;
        Tensor v = net_forward(student, item.x_t, item.t, item.cond, &cache);
        Tensor x0_hat = item.x_t;
        for (std::size_t i = 0; i < x0_hat.numel(); ++i) x0_hat[i] -= item.t * v[i];
        const std::size_t F = x0_hat.numel() / D;
        Tensor fake({F, D});
        fake.data = x0_hat.data;

        std::vector<Tensor> phi_grads;
        loss += hinge_sample(heads, features, fake, item.cond, +1.0, 1.0, nullptr, &phi_grads) *
                inv_b;

        // d loss / d x̂0 via the frozen feature net, then through x̂0 = x_t - t F.
        Tensor upstream_v({x0_hat.numel()});
        for (std::size_t f = 0; f < F; ++f) {
            Tensor gframe = features.backward_input(frame_of(fake, f), phi_grads[f]);
            for (std::size_t d = 0; d < D; ++d) {
                upstream_v[f * D + d] = -item.t * gframe[d] * inv_b;
            }
        }
        net_backward(student, cache, item.x_t, item.cond, upstream_v, grads);
    }
    return loss;
}

DaTrace da_train_step(const VelocityNet& teacher, TrainState& state, DiscState& disc,
                      const FeatureNet& features, const CcdConfig& ccd_cfg, const DaConfig& da_cfg,
                      const std::vector<ToySample>& batch, Rng& rng) {
    DaTrace trace;
    trace.iter = state.iters;
    if (state.iters < da_cfg.n_warmup) {
        CcdBatchTrace t = ccd_train_step(teacher, state, ccd_cfg, batch, rng);
        trace.distill_loss = t.loss;
        trace.active = false;
        return trace;
    }
    trace.active = true;

    // Same draw order as the gated path.
    CcdBatchTrace ctrace;
    const double r = warmup_coefficient(state.iters, ccd_cfg.warmup_h);
    auto samples = ccd_prepare_batch(teacher, state, ccd_cfg, batch, rng, r, &ctrace);

    // Discriminator update on real x0 vs detached x̂0.
    std::vector<DaBatchItem> d_batch;
    d_batch.reserve(batch.size());
    const std::size_t D = batch.front().cond.numel();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Tensor x0_hat = predict_x0_hat(state.theta, samples[i].x_t, samples[i].t, samples[i].cond);
        Tensor fake({x0_hat.numel() / D, D});
        fake.data = x0_hat.data;
        d_batch.push_back({batch[i].frames, std::move(fake), batch[i].cond});
    }
    DiscriminatorHeads hgrads = DiscriminatorHeads::zeros_like(disc.heads);
    trace.d_loss = d_loss(disc.heads, features, d_batch, hgrads);
    disc.adam_step += 1;
    AdamWConfig dopt;
    dopt.lr = da_cfg.disc_lr;
    std::vector<const Tensor*> gptr;
    for (Tensor* t : head_params(hgrads)) gptr.push_back(t);
    adamw_update(head_params(disc.heads), head_params(disc.adam_m), head_params(disc.adam_v), gptr,
                 disc.adam_step, dopt);

    // Generator update: lambda_adv * adversarial + distill loss.
    VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
    trace.distill_loss = ccd_loss(state.theta, state.theta_ema, samples, grads);
    std::vector<GAdvItem> g_batch;
    g_batch.reserve(samples.size());
    for (const auto& s : samples) g_batch.push_back({s.x_t, s.cond, s.t});
    VelocityNet adv_grads = VelocityNet::zeros(state.theta.cfg);
    trace.g_adv_loss = g_adv_loss(state.theta, disc.heads, features, g_batch, adv_grads);
    auto gp = named_params(grads);
    auto ap = named_params(adv_grads);
    for (std::size_t p = 0; p < gp.size(); ++p) {
        axpy(da_cfg.lambda_adv, *ap[p].second, *gp[p].second);
    }
    ccd_apply_update(state, ccd_cfg, grads);
    return trace;
}

}  // namespace flowlab
