#include "flowlab/ccd.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

void CcdConfig::validate() const {
    if (warmup_h <= 0) throw std::invalid_argument("ccd: warmup_h must be positive");
    if (norm_c <= 0.0) throw std::invalid_argument("ccd: norm_c must be positive");
    if (ema_mu < 0.0 || ema_mu > 1.0) throw std::invalid_argument("ccd: ema_mu outside [0,1]");
    if (lr <= 0.0) throw std::invalid_argument("ccd: lr must be positive");
    if (total_iters <= 0) throw std::invalid_argument("ccd: total_iters must be positive");
    if (batch_size <= 0) throw std::invalid_argument("ccd: batch_size must be positive");
}

double warmup_coefficient(std::int64_t iters, std::int64_t warmup_h) {
    if (warmup_h <= 0) throw std::invalid_argument("warmup_coefficient: H must be positive");
    const double r = static_cast<double>(iters) / static_cast<double>(warmup_h);
    return r < 1.0 ? r : 1.0;
}

Tensor ccd_tangent(const VelocityNet& teacher, const VelocityNet& student_ema, const Tensor& x_t,
                   double t, const Tensor& cond, double r) {
    Tensor dxdt = net_forward(teacher, x_t, t, cond);
    auto [f_ema, df] = net_jvp_blockwise(student_ema, x_t, t, cond, dxdt, 1.0);
    Tensor g = dxdt;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= f_ema[i] + r * t * df[i];
    return g;
}

Tensor tangent_normalize(const Tensor& g, double c) {
    if (c <= 0.0) throw std::invalid_argument("tangent_normalize: c must be positive");
    return scale(g, 1.0 / (norm(g) + c));
}

double ccd_loss(const VelocityNet& student, const VelocityNet& student_ema,
                const std::vector<CcdSample>& batch, VelocityNet& grads) {
    if (batch.empty()) throw std::invalid_argument("ccd_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& s : batch) {
        ForwardCache cache;
        Tensor pred = net_forward(student, s.x_t, s.t, s.cond, &cache);
        Tensor target = net_forward(student_ema, s.x_t, s.t, s.cond);  // constant w.r.t. theta
        Tensor resid = pred;
        for (std::size_t i = 0; i < resid.numel(); ++i) resid[i] -= target[i] + s.g[i];
        loss += sq_norm(resid) * inv_b;
        net_backward(student, cache, s.x_t, s.cond, scale(resid, 2.0 * inv_b), grads);
    }
    return loss;
}

double ccd_loss_value(const VelocityNet& student, const VelocityNet& student_ema,
                      const std::vector<CcdSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("ccd_loss: empty batch");
    double loss = 0.0;
    for (const auto& s : batch) {
        Tensor pred = net_forward(student, s.x_t, s.t, s.cond);
        Tensor target = net_forward(student_ema, s.x_t, s.t, s.cond);
        Tensor resid = pred;
        for (std::size_t i = 0; i < resid.numel(); ++i) resid[i] -= target[i] + s.g[i];
        loss += sq_norm(resid);
    }
    return loss / static_cast<double>(batch.size());
}

std::vector<CcdSample> ccd_prepare_batch(const VelocityNet& teacher, const TrainState& state,
                                         const CcdConfig& cfg, const std::vector<ToySample>& batch,
                                         Rng& rng, double r, CcdBatchTrace* trace) {
    if (batch.empty()) throw std::invalid_argument("ccd: empty batch");
    std::vector<CcdSample> out;
    out.reserve(batch.size());
    double t_sum = 0.0, norm_sum = 0.0;
    for (const auto& sample : batch) {
        Tensor x0 = flatten_frames(sample);
        Tensor x1 = rng.normal_tensor(x0.shape);
        const double t = cfg.sampler.sample(rng);
        CcdSample s;
        s.x_t = interpolate(x0, x1, t);
        s.cond = sample.cond;
        s.t = t;
        Tensor g = ccd_tangent(teacher, state.theta_ema, s.x_t, t, s.cond, r);
        norm_sum += norm(g);
        s.g = tangent_normalize(g, cfg.norm_c);
        t_sum += t;
        out.push_back(std::move(s));
    }
    if (trace) {
        trace->iter = state.iters;
        trace->r = r;
        trace->t = t_sum / static_cast<double>(batch.size());
        trace->raw_tangent_norm = norm_sum / static_cast<double>(batch.size());
    }
    return out;
}

void ccd_apply_update(TrainState& state, const CcdConfig& cfg, VelocityNet& grads) {
    AdamWConfig opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    adamw_step(state, grads, opt);
    ema_update(state, cfg.ema_mu);
    state.iters += 1;
}

CcdBatchTrace ccd_train_step(const VelocityNet& teacher, TrainState& state, const CcdConfig& cfg,
                             const std::vector<ToySample>& batch, Rng& rng) {
    CcdBatchTrace trace;
    const double r = warmup_coefficient(state.iters, cfg.warmup_h);
    auto samples = ccd_prepare_batch(teacher, state, cfg, batch, rng, r, &trace);
    VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
    trace.loss = ccd_loss(state.theta, state.theta_ema, samples, grads);
    ccd_apply_update(state, cfg, grads);
    return trace;
}

CcdBatchTrace dcd_train_step(const VelocityNet& teacher, TrainState& state, const CcdConfig& cfg,
                             const std::vector<ToySample>& batch, Rng& rng, double delta_t) {
    if (batch.empty()) throw std::invalid_argument("dcd: empty batch");
    if (delta_t <= 0.0) throw std::invalid_argument("dcd: delta_t must be positive");
    CcdBatchTrace trace;
    trace.iter = state.iters;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
    double loss = 0.0, t_sum = 0.0;
    for (const auto& sample : batch) {
        Tensor x0 = flatten_frames(sample);
        Tensor x1 = rng.normal_tensor(x0.shape);
        double t = cfg.sampler.sample(rng);
        while (t - delta_t < 0.0) t = cfg.sampler.sample(rng);  // resample below delta_t
        t_sum += t;
        Tensor x_t = interpolate(x0, x1, t);

        // One Euler step of the teacher toward t - delta_t.
        Tensor v_teacher = net_forward(teacher, x_t, t, sample.cond);
        Tensor x_prev = x_t;
        for (std::size_t i = 0; i < x_prev.numel(); ++i) x_prev[i] -= delta_t * v_teacher[i];
        Tensor target = consistency_fn(state.theta_ema, x_prev, t - delta_t, sample.cond);

        ForwardCache cache;
        Tensor pred_v = net_forward(state.theta, x_t, t, sample.cond, &cache);
        Tensor resid = x_t;  // f_theta(x_t,t) - target
        for (std::size_t i = 0; i < resid.numel(); ++i) resid[i] -= t * pred_v[i] + target[i];
        loss += sq_norm(resid) * inv_b;
        // d loss / d pred_v = -2 t resid / B
        net_backward(state.theta, cache, x_t, sample.cond, scale(resid, -2.0 * t * inv_b), grads);
    }
    trace.loss = loss;
    trace.t = t_sum * inv_b;
    ccd_apply_update(state, cfg, grads);
    return trace;
}

Tensor meanflow_identity_target(const VelocityNet& teacher, const VelocityNet& student,
                                const Tensor& x_t, double t, const Tensor& cond) {
    Tensor dxdt = net_forward(teacher, x_t, t, cond);
    auto [f, df] = net_jvp_blockwise(student, x_t, t, cond, dxdt, 1.0);
    Tensor out = dxdt;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= t * df[i];
    return out;
}

}  // namespace flowlab
