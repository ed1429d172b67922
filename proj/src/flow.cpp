#include "flowlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowlab {

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
    check_same_shape(x0, x1, "interpolate");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolate: t outside [0,1]");
    Tensor out = x0;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
    return out;
}

double TimestepSampler::sample(Rng& rng) const {
    if (kind == TimestepKind::uniform) {
        return rng.uniform(kTimestepEps, 1.0 - kTimestepEps);
    }
    const double z = p_mean + p_std * rng.normal();
    const double t = sigmoid(z);
    return std::clamp(t, kTimestepEps, 1.0 - kTimestepEps);
}

TimestepKind timestep_kind_from_string(const std::string& s) {
    if (s == "uniform") return TimestepKind::uniform;
    if (s == "logit_normal") return TimestepKind::logit_normal;
    throw std::invalid_argument("unknown timestep sampler kind: " + s);
}

EulerSchedule EulerSchedule::uniform(int steps) {
    if (steps < 1) throw std::invalid_argument("EulerSchedule: steps must be positive");
    EulerSchedule s;
    s.times.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) {
        s.times[k] = 1.0 - static_cast<double>(k) / steps;
    }
    s.times.front() = 1.0;
    s.times.back() = 0.0;
    return s;
}

Tensor euler_sample(const VelocityNet& net, const Tensor& x1, const Tensor& cond,
                    const EulerSchedule& schedule) {
    Tensor x = x1;
    for (std::size_t k = 0; k + 1 < schedule.times.size(); ++k) {
        const double t_hi = schedule.times[k];
        const double t_lo = schedule.times[k + 1];
        Tensor v = net_forward(net, x, t_hi, cond);
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] -= (t_hi - t_lo) * v[i];
        if (!all_finite(x)) {
            throw std::runtime_error("euler_sample: non-finite state at step " + std::to_string(k));
        }
    }
    return x;
}

Tensor consistency_fn(const VelocityNet& net, const Tensor& x_t, double t, const Tensor& cond) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("consistency_fn: t outside [0,1]");
    if (t == 0.0) return x_t;  // boundary condition, bit-exact
    Tensor v = net_forward(net, x_t, t, cond);
    Tensor out = x_t;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= t * v[i];
    return out;
}

Tensor gaussian_oracle_velocity(const Tensor& x, double t, const std::vector<double>& mean0,
                                double var0) {
    if (x.numel() != mean0.size()) {
        throw std::invalid_argument("gaussian_oracle_velocity: dimension mismatch");
    }
    // Joint law per coordinate, x0 ~ N(m, var0), x1 ~ N(0, 1) independent:
    //   x_t = (1-t) x0 + t x1,     v = x1 - x0
    //   E[x_t] = (1-t) m           E[v] = -m
    //   Var(x_t) = (1-t)^2 var0 + t^2
    //   Cov(x_t, v) = t - (1-t) var0
    // so E[v | x_t = x] = -m + Cov/Var * (x - (1-t) m).
    const double var_xt = (1.0 - t) * (1.0 - t) * var0 + t * t;
    if (var_xt <= 0.0) {
        throw std::invalid_argument("gaussian_oracle_velocity: singular conditioning (t=0, var0=0)");
    }
    const double slope = (t - (1.0 - t) * var0) / var_xt;
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double m = mean0[i];
        out[i] = -m + slope * (x[i] - (1.0 - t) * m);
    }
    return out;
}

double fm_loss(const VelocityNet& net, const std::vector<FmBatchItem>& batch, VelocityNet& grads) {
    if (batch.empty()) throw std::invalid_argument("fm_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        ForwardCache cache;
        Tensor pred = net_forward(net, item.x_t, item.t, item.cond, &cache);
        Tensor resid = sub(pred, item.v_target);
        loss += sq_norm(resid) * inv_b;
        Tensor upstream = scale(resid, 2.0 * inv_b);
        net_backward(net, cache, item.x_t, item.cond, upstream, grads);
    }
    return loss;
}

double fm_loss_value(const VelocityNet& net, const std::vector<FmBatchItem>& batch) {
    if (batch.empty()) throw std::invalid_argument("fm_loss: empty batch");
    double loss = 0.0;
    for (const auto& item : batch) {
        Tensor pred = net_forward(net, item.x_t, item.t, item.cond);
        loss += sq_norm(sub(pred, item.v_target));
    }
    return loss / static_cast<double>(batch.size());
}

}  // namespace flowlab
