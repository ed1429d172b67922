#include "flowlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

void adamw_update(const std::vector<Tensor*>& params, const std::vector<Tensor*>& m,
                  const std::vector<Tensor*>& v, const std::vector<const Tensor*>& grads,
                  std::int64_t step, const AdamWConfig& cfg) {
    for (const Tensor* g : grads) {
        if (!all_finite(*g)) throw std::runtime_error("adamw: non-finite gradient");
    }
    const double t = static_cast<double>(step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        Tensor& mp = *m[p];
        Tensor& vp = *v[p];
        const Tensor& g = *grads[p];
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            mp[i] = cfg.beta1 * mp[i] + (1.0 - cfg.beta1) * g[i];
            vp[i] = cfg.beta2 * vp[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = mp[i] / bc1;
            const double v_hat = vp[i] / bc2;
            theta[i] -=
                cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta[i]);
        }
    }
}

namespace {

std::vector<Tensor*> param_ptrs(VelocityNet& net) {
    std::vector<Tensor*> out;
    for (auto& [n, t] : named_params(net)) out.push_back(t);
    return out;
}

}  // namespace

void adamw_step(TrainState& state, const VelocityNet& grads, const AdamWConfig& cfg) {
    std::vector<const Tensor*> g;
    for (auto& [n, t] : named_params(grads)) {
        if (!all_finite(*t)) {
            throw std::runtime_error("adamw_step: non-finite gradient in " + n);
        }
        g.push_back(t);
    }
    state.adam_step += 1;
    adamw_update(param_ptrs(state.theta), param_ptrs(state.adam_m), param_ptrs(state.adam_v), g,
                 state.adam_step, cfg);
}

void ema_update(TrainState& state, double mu) {
    if (mu < 0.0 || mu > 1.0) {
        throw std::invalid_argument("ema_update: mu must lie in [0,1], got " + std::to_string(mu));
    }
    auto tp = named_params(state.theta);
    auto ep = named_params(state.theta_ema);
    for (std::size_t p = 0; p < tp.size(); ++p) {
        Tensor& ema = *ep[p].second;
        const Tensor& theta = *tp[p].second;
        for (std::size_t i = 0; i < ema.numel(); ++i) {
            ema[i] = mu * ema[i] + (1.0 - mu) * theta[i];
        }
    }
}

}  // namespace flowlab
