#pragma once

#include <cstdint>

#include "flowlab/net.hpp"

namespace flowlab {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Student parameters, EMA shadow, AdamW moments and counters. The shadow is
// initialized from theta at construction.
struct TrainState {
    VelocityNet theta;
    VelocityNet theta_ema;
    VelocityNet adam_m;
    VelocityNet adam_v;
    std::int64_t adam_step = 0;
    std::int64_t iters = 0;

    static TrainState from_net(const VelocityNet& net) {
        TrainState s;
        s.theta = net;
        s.theta_ema = net;
        s.adam_m = VelocityNet::zeros(net.cfg);
        s.adam_v = VelocityNet::zeros(net.cfg);
        return s;
    }
};

// Decoupled-weight-decay Adam over an arbitrary parameter list. `step` is the
// already-incremented step count used for bias correction. Throws on
// non-finite gradients before touching any state.
void adamw_update(const std::vector<Tensor*>& params, const std::vector<Tensor*>& m,
                  const std::vector<Tensor*>& v, const std::vector<const Tensor*>& grads,
                  std::int64_t step, const AdamWConfig& cfg);

// Adam on theta only (never the EMA shadow).
void adamw_step(TrainState& state, const VelocityNet& grads, const AdamWConfig& cfg);

// theta_ema <- mu*theta_ema + (1-mu)*theta.
void ema_update(TrainState& state, double mu);

}  // namespace flowlab
