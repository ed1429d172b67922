#pragma once

#include <cstdint>
#include <vector>

#include "flowlab/dataset.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/optim.hpp"

namespace flowlab {

struct CcdConfig {
    std::int64_t warmup_h = 1000;   // tangent warmup horizon H
    double ema_mu = 0.95;
    double norm_c = 0.1;            // tangent normalization constant
    double lr = 1e-3;
    double weight_decay = 0.0;
    TimestepSampler sampler;
    std::int64_t total_iters = 3000;
    int batch_size = 32;

    void validate() const;
};

struct CcdBatchTrace {
    std::int64_t iter = 0;
    double t = 0.0;                 // batch mean
    double r = 0.0;
    double raw_tangent_norm = 0.0;  // batch mean of ||g|| before normalization
    double loss = 0.0;
};

// r = min(1, iters/H).
double warmup_coefficient(std::int64_t iters, std::int64_t warmup_h);

// g = dx/dt - F_ema(x_t,t) - r*t*dF, with dx/dt = teacher(x_t,t) and
// (F_ema, dF) from the block-wise JVP of the EMA net along (dx/dt, 1).
// The result is a constant with respect to the student parameters.
Tensor ccd_tangent(const VelocityNet& teacher, const VelocityNet& student_ema, const Tensor& x_t,
                   double t, const Tensor& cond, double r);

// g / (||g|| + c), whole-tensor L2 norm.
Tensor tangent_normalize(const Tensor& g, double c);

struct CcdSample {
    Tensor x_t;
    Tensor cond;
    Tensor g;  // normalized tangent target, detached
    double t = 0.5;
};

// Mean over the batch of ||F_theta(x_t,t) - F_ema(x_t,t) - g||^2; gradient
// flows only through F_theta and is accumulated into `grads`.
double ccd_loss(const VelocityNet& student, const VelocityNet& student_ema,
                const std::vector<CcdSample>& batch, VelocityNet& grads);
double ccd_loss_value(const VelocityNet& student, const VelocityNet& student_ema,
                      const std::vector<CcdSample>& batch);

// One full distillation iteration: draw (x0, x1, t) per element, build the
// normalized tangent target, AdamW update on theta, EMA update on theta_ema.
CcdBatchTrace ccd_train_step(const VelocityNet& teacher, TrainState& state, const CcdConfig& cfg,
                             const std::vector<ToySample>& batch, Rng& rng);

// Pieces of ccd_train_step shared with the distribution-alignment loop: batch
// preparation consumes the RNG in a fixed order; the update applies the
// distill gradients (plus any caller-provided extra gradients) via AdamW and
// refreshes the EMA shadow.
std::vector<CcdSample> ccd_prepare_batch(const VelocityNet& teacher, const TrainState& state,
                                         const CcdConfig& cfg, const std::vector<ToySample>& batch,
                                         Rng& rng, double r, CcdBatchTrace* trace);
void ccd_apply_update(TrainState& state, const CcdConfig& cfg, VelocityNet& grads);

// Discrete-time baseline: one Euler step of the teacher provides x_{t-dt} and
// the loss is ||f_theta(x_t,t) - f_ema(x_{t-dt}, t-dt)||^2 with w(t)=1.
CcdBatchTrace dcd_train_step(const VelocityNet& teacher, TrainState& state, const CcdConfig& cfg,
                             const std::vector<ToySample>& batch, Rng& rng, double delta_t);

// Average-velocity identity target dx/dt - t*dF_theta/dt (no EMA, r=1);
// algebraically equal to F_theta + ccd_tangent(theta_ema=theta, r=1).
Tensor meanflow_identity_target(const VelocityNet& teacher, const VelocityNet& student,
                                const Tensor& x_t, double t, const Tensor& cond);

}  // namespace flowlab
