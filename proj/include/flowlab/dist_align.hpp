#pragma once

#include <cstdint>
#include <vector>

#include "flowlab/ccd.hpp"
#include "flowlab/net.hpp"

namespace flowlab {

// Frozen random two-layer projection of a frame [D] -> feature [K]; the
// stand-in for a pretrained feature backbone. Parameters never change after
// construction.
struct FeatureNet {
    Affine fc1;  // D -> hidden
    Affine fc2;  // hidden -> K

    static FeatureNet init(int dim, int hidden, int features, std::uint64_t seed);

    int feature_dim() const { return static_cast<int>(fc2.w.shape[0]); }
    Tensor forward(const Tensor& frame) const;
    // dL/dframe given dL/dfeature; the parameters are frozen so no grads.
    Tensor backward_input(const Tensor& frame, const Tensor& upstream) const;
    std::uint64_t param_hash() const;
};

// Two-layer scoring head, in -> hidden -> scalar logit.
struct ScoreHead {
    Affine fc1;
    Affine fc2;  // hidden -> 1

    double forward(const Tensor& in) const;
    // Accumulates dL/dparams, returns dL/din for upstream scalar u.
    Tensor backward(const Tensor& in, double u, ScoreHead& grads) const;
};

// Hinge discriminator over frozen features: one weight-shared spatial head
// applied per frame and one weight-shared temporal head applied per adjacent
// frame pair, both conditioned on a projection of cond.
struct DiscriminatorHeads {
    Affine cond_proj;    // D -> K
    ScoreHead spatial;   // [K + K] -> logit
    ScoreHead temporal;  // [2K + K] -> logit

    static DiscriminatorHeads init(int dim_cond, int features, int hidden, Rng& rng);
    static DiscriminatorHeads zeros_like(const DiscriminatorHeads& h);
};

std::vector<Tensor*> head_params(DiscriminatorHeads& h);

struct DiscState {
    DiscriminatorHeads heads;
    DiscriminatorHeads adam_m;
    DiscriminatorHeads adam_v;
    std::int64_t adam_step = 0;

    static DiscState from_heads(const DiscriminatorHeads& h) {
        return DiscState{h, DiscriminatorHeads::zeros_like(h), DiscriminatorHeads::zeros_like(h), 0};
    }
};

struct DaConfig {
    double lambda_adv = 0.01;
    std::int64_t n_warmup = 1000;
    double disc_lr = 1e-4;

    void validate() const;
};

// x̂0 = x_t - t*F_theta(x_t,t,cond); identical to consistency_fn on the student.
Tensor predict_x0_hat(const VelocityNet& student, const Tensor& x_t, double t, const Tensor& cond);

// Per-head logits for one sample of frames [F, D]: F spatial then F-1 temporal.
// Requires F >= 2 (enforced at head construction against the dataset shape).
std::vector<double> disc_logits(const DiscriminatorHeads& heads, const FeatureNet& features,
                                const Tensor& frames, const Tensor& cond);

struct DaBatchItem {
    Tensor real_frames;  // [F, D]
    Tensor fake_frames;  // [F, D], detached from the student
    Tensor cond;
};

// Hinge discriminator loss sum_k max(0, 1-D_k(real)) + max(0, 1+D_k(fake)),
// summed over heads and averaged over the batch; accumulates head gradients.
double d_loss(const DiscriminatorHeads& heads, const FeatureNet& features,
              const std::vector<DaBatchItem>& batch, DiscriminatorHeads& grads);

struct GAdvItem {
    Tensor x_t;
    Tensor cond;
    double t = 0.5;
};

// Generator hinge loss sum_k max(0, 1 - D_k(x̂0)) with x̂0 = x_t - t*F_theta;
// gradient flows through the feature net and the consistency map into the
// student parameters. Heads and features stay frozen here.
double g_adv_loss(const VelocityNet& student, const DiscriminatorHeads& heads,
                  const FeatureNet& features, const std::vector<GAdvItem>& batch,
                  VelocityNet& grads);

struct DaTrace {
    std::int64_t iter = 0;
    double d_loss = 0.0;
    double g_adv_loss = 0.0;
    double distill_loss = 0.0;
    bool active = false;
};

// Before n_warmup iterations this is exactly ccd_train_step (same RNG
// consumption). Afterwards: one discriminator update on real-vs-x̂0, then one
// generator update on lambda_adv * adv + distill loss.
DaTrace da_train_step(const VelocityNet& teacher, TrainState& state, DiscState& disc,
                      const FeatureNet& features, const CcdConfig& ccd_cfg, const DaConfig& da_cfg,
                      const std::vector<ToySample>& batch, Rng& rng);

}  // namespace flowlab
