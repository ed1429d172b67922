#pragma once

#include <string>
#include <vector>

#include "flowlab/dataset.hpp"
#include "flowlab/net.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

inline constexpr double kTimestepEps = 1e-5;

// x_t = (1-t) x0 + t x1.
Tensor interpolate(const Tensor& x0, const Tensor& x1, double t);

enum class TimestepKind { uniform, logit_normal };

struct TimestepSampler {
    TimestepKind kind = TimestepKind::logit_normal;
    double p_mean = -0.6;
    double p_std = 1.4;

    // Draws lie strictly inside (0, 1): uniform on (eps, 1-eps), logit-normal
    // t = sigmoid(z) clamped to [eps, 1-eps].
    double sample(Rng& rng) const;
};

TimestepKind timestep_kind_from_string(const std::string& s);

struct EulerSchedule {
    std::vector<double> times;  // descending, times.front()==1, times.back()==0

    static EulerSchedule uniform(int steps);
    int steps() const { return static_cast<int>(times.size()) - 1; }
};

// Euler solve of dx/dt = F(x, t, cond) from t=1 down the schedule.
Tensor euler_sample(const VelocityNet& net, const Tensor& x1, const Tensor& cond,
                    const EulerSchedule& schedule);

// f(x_t, t) = x_t - t*F(x_t, t, cond); satisfies f(x, 0) == x bit-exactly.
Tensor consistency_fn(const VelocityNet& net, const Tensor& x_t, double t, const Tensor& cond);

// Exact marginal velocity E[x1 - x0 | x_t] for diagonal-Gaussian data
// N(mean0, var0*I) against standard normal noise, per coordinate.
Tensor gaussian_oracle_velocity(const Tensor& x, double t, const std::vector<double>& mean0,
                                double var0);

struct FmBatchItem {
    Tensor x_t;
    Tensor v_target;  // x1 - x0
    Tensor cond;
    double t = 0.5;
};

// Mean over the batch of ||v_target - F(x_t, t, cond)||^2; accumulates
// parameter gradients into `grads`.
double fm_loss(const VelocityNet& net, const std::vector<FmBatchItem>& batch, VelocityNet& grads);

// Loss only, no gradients.
double fm_loss_value(const VelocityNet& net, const std::vector<FmBatchItem>& batch);

}  // namespace flowlab
