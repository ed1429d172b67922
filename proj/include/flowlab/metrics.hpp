#pragma once

#include <cstdint>
#include <vector>

#include "flowlab/dataset.hpp"
#include "flowlab/dist_align.hpp"
#include "flowlab/flow.hpp"

namespace flowlab {

// Gaussian fit of a feature cloud: mean, unbiased covariance, sample count.
struct FrechetStats {
    std::vector<double> mean;             // [M]
    std::vector<double> cov;              // [M*M] row-major, symmetric
    std::size_t n = 0;

    std::size_t dim() const { return mean.size(); }
};

FrechetStats fit_stats(const std::vector<std::vector<double>>& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), matrix square root via
// symmetric eigendecomposition of Sa^{1/2} Sb Sa^{1/2}; small negative
// eigenvalues clamped to zero.
double frechet_distance(const FrechetStats& a, const FrechetStats& b);

// Per-frame frozen features concatenated over frames.
std::vector<double> feature_embed(const FeatureNet& features, const Tensor& frames);

FrechetStats fit_dataset_stats(const FeatureNet& features, const std::vector<ToySample>& samples);

// High-resolution Euler states of the teacher trajectory at the requested
// descending times (starting from x at t=1).
std::vector<Tensor> integrate_to_times(const VelocityNet& net, const Tensor& x1, const Tensor& cond,
                                       const std::vector<double>& times, int substeps_per_unit);

// Mean over n teacher trajectories of ||f(x_t1,t1) - f(x_t2,t2)|| with both
// points taken from a shared high-resolution teacher solve, t1 < t2.
double consistency_defect(const VelocityNet& student, const VelocityNet& teacher,
                          const std::vector<ToySample>& dataset, double t1, double t2,
                          std::size_t n, std::uint64_t seed);

// Mean over n conds of ||euler(model, sched_a) - euler(reference, sched_b)||
// with shared noise draws.
double endpoint_deviation(const VelocityNet& model, const VelocityNet& reference,
                          const EulerSchedule& sched_a, const EulerSchedule& sched_b,
                          const std::vector<ToySample>& dataset, std::size_t n,
                          std::uint64_t seed);

struct MetricReport {
    double frechet = 0.0;
    double consistency_defect = 0.0;
    double endpoint_deviation = 0.0;
    int steps = 0;
    std::uint64_t seed = 0;
};

// Fréchet per step count with noise and conds fixed across step counts.
std::vector<MetricReport> step_sweep(const VelocityNet& model, const std::vector<ToySample>& dataset,
                                     const std::vector<int>& steps_list, const FeatureNet& features,
                                     const FrechetStats& real_stats, std::size_t n_samples,
                                     std::uint64_t seed);

// Fréchet of n generated samples against real_stats at a fixed step count.
double generation_frechet(const VelocityNet& model, const std::vector<ToySample>& dataset,
                          int steps, const FeatureNet& features, const FrechetStats& real_stats,
                          std::size_t n_samples, std::uint64_t seed);

}  // namespace flowlab
