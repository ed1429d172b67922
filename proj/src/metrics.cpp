#include "flowlab/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace flowlab {

namespace {

constexpr double kEigClamp = 1e-10;

Eigen::MatrixXd to_eigen(const std::vector<double>& cov, std::size_t m) {
    Eigen::MatrixXd s(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) s(i, j) = cov[i * m + j];
    }
    return s;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    Eigen::VectorXd lam = eig.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        lam(i) = lam(i) > kEigClamp ? std::sqrt(lam(i)) : 0.0;
    }
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

FrechetStats fit_stats(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw std::invalid_argument("fit_stats: need at least 2 samples");
    const std::size_t m = features.front().size();
    FrechetStats s;
    s.n = features.size();
    s.mean.assign(m, 0.0);
    for (const auto& f : features) {
        if (f.size() != m) throw std::invalid_argument("fit_stats: inconsistent feature dims");
        for (std::size_t i = 0; i < m; ++i) s.mean[i] += f[i];
    }
    for (double& v : s.mean) v /= static_cast<double>(s.n);
    s.cov.assign(m * m, 0.0);
    for (const auto& f : features) {
        for (std::size_t i = 0; i < m; ++i) {
            const double di = f[i] - s.mean[i];
            for (std::size_t j = i; j < m; ++j) {
                s.cov[i * m + j] += di * (f[j] - s.mean[j]);
            }
        }
    }
    const double denom = static_cast<double>(s.n - 1);  // unbiased
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            s.cov[i * m + j] /= denom;
            s.cov[j * m + i] = s.cov[i * m + j];
        }
    }
    return s;
}

double frechet_distance(const FrechetStats& a, const FrechetStats& b) {
    const std::size_t m = a.dim();
    if (b.dim() != m) throw std::invalid_argument("frechet_distance: dimension mismatch");
    double mean_term = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double d = a.mean[i] - b.mean[i];
        mean_term += d * d;
    }
    Eigen::MatrixXd sa = to_eigen(a.cov, m);
    Eigen::MatrixXd sb = to_eigen(b.cov, m);
    Eigen::MatrixXd sa_half = psd_sqrt(sa);
    Eigen::MatrixXd cross = psd_sqrt(sa_half * sb * sa_half);
    const double trace_term = sa.trace() + sb.trace() - 2.0 * cross.trace();
    const double d = mean_term + trace_term;
    return d > 0.0 ? d : 0.0;
}

std::vector<double> feature_embed(const FeatureNet& features, const Tensor& frames) {
    const std::size_t F = frames.shape[0], D = frames.shape[1];
    const std::size_t K = static_cast<std::size_t>(features.feature_dim());
    std::vector<double> out(F * K);
    Tensor frame({D});
    for (std::size_t f = 0; f < F; ++f) {
        std::copy(frames.data.begin() + f * D, frames.data.begin() + (f + 1) * D,
                  frame.data.begin());
        Tensor phi = features.forward(frame);
        std::copy(phi.data.begin(), phi.data.end(), out.begin() + f * K);
    }
    return out;
}

FrechetStats fit_dataset_stats(const FeatureNet& features, const std::vector<ToySample>& samples) {
    std::vector<std::vector<double>> feats;
    feats.reserve(samples.size());
    for (const auto& s : samples) feats.push_back(feature_embed(features, s.frames));
    return fit_stats(feats);
}

std::vector<Tensor> integrate_to_times(const VelocityNet& net, const Tensor& x1, const Tensor& cond,
                                       const std::vector<double>& times, int substeps_per_unit) {
    std::vector<Tensor> out;
    Tensor x = x1;
    double t = 1.0;
    for (double target : times) {
        if (target > t + 1e-12) throw std::invalid_argument("integrate_to_times: times must descend");
        const double span = t - target;
        if (span > 1e-15) {
            const int steps = std::max(1, static_cast<int>(std::ceil(span * substeps_per_unit)));
            const double dt = span / steps;
            for (int k = 0; k < steps; ++k) {
                Tensor v = net_forward(net, x, t, cond);
                for (std::size_t i = 0; i < x.numel(); ++i) x[i] -= dt * v[i];
                t -= dt;
            }
        }
        t = target;
        out.push_back(x);
    }
    return out;
}

double consistency_defect(const VelocityNet& student, const VelocityNet& teacher,
                          const std::vector<ToySample>& dataset, double t1, double t2,
                          std::size_t n, std::uint64_t seed) {
    if (t2 < t1) throw std::invalid_argument("consistency_defect: require t1 <= t2");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ToySample& s = dataset[i % dataset.size()];
        Rng rng = Rng::stream(seed, "defect", i);
        Tensor x1 = rng.normal_tensor({s.frames.numel()});
        auto states = integrate_to_times(teacher, x1, s.cond, {t2, t1}, 1024);
        Tensor f2 = consistency_fn(student, states[0], t2, s.cond);
        Tensor f1 = consistency_fn(student, states[1], t1, s.cond);
        total += norm(sub(f1, f2));
    }
    return total / static_cast<double>(n);
}

double endpoint_deviation(const VelocityNet& model, const VelocityNet& reference,
                          const EulerSchedule& sched_a, const EulerSchedule& sched_b,
                          const std::vector<ToySample>& dataset, std::size_t n,
                          std::uint64_t seed) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ToySample& s = dataset[i % dataset.size()];
        Rng rng = Rng::stream(seed, "endpoint", i);
        Tensor x1 = rng.normal_tensor({s.frames.numel()});
        Tensor ea = euler_sample(model, x1, s.cond, sched_a);
        Tensor eb = euler_sample(reference, x1, s.cond, sched_b);
        total += norm(sub(ea, eb));
    }
    return total / static_cast<double>(n);
}

double generation_frechet(const VelocityNet& model, const std::vector<ToySample>& dataset,
                          int steps, const FeatureNet& features, const FrechetStats& real_stats,
                          std::size_t n_samples, std::uint64_t seed) {
    const EulerSchedule sched = EulerSchedule::uniform(steps);
    std::vector<std::vector<double>> feats;
    feats.reserve(n_samples);
    const std::size_t F = dataset.front().frames.shape[0];
    const std::size_t D = dataset.front().frames.shape[1];
    for (std::size_t i = 0; i < n_samples; ++i) {
        const ToySample& s = dataset[i % dataset.size()];
        Rng rng = Rng::stream(seed, "gen", i);
        Tensor x1 = rng.normal_tensor({F * D});
        Tensor x0 = euler_sample(model, x1, s.cond, sched);
        Tensor frames({F, D});
        frames.data = x0.data;
        feats.push_back(feature_embed(features, frames));
    }
    return frechet_distance(fit_stats(feats), real_stats);
}

std::vector<MetricReport> step_sweep(const VelocityNet& model, const std::vector<ToySample>& dataset,
                                     const std::vector<int>& steps_list, const FeatureNet& features,
                                     const FrechetStats& real_stats, std::size_t n_samples,
                                     std::uint64_t seed) {
    std::vector<MetricReport> out;
    out.reserve(steps_list.size());
    for (int steps : steps_list) {
        MetricReport r;
        r.steps = steps;
        r.seed = seed;
        // Same seed for every step count: shared noise and conds.
        r.frechet = generation_frechet(model, dataset, steps, features, real_stats, n_samples, seed);
        out.push_back(r);
    }
    return out;
}

}  // namespace flowlab
