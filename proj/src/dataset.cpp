#include "flowlab/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace flowlab {

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "gaussian") return DatasetKind::gaussian;
    if (s == "gaussian_mixture") return DatasetKind::gaussian_mixture;
    if (s == "moving_blob") return DatasetKind::moving_blob;
    throw std::invalid_argument("unknown dataset kind: " + s);
}

std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::gaussian: return "gaussian";
        case DatasetKind::gaussian_mixture: return "gaussian_mixture";
        case DatasetKind::moving_blob: return "moving_blob";
    }
    return "?";
}

void DatasetSpec::validate() const {
    if (frames < 1 || dim < 1) throw std::invalid_argument("dataset: frames and dim must be positive");
    if (means.empty()) throw std::invalid_argument("dataset: at least one component mean required");
    if (means.size() != scales.size()) {
        throw std::invalid_argument("dataset: means/scales component count mismatch");
    }
    for (const auto& m : means) {
        if (m.size() != static_cast<std::size_t>(dim)) {
            throw std::invalid_argument("dataset: mean dimension != dim");
        }
    }
    for (double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("dataset: scales must be > 0");
    }
    if (kind == DatasetKind::gaussian_mixture) {
        if (weights.size() != means.size()) {
            throw std::invalid_argument("dataset: weights/means component count mismatch");
        }
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("dataset: negative mixture weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("dataset: mixture weights must sum to 1");
        }
    }
    if (!drift.empty() && drift.size() != static_cast<std::size_t>(dim)) {
        throw std::invalid_argument("dataset: drift dimension != dim");
    }
}

ToySample draw_sample(const DatasetSpec& spec, std::uint64_t sample_index) {
    Rng rng = Rng::stream(spec.seed, "dataset", sample_index);
    const std::size_t F = spec.frames, D = spec.dim;
    ToySample s;
    s.frames = Tensor({F, D});

    if (spec.kind == DatasetKind::gaussian) {
        // Every frame coordinate independent: the flattened sample is a
        // diagonal Gaussian, which the velocity oracle can condition on.
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t d = 0; d < D; ++d) {
                s.frames.at(f, d) = spec.means[0][d] + spec.scales[0] * rng.normal();
            }
        }
    } else {
        std::size_t comp = 0;
        if (spec.kind == DatasetKind::gaussian_mixture) {
            double u = rng.uniform();
            double acc = 0.0;
            for (std::size_t c = 0; c < spec.weights.size(); ++c) {
                acc += spec.weights[c];
                if (u < acc) {
                    comp = c;
                    break;
                }
                comp = c;
            }
        }
        std::vector<double> z(D);
        for (std::size_t d = 0; d < D; ++d) {
            z[d] = spec.means[comp][d] + spec.scales[comp] * rng.normal();
        }
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t d = 0; d < D; ++d) {
                const double drift = spec.drift.empty() ? 0.0 : spec.drift[d];
                s.frames.at(f, d) = z[d] + static_cast<double>(f) * drift;
            }
        }
    }

    s.cond = Tensor({D});
    for (std::size_t d = 0; d < D; ++d) s.cond[d] = s.frames.at(0, d);
    return s;
}

std::vector<ToySample> make_dataset(const DatasetSpec& spec, std::size_t n) {
    if (n == 0) throw std::invalid_argument("make_dataset: n must be positive");
    spec.validate();
    std::vector<ToySample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw_sample(spec, i));
    return out;
}

Tensor flatten_frames(const ToySample& s) {
    Tensor x({s.frames.numel()});
    x.data = s.frames.data;
    return x;
}

DiagonalGaussian flattened_gaussian_law(const DatasetSpec& spec) {
    if (spec.kind != DatasetKind::gaussian) {
        throw std::invalid_argument("flattened_gaussian_law: requires gaussian dataset kind");
    }
    DiagonalGaussian law;
    law.var = spec.scales[0] * spec.scales[0];
    law.mean.resize(static_cast<std::size_t>(spec.frames) * spec.dim);
    for (int f = 0; f < spec.frames; ++f) {
        for (int d = 0; d < spec.dim; ++d) {
            law.mean[static_cast<std::size_t>(f) * spec.dim + d] = spec.means[0][d];
        }
    }
    return law;
}

}  // namespace flowlab
