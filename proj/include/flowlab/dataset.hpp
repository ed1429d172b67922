#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// Conditioned toy "video": cond is the first frame, frames is [F, D].
struct ToySample {
    Tensor cond;    // [D]
    Tensor frames;  // [F, D], frames[0] == cond
};

enum class DatasetKind { gaussian, gaussian_mixture, moving_blob };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind k);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::gaussian;
    int frames = 8;
    int dim = 4;
    std::vector<std::vector<double>> means;  // per mixture component, each [dim]
    std::vector<double> scales;              // per component, > 0
    std::vector<double> weights;             // sum to 1
    std::vector<double> drift;               // [dim] per-frame drift, may be empty
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic under (spec.seed); per-sample RNG streams make generation
// order-independent and parallelizable.
std::vector<ToySample> make_dataset(const DatasetSpec& spec, std::size_t n);
ToySample draw_sample(const DatasetSpec& spec, std::uint64_t sample_index);

Tensor flatten_frames(const ToySample& s);

// Diagonal-Gaussian law of the flattened frames when spec.kind == gaussian and
// drift is zero: every coordinate is independent N(mean[d], scale^2).
struct DiagonalGaussian {
    std::vector<double> mean;  // flattened [F*D]
    double var = 1.0;
};
DiagonalGaussian flattened_gaussian_law(const DatasetSpec& spec);

}  // namespace flowlab
