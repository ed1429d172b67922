#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/ccd.hpp"
#include "flowlab/dataset.hpp"
#include "flowlab/dist_align.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/traj_align.hpp"

namespace flowlab {

inline constexpr int kConfigVersion = 1;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TeacherConfig {
    std::int64_t iters = 20000;
    double lr = 1e-3;
    int batch_size = 32;
    TimestepSampler sampler{TimestepKind::uniform, 0.0, 1.0};
};

struct EvalConfig {
    std::vector<int> steps_list = {1, 2, 4, 8};
    std::size_t n_samples = 2000;  // generated samples per Fréchet fit
    std::size_t n_real = 2000;     // real samples behind the reference stats
    std::size_t n_trajectories = 64;
    double defect_t1 = 0.3;
    double defect_t2 = 0.9;
};

struct NetSection {
    int width = 32;
    int n_blocks = 2;
};

struct ExperimentConfig {
    int version = kConfigVersion;
    std::uint64_t seed = 1;
    std::string output_dir = "runs/default";

    DatasetSpec dataset;
    NetSection net;
    TeacherConfig teacher;
    CcdConfig ccd;
    DaConfig da;
    double dcd_delta_t = 0.05;
    TaConfig ta;      // round 1 (8 vs 4 by default)
    TaConfig ta2;     // round 2 (4 vs 2 by default)
    EvalConfig eval;

    NetConfig net_config() const;
    void validate() const;
};

ExperimentConfig default_config();

// Sectioned key = value text ([section] headers; numbers, quoted strings,
// bools, [lists] and [[nested lists]]). Unknown sections or keys are errors
// naming the offending key. Environment variables FLOWLAB_<SECTION>_<KEY>
// override any value.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// The printed schema: a default config file with every recognized key.
std::string config_schema_text();

}  // namespace flowlab
