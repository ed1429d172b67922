#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowlab/config.hpp"
#include "flowlab/metrics.hpp"
#include "flowlab/traj_align.hpp"

namespace flowlab {

// A required checkpoint is absent at stage start. The message names the path.
struct MissingPrerequisiteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A stage output already exists and --force was not given.
struct OutputExistsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fixed artifact layout under one output directory.
struct RunPaths {
    std::string dir;

    std::string lock_file() const { return dir + "/.lock"; }
    std::string teacher() const { return dir + "/teacher.ckpt"; }
    std::string ccd() const { return dir + "/ccd.ckpt"; }
    std::string dcd() const { return dir + "/dcd.ckpt"; }
    std::string da() const { return dir + "/da.ckpt"; }
    std::string ta(int round) const { return dir + "/ta" + std::to_string(round) + ".ckpt"; }
    std::string prefs(int round) const {
        return dir + "/prefs" + std::to_string(round) + ".ckpt";
    }
    std::string metrics_csv(const std::string& stage) const {
        return dir + "/" + stage + "_metrics.csv";
    }
    std::string summary_json(const std::string& stage) const {
        return dir + "/" + stage + "_summary.json";
    }
};

// Exclusive lock on an output directory; the file is created at construction
// (error if present) and removed at destruction.
class DirLock {
public:
    explicit DirLock(const std::string& path);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

struct TeacherTraceRow {
    std::int64_t iter = 0;
    double loss = 0.0;
};

// ---- In-process stage primitives (no filesystem) ----

std::vector<ToySample> pipeline_dataset(const ExperimentConfig& cfg, std::size_t n);

// Flow-matching regression against x1 - x0 on the synthetic dataset.
VelocityNet train_teacher(const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                          std::vector<TeacherTraceRow>* trace = nullptr);

// Student state initialized from the teacher weights.
TrainState init_student(const VelocityNet& teacher);

std::vector<CcdBatchTrace> run_ccd(const VelocityNet& teacher, TrainState& state,
                                   const ExperimentConfig& cfg,
                                   const std::vector<ToySample>& data);
std::vector<CcdBatchTrace> run_dcd(const VelocityNet& teacher, TrainState& state,
                                   const ExperimentConfig& cfg,
                                   const std::vector<ToySample>& data);
std::vector<DaTrace> run_da(const VelocityNet& teacher, TrainState& state,
                            const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                            const FeatureNet& features);

// Distribution alignment with a selectable distillation term: plain velocity
// regression onto the teacher (none), the discrete two-point baseline
// (discrete), or the continuous-time tangent objective (continuous).
enum class DistillKind { none, discrete, continuous };
TrainState run_da_variant(const VelocityNet& teacher, const ExperimentConfig& cfg,
                          const std::vector<ToySample>& data, const FeatureNet& features,
                          DistillKind kind, const std::string& rng_label);

struct TaRoundResult {
    TrainState state;
    std::vector<TaTraceRow> trace;
};
// One preference round: synthesize pairs from `ref`, then optimize against it.
TaRoundResult run_ta_round(const VelocityNet& ref, const TaConfig& ta_cfg,
                           const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                           std::uint64_t round_index);

// Frozen features plus reference statistics shared across evaluations.
struct EvalContext {
    FeatureNet features;
    FrechetStats real_stats;
    std::vector<ToySample> data;
};
EvalContext build_eval_context(const ExperimentConfig& cfg);

struct EvalRow {
    std::string stage;
    int steps = 0;
    double frechet = 0.0;
    double defect = 0.0;
    double endpoint_dev = 0.0;
};
// Fréchet at every configured step count plus consistency defect and 1-step
// endpoint deviation against the high-resolution teacher reference.
std::vector<EvalRow> evaluate_model(const std::string& stage, const VelocityNet& model,
                                    const VelocityNet& teacher, const EvalContext& ctx,
                                    const ExperimentConfig& cfg);

// ---- File-backed stages used by the command-line tool ----

void stage_train_teacher(const ExperimentConfig& cfg, const RunPaths& paths, bool force);
void stage_distill_ccd(const ExperimentConfig& cfg, const RunPaths& paths, bool force);
void stage_distill_dcd(const ExperimentConfig& cfg, const RunPaths& paths, bool force);
void stage_align_da(const ExperimentConfig& cfg, const RunPaths& paths, bool force);
void stage_align_ta(const ExperimentConfig& cfg, const RunPaths& paths, int round, bool force);

// Deterministic few-step sampling into a container file.
void stage_sample(const ExperimentConfig& cfg, const RunPaths& paths, int steps, std::size_t n,
                  const std::string& out_file, bool force);

// Evaluates every stage checkpoint present in the run directory.
nlohmann::json stage_eval(const ExperimentConfig& cfg, const RunPaths& paths);

// Step sweep for every stage checkpoint present.
nlohmann::json stage_sweep(const ExperimentConfig& cfg, const RunPaths& paths);

// axis "t_sampler": uniform vs two logit-normal schedules, CCD + Fréchet each.
// axis "distill": DA-only vs DCD+DA vs CCD+DA at matched iterations.
nlohmann::json stage_ablate(const ExperimentConfig& cfg, const RunPaths& paths,
                            const std::string& axis);

// Tidy long-format CSVs (plot_*.csv) from the metrics already in the run dir.
void export_plotdata(const RunPaths& paths);

}  // namespace flowlab
