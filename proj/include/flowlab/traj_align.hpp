#pragma once

#include <cstdint>
#include <vector>

#include "flowlab/dataset.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/optim.hpp"

namespace flowlab {

// Preferred (high-step) and less-preferred (low-step) samples generated from
// the same conditioning and the same initial noise.
struct PreferencePair {
    Tensor cond;    // [D]
    Tensor x0_w;    // [F, D]
    Tensor x0_l;    // [F, D]
    std::uint64_t noise_seed = 0;
};

struct TaConfig {
    double beta = 2500.0;
    double lambda_rf = 2.0;
    int steps_w = 8;
    int steps_l = 4;
    std::int64_t dataset_size = 5000;
    double lr = 1e-4;
    std::int64_t iters = 2000;
    int batch_size = 32;

    void validate() const;
};

// Runs the generator at steps_w and steps_l from a shared noise draw per cond.
std::vector<PreferencePair> synthesize_preferences(const VelocityNet& model,
                                                   const std::vector<ToySample>& dataset,
                                                   const TaConfig& cfg, std::uint64_t seed);

void save_preferences(const std::string& path, const std::vector<PreferencePair>& prefs);
std::vector<PreferencePair> load_preferences(const std::string& path);

// One evaluation point of the TA losses: shared epsilon and t across the
// w/l sides of a pair.
struct TaItem {
    const PreferencePair* pair = nullptr;
    Tensor epsilon;  // [F*D]
    double t = 0.5;
};

// Flow-DPO loss -log sigmoid(-(beta/2) * [(e_w_theta - e_w_ref) - (e_l_theta -
// e_l_ref)]) with e_* squared velocity-prediction errors at x_t^* and target
// v^* = epsilon - x0^*. Mean over the batch; gradients only into the student.
double dpo_loss(const VelocityNet& student, const VelocityNet& ref, const std::vector<TaItem>& batch,
                double beta, VelocityNet& grads);
double dpo_loss_value(const VelocityNet& student, const VelocityNet& ref,
                      const std::vector<TaItem>& batch, double beta);

// Squared velocity error on the preferred sample only.
double reflow_loss(const VelocityNet& student, const std::vector<TaItem>& batch, VelocityNet& grads);
double reflow_loss_value(const VelocityNet& student, const std::vector<TaItem>& batch);

// dpo + lambda_rf * reflow.
double ta_loss(const VelocityNet& student, const VelocityNet& ref, const std::vector<TaItem>& batch,
               const TaConfig& cfg, VelocityNet& grads);

// ||v^w - v_theta(x_t^w,t)||^2 - ||v^w - v_ref(x_t^w,t)||^2; negative means
// the student beats the reference on preferred data.
double win_diff(const VelocityNet& student, const VelocityNet& ref, const PreferencePair& pair,
                double t, const Tensor& epsilon);

struct TaTraceRow {
    std::int64_t iter = 0;
    double loss = 0.0;
    double dpo = 0.0;
    double reflow = 0.0;
    double win_diff = 0.0;
};

// Full-parameter fine-tune against a frozen reference snapshot; t drawn per
// element from the given sampler, epsilon standard normal.
std::vector<TaTraceRow> ta_train_round(TrainState& state, const VelocityNet& ref,
                                       const std::vector<PreferencePair>& prefs,
                                       const TaConfig& cfg, const TimestepSampler& sampler,
                                       Rng& rng);

}  // namespace flowlab
