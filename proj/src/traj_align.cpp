#include "flowlab/traj_align.hpp"

#include <cmath>
#include <stdexcept>

#include "flowlab/checkpoint.hpp"

namespace flowlab {

void TaConfig::validate() const {
    if (beta <= 0.0) throw std::invalid_argument("ta: beta must be positive");
    if (lambda_rf < 0.0) throw std::invalid_argument("ta: lambda_rf must be non-negative");
    if (steps_l < 1 || steps_w <= steps_l) {
        throw std::invalid_argument("ta: require steps_w > steps_l >= 1");
    }
    if (dataset_size <= 0) throw std::invalid_argument("ta: dataset_size must be positive");
    if (lr < 0.0) throw std::invalid_argument("ta: lr must be non-negative");
    if (iters <= 0 || batch_size <= 0) throw std::invalid_argument("ta: iters/batch_size invalid");
}

std::vector<PreferencePair> synthesize_preferences(const VelocityNet& model,
                                                   const std::vector<ToySample>& dataset,
                                                   const TaConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("synthesize_preferences: empty dataset");
    const EulerSchedule sched_w = EulerSchedule::uniform(cfg.steps_w);
    const EulerSchedule sched_l = EulerSchedule::uniform(cfg.steps_l);
    std::vector<PreferencePair> out;
    out.reserve(cfg.dataset_size);
    for (std::int64_t i = 0; i < cfg.dataset_size; ++i) {
        const ToySample& src = dataset[i % dataset.size()];
        PreferencePair p;
        p.cond = src.cond;
        p.noise_seed = Rng::mix(seed ^ static_cast<std::uint64_t>(i));
        Rng noise(p.noise_seed);
        Tensor x1 = noise.normal_tensor({src.frames.numel()});
        Tensor w = euler_sample(model, x1, src.cond, sched_w);
        Tensor l = euler_sample(model, x1, src.cond, sched_l);
        p.x0_w = Tensor(src.frames.shape);
        p.x0_w.data = w.data;
        p.x0_l = Tensor(src.frames.shape);
        p.x0_l.data = l.data;
        out.push_back(std::move(p));
    }
    return out;
}

void save_preferences(const std::string& path, const std::vector<PreferencePair>& prefs) {
    std::vector<ArrayEntry> arrays;
    Tensor seeds({prefs.size()});
    for (std::size_t i = 0; i < prefs.size(); ++i) {
        const std::string p = "pair." + std::to_string(i) + ".";
        arrays.push_back({p + "cond", prefs[i].cond});
        arrays.push_back({p + "x0_w", prefs[i].x0_w});
        arrays.push_back({p + "x0_l", prefs[i].x0_l});
        seeds[i] = static_cast<double>(prefs[i].noise_seed);
    }
    nlohmann::json meta;
    meta["kind"] = "preference_dataset";
    meta["count"] = prefs.size();
    meta["noise_seeds"] = nlohmann::json::array();
    for (const auto& p : prefs) meta["noise_seeds"].push_back(p.noise_seed);
    save_container(path, arrays, meta);
}

std::vector<PreferencePair> load_preferences(const std::string& path) {
    nlohmann::json meta;
    auto arrays = load_container(path, &meta);
    const std::size_t n = meta.at("count").get<std::size_t>();
    std::vector<PreferencePair> prefs(n);
    for (const auto& e : arrays) {
        const auto dot1 = e.name.find('.');
        const auto dot2 = e.name.rfind('.');
        const std::size_t idx = std::stoul(e.name.substr(dot1 + 1, dot2 - dot1 - 1));
        const std::string field = e.name.substr(dot2 + 1);
        if (field == "cond") prefs[idx].cond = e.tensor;
        else if (field == "x0_w") prefs[idx].x0_w = e.tensor;
        else if (field == "x0_l") prefs[idx].x0_l = e.tensor;
    }
    for (std::size_t i = 0; i < n; ++i) {
        prefs[i].noise_seed = meta.at("noise_seeds").at(i).get<std::uint64_t>();
    }
    return prefs;
}

namespace {

Tensor flat(const Tensor& frames) {
    Tensor x({frames.numel()});
    x.data = frames.data;
    return x;
}

struct SideEval {
    Tensor x_t;
    Tensor v_target;
    Tensor resid_student;  // v_theta - v_target
    double err_student = 0.0;
    double err_ref = 0.0;
    ForwardCache cache;
};

SideEval eval_side(const VelocityNet& student, const VelocityNet* ref, const Tensor& x0_frames,
                   const Tensor& cond, double t, const Tensor& epsilon) {
    SideEval s;
    Tensor x0 = flat(x0_frames);
    s.x_t = interpolate(x0, epsilon, t);
    s.v_target = sub(epsilon, x0);
    Tensor pred = net_forward(student, s.x_t, t, cond, &s.cache);
    s.resid_student = sub(pred, s.v_target);
    s.err_student = sq_norm(s.resid_student);
    if (ref) {
        Tensor pred_ref = net_forward(*ref, s.x_t, t, cond);
        s.err_ref = sq_norm(sub(pred_ref, s.v_target));
    }
    return s;
}

}  // namespace

double dpo_loss(const VelocityNet& student, const VelocityNet& ref, const std::vector<TaItem>& batch,
                double beta, VelocityNet& grads) {
    if (batch.empty()) throw std::invalid_argument("dpo_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        SideEval w = eval_side(student, &ref, item.pair->x0_w, item.pair->cond, item.t, item.epsilon);
        SideEval l = eval_side(student, &ref, item.pair->x0_l, item.pair->cond, item.t, item.epsilon);
        const double inner = (w.err_student - w.err_ref) - (l.err_student - l.err_ref);
        const double a = 0.5 * beta * inner;
        // -log sigmoid(-a) = softplus(a), evaluated stably.
        const double softplus = a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
        loss += softplus * inv_b;
        const double dinner = 0.5 * beta * sigmoid(a) * inv_b;  // dL/dinner
        net_backward(student, w.cache, w.x_t, item.pair->cond,
                     scale(w.resid_student, 2.0 * dinner), grads);
        net_backward(student, l.cache, l.x_t, item.pair->cond,
                     scale(l.resid_student, -2.0 * dinner), grads);
    }
    return loss;
}

double dpo_loss_value(const VelocityNet& student, const VelocityNet& ref,
                      const std::vector<TaItem>& batch, double beta) {
    if (batch.empty()) throw std::invalid_argument("dpo_loss: empty batch");
    double loss = 0.0;
    for (const auto& item : batch) {
        SideEval w = eval_side(student, &ref, item.pair->x0_w, item.pair->cond, item.t, item.epsilon);
        SideEval l = eval_side(student, &ref, item.pair->x0_l, item.pair->cond, item.t, item.epsilon);
        const double a = 0.5 * beta * ((w.err_student - w.err_ref) - (l.err_student - l.err_ref));
        loss += a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
    }
    return loss / static_cast<double>(batch.size());
}

double reflow_loss(const VelocityNet& student, const std::vector<TaItem>& batch,
                   VelocityNet& grads) {
    if (batch.empty()) throw std::invalid_argument("reflow_loss: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        SideEval w = eval_side(student, nullptr, item.pair->x0_w, item.pair->cond, item.t,
                               item.epsilon);
        loss += w.err_student * inv_b;
        net_backward(student, w.cache, w.x_t, item.pair->cond,
                     scale(w.resid_student, 2.0 * inv_b), grads);
    }
    return loss;
}

double reflow_loss_value(const VelocityNet& student, const std::vector<TaItem>& batch) {
    if (batch.empty()) throw std::invalid_argument("reflow_loss: empty batch");
    double loss = 0.0;
    for (const auto& item : batch) {
        loss += eval_side(student, nullptr, item.pair->x0_w, item.pair->cond, item.t, item.epsilon)
                    .err_student;
    }
    return loss / static_cast<double>(batch.size());
}

double ta_loss(const VelocityNet& student, const VelocityNet& ref, const std::vector<TaItem>& batch,
               const TaConfig& cfg, VelocityNet& grads) {
    double loss = dpo_loss(student, ref, batch, cfg.beta, grads);
    if (cfg.lambda_rf > 0.0) {
        VelocityNet rf_grads = VelocityNet::zeros(student.cfg);
        loss += cfg.lambda_rf * reflow_loss(student, batch, rf_grads);
        auto gp = named_params(grads);
        auto rp = named_params(rf_grads);
        for (std::size_t p = 0; p < gp.size(); ++p) axpy(cfg.lambda_rf, *rp[p].second, *gp[p].second);
    }
    return loss;
}

double win_diff(const VelocityNet& student, const VelocityNet& ref, const PreferencePair& pair,
                double t, const Tensor& epsilon) {
    SideEval w = eval_side(student, &ref, pair.x0_w, pair.cond, t, epsilon);
    return w.err_student - w.err_ref;
}

std::vector<TaTraceRow> ta_train_round(TrainState& state, const VelocityNet& ref,
                                       const std::vector<PreferencePair>& prefs,
                                       const TaConfig& cfg, const TimestepSampler& sampler,
                                       Rng& rng) {
    cfg.validate();
    if (prefs.empty()) throw std::invalid_argument("ta_train_round: empty preference dataset");
    std::vector<TaTraceRow> trace;
    trace.reserve(cfg.iters);
    AdamWConfig opt;
    opt.lr = cfg.lr;
    const std::size_t dim = prefs.front().x0_w.numel();
    for (std::int64_t it = 0; it < cfg.iters; ++it) {
        std::vector<TaItem> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            TaItem item;
            item.pair = &prefs[rng.index(prefs.size())];
            item.epsilon = rng.normal_tensor({dim});
            item.t = sampler.sample(rng);
            batch.push_back(std::move(item));
        }
        TaTraceRow row;
        row.iter = it;
        VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
        row.dpo = dpo_loss(state.theta, ref, batch, cfg.beta, grads);
        if (cfg.lambda_rf > 0.0) {
            VelocityNet rf_grads = VelocityNet::zeros(state.theta.cfg);
            row.reflow = reflow_loss(state.theta, batch, rf_grads);
            auto gp = named_params(grads);
            auto rp = named_params(rf_grads);
            for (std::size_t p = 0; p < gp.size(); ++p) {
                axpy(cfg.lambda_rf, *rp[p].second, *gp[p].second);
            }
        } else {
            row.reflow = reflow_loss_value(state.theta, batch);
        }
        row.loss = row.dpo + cfg.lambda_rf * row.reflow;
        double wd = 0.0;
        for (const auto& item : batch) {
            wd += win_diff(state.theta, ref, *item.pair, item.t, item.epsilon);
        }
        row.win_diff = wd / static_cast<double>(batch.size());
        if (cfg.lr > 0.0) {
            adamw_step(state, grads, opt);
        }
        state.iters += 1;
        trace.push_back(row);
    }
    return trace;
}

}  // namespace flowlab
