#include "flowlab/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowlab/checkpoint.hpp"

namespace fs = std::filesystem;

namespace flowlab {

namespace {

constexpr std::size_t kTrainSamples = 4096;

void require_file(const std::string& path) {
    if (!fs::exists(path)) {
        throw MissingPrerequisiteError("missing prerequisite checkpoint: " + path);
    }
}

void fresh_output(const std::string& path, bool force) {
    if (fs::exists(path) && !force) {
        throw OutputExistsError("output already exists (pass --force to overwrite): " + path);
    }
    fs::create_directories(fs::path(path).parent_path());
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.precision(17);
    return os;
}

std::vector<ToySample> select_batch(const std::vector<ToySample>& data, int batch_size, Rng& rng) {
    std::vector<ToySample> batch;
    batch.reserve(batch_size);
    for (int b = 0; b < batch_size; ++b) batch.push_back(data[rng.index(data.size())]);
    return batch;
}

void write_ccd_csv(const std::string& path, const std::vector<CcdBatchTrace>& trace) {
    auto os = open_csv(path);
    os << "iter,t,r,raw_tangent_norm,loss\n";
    for (const auto& row : trace) {
        os << row.iter << "," << row.t << "," << row.r << "," << row.raw_tangent_norm << ","
           << row.loss << "\n";
    }
}

void write_ta_csv(const std::string& path, const std::vector<TaTraceRow>& trace) {
    auto os = open_csv(path);
    os << "iter,dpo,reflow,loss,win_diff\n";
    for (const auto& row : trace) {
        os << row.iter << "," << row.dpo << "," << row.reflow << "," << row.loss << ","
           << row.win_diff << "\n";
    }
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    auto os = open_csv(path);
    os << "stage,steps,frechet,defect,endpoint_dev\n";
    for (const auto& r : rows) {
        os << r.stage << "," << r.steps << "," << r.frechet << "," << r.defect << ","
           << r.endpoint_dev << "\n";
    }
}

nlohmann::json rows_to_json(const std::vector<EvalRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"stage", r.stage},
                     {"steps", r.steps},
                     {"frechet", r.frechet},
                     {"defect", r.defect},
                     {"endpoint_dev", r.endpoint_dev}});
    }
    return j;
}

// Stage checkpoints present in a run directory, most-aligned last.
std::vector<std::pair<std::string, std::string>> present_checkpoints(const RunPaths& paths) {
    std::vector<std::pair<std::string, std::string>> out;
    const std::pair<std::string, std::string> all[] = {
        {"teacher", paths.teacher()}, {"ccd", paths.ccd()}, {"dcd", paths.dcd()},
        {"da", paths.da()},           {"ta1", paths.ta(1)}, {"ta2", paths.ta(2)},
    };
    for (const auto& [stage, path] : all) {
        if (fs::exists(path)) out.emplace_back(stage, path);
    }
    return out;
}

VelocityNet load_stage_net(const std::string& stage, const std::string& path) {
    if (stage == "teacher") return load_net(path);
    return load_train_state(path).theta;
}

}  // namespace

DirLock::DirLock(const std::string& path) : path_(path) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream probe;
    if (fs::exists(path_)) {
        throw std::runtime_error("run directory is locked by another stage: " + path_);
    }
    probe.open(path_, std::ios::trunc);
    if (!probe) throw std::runtime_error("cannot create lock file: " + path_);
}

DirLock::~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::vector<ToySample> pipeline_dataset(const ExperimentConfig& cfg, std::size_t n) {
    return make_dataset(cfg.dataset, n);
}

VelocityNet train_teacher(const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                          std::vector<TeacherTraceRow>* trace) {
    Rng init_rng = Rng::stream(cfg.seed, "net_init");
    TrainState state = TrainState::from_net(VelocityNet::init(cfg.net_config(), init_rng));
    Rng rng = Rng::stream(cfg.seed, "teacher");
    AdamWConfig opt;
    opt.lr = cfg.teacher.lr;
    for (std::int64_t it = 0; it < cfg.teacher.iters; ++it) {
        std::vector<FmBatchItem> batch;
        batch.reserve(cfg.teacher.batch_size);
        for (int b = 0; b < cfg.teacher.batch_size; ++b) {
            const ToySample& s = data[rng.index(data.size())];
            Tensor x0 = flatten_frames(s);
            Tensor x1 = rng.normal_tensor(x0.shape);
            const double t = cfg.teacher.sampler.sample(rng);
            FmBatchItem item;
            item.x_t = interpolate(x0, x1, t);
            item.v_target = sub(x1, x0);
            item.cond = s.cond;
            item.t = t;
            batch.push_back(std::move(item));
        }
        VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
        const double loss = fm_loss(state.theta, batch, grads);
        adamw_step(state, grads, opt);
        if (trace) trace->push_back({it, loss});
    }
    return state.theta;
}

TrainState init_student(const VelocityNet& teacher) { return TrainState::from_net(teacher); }

std::vector<CcdBatchTrace> run_ccd(const VelocityNet& teacher, TrainState& state,
                                   const ExperimentConfig& cfg,
                                   const std::vector<ToySample>& data) {
    Rng rng = Rng::stream(cfg.seed, "ccd");
    std::vector<CcdBatchTrace> trace;
    trace.reserve(cfg.ccd.total_iters);
    for (std::int64_t it = 0; it < cfg.ccd.total_iters; ++it) {
        auto batch = select_batch(data, cfg.ccd.batch_size, rng);
        trace.push_back(ccd_train_step(teacher, state, cfg.ccd, batch, rng));
    }
    return trace;
}

std::vector<CcdBatchTrace> run_dcd(const VelocityNet& teacher, TrainState& state,
                                   const ExperimentConfig& cfg,
                                   const std::vector<ToySample>& data) {
    Rng rng = Rng::stream(cfg.seed, "dcd");
    std::vector<CcdBatchTrace> trace;
    trace.reserve(cfg.ccd.total_iters);
    for (std::int64_t it = 0; it < cfg.ccd.total_iters; ++it) {
        auto batch = select_batch(data, cfg.ccd.batch_size, rng);
        trace.push_back(dcd_train_step(teacher, state, cfg.ccd, batch, rng, cfg.dcd_delta_t));
    }
    return trace;
}

std::vector<DaTrace> run_da(const VelocityNet& teacher, TrainState& state,
                            const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                            const FeatureNet& features) {
    Rng disc_rng = Rng::stream(cfg.seed, "disc_init");
    DiscState disc = DiscState::from_heads(
        DiscriminatorHeads::init(cfg.dataset.dim, features.feature_dim(), 32, disc_rng));
    Rng rng = Rng::stream(cfg.seed, "da");
    std::vector<DaTrace> trace;
    trace.reserve(cfg.ccd.total_iters);
    for (std::int64_t it = 0; it < cfg.ccd.total_iters; ++it) {
        auto batch = select_batch(data, cfg.ccd.batch_size, rng);
        trace.push_back(da_train_step(teacher, state, disc, features, cfg.ccd, cfg.da, batch, rng));
    }
    return trace;
}

TaRoundResult run_ta_round(const VelocityNet& ref, const TaConfig& ta_cfg,
                           const ExperimentConfig& cfg, const std::vector<ToySample>& data,
                           std::uint64_t round_index) {
    const std::uint64_t pref_seed =
        Rng::mix(cfg.seed ^ Rng::hash_label("preferences") ^ round_index);
    auto prefs = synthesize_preferences(ref, data, ta_cfg, pref_seed);
    TaRoundResult out;
    out.state = init_student(ref);
    Rng rng = Rng::stream(cfg.seed, "ta", round_index);
    out.trace = ta_train_round(out.state, ref, prefs, ta_cfg, cfg.ccd.sampler, rng);
    return out;
}

EvalContext build_eval_context(const ExperimentConfig& cfg) {
    EvalContext ctx;
    ctx.features = FeatureNet::init(cfg.dataset.dim, 32, 32, cfg.dataset.seed);
    ctx.data = make_dataset(cfg.dataset, cfg.eval.n_real);
    ctx.real_stats = fit_dataset_stats(ctx.features, ctx.data);
    return ctx;
}

std::vector<EvalRow> evaluate_model(const std::string& stage, const VelocityNet& model,
                                    const VelocityNet& teacher, const EvalContext& ctx,
                                    const ExperimentConfig& cfg) {
    const double defect =
        consistency_defect(model, teacher, ctx.data, cfg.eval.defect_t1, cfg.eval.defect_t2,
                           cfg.eval.n_trajectories, cfg.seed);
    const double endpoint =
        endpoint_deviation(model, teacher, EulerSchedule::uniform(1), EulerSchedule::uniform(1024),
                           ctx.data, cfg.eval.n_trajectories, cfg.seed);
    std::vector<EvalRow> rows;
    for (int steps : cfg.eval.steps_list) {
        EvalRow r;
        r.stage = stage;
        r.steps = steps;
        r.frechet = generation_frechet(model, ctx.data, steps, ctx.features, ctx.real_stats,
                                       cfg.eval.n_samples, cfg.seed);
        r.defect = defect;
        r.endpoint_dev = endpoint;
        rows.push_back(std::move(r));
    }
    return rows;
}

void stage_train_teacher(const ExperimentConfig& cfg, const RunPaths& paths, bool force) {
    fresh_output(paths.teacher(), force);
    DirLock lock(paths.lock_file());
    auto data = pipeline_dataset(cfg, kTrainSamples);
    std::vector<TeacherTraceRow> trace;
    VelocityNet teacher = train_teacher(cfg, data, &trace);
    save_net(paths.teacher(), teacher);
    auto os = open_csv(paths.metrics_csv("teacher"));
    os << "iter,loss\n";
    for (const auto& row : trace) os << row.iter << "," << row.loss << "\n";
}

void stage_distill_ccd(const ExperimentConfig& cfg, const RunPaths& paths, bool force) {
    require_file(paths.teacher());
    fresh_output(paths.ccd(), force);
    DirLock lock(paths.lock_file());
    VelocityNet teacher = load_net(paths.teacher());
    auto data = pipeline_dataset(cfg, kTrainSamples);
    TrainState state = init_student(teacher);
    auto trace = run_ccd(teacher, state, cfg, data);
    save_train_state(paths.ccd(), state);
    write_ccd_csv(paths.metrics_csv("ccd"), trace);
}

void stage_distill_dcd(const ExperimentConfig& cfg, const RunPaths& paths, bool force) {
    require_file(paths.teacher());
    fresh_output(paths.dcd(), force);
    DirLock lock(paths.lock_file());
    VelocityNet teacher = load_net(paths.teacher());
    auto data = pipeline_dataset(cfg, kTrainSamples);
    TrainState state = init_student(teacher);
    auto trace = run_dcd(teacher, state, cfg, data);
    save_train_state(paths.dcd(), state);
    write_ccd_csv(paths.metrics_csv("dcd"), trace);
}

void stage_align_da(const ExperimentConfig& cfg, const RunPaths& paths, bool force) {
    require_file(paths.teacher());
    fresh_output(paths.da(), force);
    DirLock lock(paths.lock_file());
    VelocityNet teacher = load_net(paths.teacher());
    auto data = pipeline_dataset(cfg, kTrainSamples);
    FeatureNet features = FeatureNet::init(cfg.dataset.dim, 32, 32, cfg.dataset.seed);
    TrainState state = init_student(teacher);
    auto trace = run_da(teacher, state, cfg, data, features);
    save_train_state(paths.da(), state);
    auto os = open_csv(paths.metrics_csv("da"));
    os << "iter,d_loss,g_adv_loss,distill_loss,active\n";
    for (const auto& row : trace) {
        os << row.iter << "," << row.d_loss << "," << row.g_adv_loss << "," << row.distill_loss
           << "," << (row.active ? 1 : 0) << "\n";
    }
}

void stage_align_ta(const ExperimentConfig& cfg, const RunPaths& paths, int round, bool force) {
    if (round != 1 && round != 2) throw ConfigError("align-ta: round must be 1 or 2");
    const std::string ref_path = round == 1 ? paths.da() : paths.ta(1);
    require_file(ref_path);
    fresh_output(paths.ta(round), force);
    DirLock lock(paths.lock_file());
    VelocityNet ref = load_train_state(ref_path).theta;
    auto data = pipeline_dataset(cfg, kTrainSamples);
    const TaConfig& ta_cfg = round == 1 ? cfg.ta : cfg.ta2;
    TaRoundResult res = run_ta_round(ref, ta_cfg, cfg, data, static_cast<std::uint64_t>(round));
    save_train_state(paths.ta(round), res.state);
    write_ta_csv(paths.metrics_csv("ta" + std::to_string(round)), res.trace);
}

void stage_sample(const ExperimentConfig& cfg, const RunPaths& paths, int steps, std::size_t n,
                  const std::string& out_file, bool force) {
    auto present = present_checkpoints(paths);
    if (present.empty()) {
        throw MissingPrerequisiteError("missing prerequisite checkpoint: " + paths.teacher());
    }
    fresh_output(out_file, force);
    const auto& [stage, path] = present.back();  // most-aligned model available
    VelocityNet model = load_stage_net(stage, path);
    const EulerSchedule sched = EulerSchedule::uniform(steps);
    const std::size_t F = cfg.dataset.frames, D = cfg.dataset.dim;
    std::vector<ArrayEntry> arrays;
    for (std::size_t i = 0; i < n; ++i) {
        ToySample s = draw_sample(cfg.dataset, i);
        Rng rng = Rng::stream(cfg.seed, "sample", i);
        Tensor x1 = rng.normal_tensor({F * D});
        Tensor x0 = euler_sample(model, x1, s.cond, sched);
        Tensor frames({F, D});
        frames.data = x0.data;
        arrays.push_back({"sample." + std::to_string(i), std::move(frames)});
        arrays.push_back({"cond." + std::to_string(i), s.cond});
    }
    nlohmann::json meta;
    meta["kind"] = "samples";
    meta["stage"] = stage;
    meta["steps"] = steps;
    meta["count"] = n;
    meta["seed"] = cfg.seed;
    save_container(out_file, arrays, meta);
}

nlohmann::json stage_eval(const ExperimentConfig& cfg, const RunPaths& paths) {
    require_file(paths.teacher());
    VelocityNet teacher = load_net(paths.teacher());
    EvalContext ctx = build_eval_context(cfg);
    std::vector<EvalRow> rows;
    for (const auto& [stage, path] : present_checkpoints(paths)) {
        VelocityNet model = load_stage_net(stage, path);
        auto r = evaluate_model(stage, model, teacher, ctx, cfg);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    write_eval_csv(paths.metrics_csv("eval"), rows);
    nlohmann::json summary;
    summary["seed"] = cfg.seed;
    summary["rows"] = rows_to_json(rows);
    std::ofstream js(paths.summary_json("eval"), std::ios::trunc);
    js << summary.dump(2) << "\n";
    return summary;
}

nlohmann::json stage_sweep(const ExperimentConfig& cfg, const RunPaths& paths) {
    require_file(paths.teacher());
    VelocityNet teacher = load_net(paths.teacher());
    EvalContext ctx = build_eval_context(cfg);
    auto os = open_csv(paths.metrics_csv("sweep"));
    os << "stage,steps,frechet,seed\n";
    nlohmann::json summary;
    summary["seed"] = cfg.seed;
    summary["rows"] = nlohmann::json::array();
    for (const auto& [stage, path] : present_checkpoints(paths)) {
        VelocityNet model = load_stage_net(stage, path);
        auto reports = step_sweep(model, ctx.data, cfg.eval.steps_list, ctx.features,
                                  ctx.real_stats, cfg.eval.n_samples, cfg.seed);
        for (const auto& r : reports) {
            os << stage << "," << r.steps << "," << r.frechet << "," << r.seed << "\n";
            summary["rows"].push_back(
                {{"stage", stage}, {"steps", r.steps}, {"frechet", r.frechet}});
        }
    }
    std::ofstream js(paths.summary_json("sweep"), std::ios::trunc);
    js << summary.dump(2) << "\n";
    return summary;
}

TrainState run_da_variant(const VelocityNet& teacher, const ExperimentConfig& cfg,
                          const std::vector<ToySample>& data, const FeatureNet& features,
                          DistillKind mode, const std::string& rng_label) {
    TrainState state = init_student(teacher);
    Rng disc_rng = Rng::stream(cfg.seed, "disc_init");
    DiscState disc = DiscState::from_heads(
        DiscriminatorHeads::init(cfg.dataset.dim, features.feature_dim(), 32, disc_rng));
    Rng rng = Rng::stream(cfg.seed, rng_label);
    for (std::int64_t it = 0; it < cfg.ccd.total_iters; ++it) {
        auto batch = select_batch(data, cfg.ccd.batch_size, rng);
        if (mode == DistillKind::continuous) {
            da_train_step(teacher, state, disc, features, cfg.ccd, cfg.da, batch, rng);
            continue;
        }

        // Distill gradients for the variant objective.
        VelocityNet grads = VelocityNet::zeros(state.theta.cfg);
        std::vector<GAdvItem> g_batch;
        std::vector<DaBatchItem> d_batch;
        const double inv_b = 1.0 / static_cast<double>(batch.size());
        const std::size_t D = cfg.dataset.dim;
        for (const auto& sample : batch) {
            Tensor x0 = flatten_frames(sample);
            Tensor x1 = rng.normal_tensor(x0.shape);
            double t = cfg.ccd.sampler.sample(rng);
            if (mode == DistillKind::discrete) {
                while (t - cfg.dcd_delta_t < 0.0) t = cfg.ccd.sampler.sample(rng);
            }
            Tensor x_t = interpolate(x0, x1, t);
            ForwardCache cache;
            Tensor pred = net_forward(state.theta, x_t, t, sample.cond, &cache);
            if (mode == DistillKind::none) {
                // ||F_theta - F_teacher||^2: velocity regression, no tangent.
                Tensor resid = sub(pred, net_forward(teacher, x_t, t, sample.cond));
                net_backward(state.theta, cache, x_t, sample.cond, scale(resid, 2.0 * inv_b),
                             grads);
            } else {
                Tensor v_teacher = net_forward(teacher, x_t, t, sample.cond);
                Tensor x_prev = x_t;
                for (std::size_t i = 0; i < x_prev.numel(); ++i) {
                    x_prev[i] -= cfg.dcd_delta_t * v_teacher[i];
                }
                Tensor target =
                    consistency_fn(state.theta_ema, x_prev, t - cfg.dcd_delta_t, sample.cond);
                Tensor resid = x_t;
                for (std::size_t i = 0; i < resid.numel(); ++i) {
                    resid[i] -= t * pred[i] + target[i];
                }
                net_backward(state.theta, cache, x_t, sample.cond,
                             scale(resid, -2.0 * t * inv_b), grads);
            }
            GAdvItem g;
            g.x_t = x_t;
            g.cond = sample.cond;
            g.t = t;
            g_batch.push_back(std::move(g));
        }

        if (state.iters >= cfg.da.n_warmup) {
            for (std::size_t i = 0; i < batch.size(); ++i) {
                Tensor x0_hat = predict_x0_hat(state.theta, g_batch[i].x_t, g_batch[i].t,
                                               g_batch[i].cond);
                Tensor fake({x0_hat.numel() / D, D});
                fake.data = x0_hat.data;
                d_batch.push_back({batch[i].frames, std::move(fake), batch[i].cond});
            }
            DiscriminatorHeads hgrads = DiscriminatorHeads::zeros_like(disc.heads);
            d_loss(disc.heads, features, d_batch, hgrads);
            disc.adam_step += 1;
            AdamWConfig dopt;
            dopt.lr = cfg.da.disc_lr;
            std::vector<const Tensor*> gptr;
            for (Tensor* t : head_params(hgrads)) gptr.push_back(t);
            adamw_update(head_params(disc.heads), head_params(disc.adam_m),
                         head_params(disc.adam_v), gptr, disc.adam_step, dopt);
            VelocityNet adv_grads = VelocityNet::zeros(state.theta.cfg);
            g_adv_loss(state.theta, disc.heads, features, g_batch, adv_grads);
            auto gp = named_params(grads);
            auto ap = named_params(adv_grads);
            for (std::size_t p = 0; p < gp.size(); ++p) {
                axpy(cfg.da.lambda_adv, *ap[p].second, *gp[p].second);
            }
        }
        ccd_apply_update(state, cfg.ccd, grads);
    }
    return state;
}

nlohmann::json stage_ablate(const ExperimentConfig& cfg, const RunPaths& paths,
                            const std::string& axis) {
    require_file(paths.teacher());
    VelocityNet teacher = load_net(paths.teacher());
    auto data = pipeline_dataset(cfg, kTrainSamples);
    EvalContext ctx = build_eval_context(cfg);
    nlohmann::json summary;
    summary["axis"] = axis;
    summary["seed"] = cfg.seed;
    summary["rows"] = nlohmann::json::array();
    auto os = open_csv(paths.metrics_csv("ablate_" + axis));

    auto frechet4 = [&](const VelocityNet& model) {
        return generation_frechet(model, ctx.data, 4, ctx.features, ctx.real_stats,
                                  cfg.eval.n_samples, cfg.seed);
    };

    if (axis == "t_sampler") {
        os << "sampler,frechet\n";
        const std::pair<std::string, TimestepSampler> rows[] = {
            {"uniform", TimestepSampler{TimestepKind::uniform, 0.0, 1.0}},
            {"lognorm(-0.8,1.0)", TimestepSampler{TimestepKind::logit_normal, -0.8, 1.0}},
            {"lognorm(-0.6,1.4)", TimestepSampler{TimestepKind::logit_normal, -0.6, 1.4}},
        };
        for (const auto& [name, sampler] : rows) {
            ExperimentConfig variant = cfg;
            variant.ccd.sampler = sampler;
            TrainState state = init_student(teacher);
            run_ccd(teacher, state, variant, data);
            const double f = frechet4(state.theta);
            os << name << "," << f << "\n";
            summary["rows"].push_back({{"sampler", name}, {"frechet", f}});
        }
    } else if (axis == "distill") {
        os << "variant,frechet\n";
        FeatureNet features = FeatureNet::init(cfg.dataset.dim, 32, 32, cfg.dataset.seed);
        const std::pair<std::string, DistillKind> rows[] = {
            {"da_only", DistillKind::none},
            {"dcd_da", DistillKind::discrete},
            {"ccd_da", DistillKind::continuous},
        };
        for (const auto& [name, mode] : rows) {
            TrainState state = run_da_variant(teacher, cfg, data, features, mode,
                                              "ablate_" + name);
            const double f = frechet4(state.theta);
            os << name << "," << f << "\n";
            summary["rows"].push_back({{"variant", name}, {"frechet", f}});
        }
    } else {
        throw ConfigError("ablate: unknown axis '" + axis + "' (expected t_sampler or distill)");
    }
    std::ofstream js(paths.summary_json("ablate_" + axis), std::ios::trunc);
    js << summary.dump(2) << "\n";
    return summary;
}

void export_plotdata(const RunPaths& paths) {
    bool any = false;

    // Loss curves: long format (stage, iter, metric, value).
    {
        std::ostringstream body;
        const std::pair<std::string, std::string> stages[] = {
            {"teacher", paths.metrics_csv("teacher")}, {"ccd", paths.metrics_csv("ccd")},
            {"dcd", paths.metrics_csv("dcd")},         {"da", paths.metrics_csv("da")},
            {"ta1", paths.metrics_csv("ta1")},         {"ta2", paths.metrics_csv("ta2")},
        };
        for (const auto& [stage, path] : stages) {
            std::ifstream is(path);
            if (!is) continue;
            any = true;
            std::string header;
            std::getline(is, header);
            std::vector<std::string> cols;
            std::stringstream hs(header);
            for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
            std::string line;
            while (std::getline(is, line)) {
                std::stringstream ls(line);
                std::vector<std::string> vals;
                for (std::string v; std::getline(ls, v, ',');) vals.push_back(v);
                if (vals.size() != cols.size()) continue;
                for (std::size_t c = 1; c < cols.size(); ++c) {
                    body << stage << "," << vals[0] << "," << cols[c] << "," << vals[c] << "\n";
                }
            }
        }
        if (body.tellp() > 0) {
            auto os = open_csv(paths.dir + "/plot_loss.csv");
            os << "stage,iter,metric,value\n" << body.str();
        }
    }

    // Win Diff traces: one row per alignment iteration per round.
    {
        std::ostringstream body;
        for (int round : {1, 2}) {
            std::ifstream is(paths.metrics_csv("ta" + std::to_string(round)));
            if (!is) continue;
            any = true;
            std::string line;
            std::getline(is, line);  // header iter,dpo,reflow,loss,win_diff
            while (std::getline(is, line)) {
                std::stringstream ls(line);
                std::vector<std::string> vals;
                for (std::string v; std::getline(ls, v, ',');) vals.push_back(v);
                if (vals.size() != 5) continue;
                body << round << "," << vals[0] << "," << vals[4] << "\n";
            }
        }
        if (body.tellp() > 0) {
            auto os = open_csv(paths.dir + "/plot_win_diff.csv");
            os << "round,iter,win_diff\n" << body.str();
        }
    }

    // Step sweep re-export.
    {
        std::ifstream is(paths.metrics_csv("sweep"));
        if (is) {
            any = true;
            std::stringstream body;
            body << is.rdbuf();
            auto os = open_csv(paths.dir + "/plot_step_sweep.csv");
            os << body.str();
        }
    }

    if (!any) throw std::runtime_error("export-plotdata: no metrics found in " + paths.dir);
}

}  // namespace flowlab
