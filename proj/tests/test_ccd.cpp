#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowlab/ccd.hpp"
#include "support/oracles.hpp"

using namespace flowlab;

namespace {

NetConfig small_cfg() {
    NetConfig cfg;
    cfg.dim_in = 6;
    cfg.dim_cond = 2;
    cfg.width = 12;
    cfg.n_blocks = 2;
    return cfg;
}

VelocityNet random_net(std::uint64_t seed, double out_scale = 0.3) {
    Rng rng(seed);
    VelocityNet net = VelocityNet::init(small_cfg(), rng);
    for (double& v : net.output_layer.w.data) v = rng.uniform(-out_scale, out_scale);
    return net;
}

std::vector<ToySample> toy_batch(std::uint64_t seed, int n) {
    DatasetSpec spec;
    spec.kind = DatasetKind::gaussian;
    spec.frames = 3;
    spec.dim = 2;
    spec.means = {{0.4, -0.2}};
    spec.scales = {0.7};
    spec.seed = seed;
    return make_dataset(spec, n);
}

}  // namespace

TEST_CASE("tangent warmup coefficient ramps linearly and saturates") {
    CHECK(warmup_coefficient(0, 1000) == 0.0);
    CHECK(warmup_coefficient(500, 1000) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(warmup_coefficient(1000, 1000) == 1.0);
    CHECK(warmup_coefficient(5000, 1000) == 1.0);
    CHECK_THROWS_AS(warmup_coefficient(1, 0), std::invalid_argument);
}

TEST_CASE("with r=0 the tangent reduces to the teacher/ema velocity gap") {
    VelocityNet teacher = random_net(1);
    VelocityNet ema = random_net(2);
    Rng rng(3);
    Tensor x = rng.normal_tensor({6});
    Tensor cond = rng.normal_tensor({2});
    const double t = 0.7;
    Tensor g = ccd_tangent(teacher, ema, x, t, cond, 0.0);
    Tensor expected = sub(net_forward(teacher, x, t, cond), net_forward(ema, x, t, cond));
    for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("tangent equals the trajectory derivative of the consistency map") {
    // d/dt [x_t - t F_ema(x_t, t)] along dx/dt = F_teacher, checked against a
    // central difference of the consistency map along the teacher flow.
    VelocityNet teacher = random_net(4);
    VelocityNet ema = random_net(5);
    Rng rng(6);
    Tensor x = rng.normal_tensor({6});
    Tensor cond = rng.normal_tensor({2});
    const double t = 0.55, h = 1e-5;

    Tensor g = ccd_tangent(teacher, ema, x, t, cond, 1.0);

    auto consistency_along_flow = [&](double dt) {
        Tensor v = net_forward(teacher, x, t, cond);
        Tensor xs = x;
        for (std::size_t i = 0; i < 6; ++i) xs[i] += dt * v[i];
        return consistency_fn(ema, xs, t + dt, cond);
    };
    Tensor fp = consistency_along_flow(h);
    Tensor fm = consistency_along_flow(-h);
    for (std::size_t i = 0; i < 6; ++i) {
        const double fd = (fp[i] - fm[i]) / (2.0 * h);
        CHECK(std::abs(g[i] - fd) < 1e-3 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("tangent normalization has the advertised closed form") {
    Tensor g({2});
    g.data = {3.0, 4.0};
    Tensor n = tangent_normalize(g, 0.1);
    CHECK(n[0] == doctest::Approx(3.0 / 5.1).epsilon(1e-15));
    CHECK(n[1] == doctest::Approx(4.0 / 5.1).epsilon(1e-15));
    Tensor z({2});
    Tensor nz = tangent_normalize(z, 0.1);
    CHECK(nz.data == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(tangent_normalize(g, 0.0), std::invalid_argument);
}

TEST_CASE("distillation loss gradients match finite differences") {
    VelocityNet student = random_net(7);
    VelocityNet ema = random_net(8);
    Rng rng(9);
    std::vector<CcdSample> batch;
    for (int b = 0; b < 3; ++b) {
        CcdSample s;
        s.x_t = rng.normal_tensor({6});
        s.cond = rng.normal_tensor({2});
        s.g = rng.normal_tensor({6});
        s.t = rng.uniform(0.1, 0.9);
        batch.push_back(std::move(s));
    }
    VelocityNet analytic = VelocityNet::zeros(student.cfg);
    const double loss = ccd_loss(student, ema, batch, analytic);
    CHECK(loss == doctest::Approx(ccd_loss_value(student, ema, batch)).epsilon(1e-13));
    VelocityNet fd = testing::fd_param_grad(
        student, [&](const VelocityNet& net) { return ccd_loss_value(net, ema, batch); });
    CHECK(testing::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("the ema target carries no gradient") {
    // Perturbing the ema net changes the loss but must not change how the
    // student gradient is computed at fixed residual: the analytic gradient
    // against a frozen ema must match finite differences taken over the
    // student alone (the previous test), and the gradient layout must not
    // reference ema parameters at all. Here the contract is exercised by
    // confirming that equal student/ema nets give loss driven purely by g.
    VelocityNet net = random_net(10);
    Rng rng(11);
    std::vector<CcdSample> batch;
    CcdSample s;
    s.x_t = rng.normal_tensor({6});
    s.cond = rng.normal_tensor({2});
    s.g = rng.normal_tensor({6});
    s.t = 0.4;
    batch.push_back(s);
    // F_theta - F_ema cancels exactly when the nets coincide.
    CHECK(ccd_loss_value(net, net, batch) == doctest::Approx(sq_norm(s.g)).epsilon(1e-12));
}

TEST_CASE("a training step changes theta, refreshes the ema, and counts up") {
    VelocityNet teacher = random_net(12);
    TrainState state = TrainState::from_net(random_net(13));
    CcdConfig cfg;
    cfg.total_iters = 10;
    cfg.warmup_h = 5;
    auto batch = toy_batch(21, 4);
    Rng rng(14);
    const double theta_before = state.theta.input_embed.w[0];
    CcdBatchTrace trace = ccd_train_step(teacher, state, cfg, batch, rng);
    CHECK(state.iters == 1);
    CHECK(state.adam_step == 1);
    CHECK(state.theta.input_embed.w[0] != theta_before);
    CHECK(trace.r == 0.0);  // first iteration of the warmup ramp
    CHECK(std::isfinite(trace.loss));
    // Shadow moved toward theta but is not equal to it.
    CHECK(state.theta_ema.input_embed.w[0] != theta_before);
    CHECK(state.theta_ema.input_embed.w[0] != state.theta.input_embed.w[0]);
}

TEST_CASE("discrete two-point target converges first-order to the tangent") {
    // || (f_ema(x_t,t) - f_ema(x_prev,t-dt))/dt - g_ccd || should shrink
    // linearly in dt.
    VelocityNet teacher = random_net(15);
    VelocityNet ema = random_net(16);
    Rng rng(17);
    Tensor x = rng.normal_tensor({6});
    Tensor cond = rng.normal_tensor({2});
    const double t = 0.6;
    Tensor g = ccd_tangent(teacher, ema, x, t, cond, 1.0);

    auto err_at = [&](double dt) {
        Tensor v = net_forward(teacher, x, t, cond);
        Tensor x_prev = x;
        for (std::size_t i = 0; i < 6; ++i) x_prev[i] -= dt * v[i];
        Tensor f_now = consistency_fn(ema, x, t, cond);
        Tensor f_prev = consistency_fn(ema, x_prev, t - dt, cond);
        double e = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double fd = (f_now[i] - f_prev[i]) / dt;
            e += (fd - g[i]) * (fd - g[i]);
        }
        return std::sqrt(e);
    };
    const double e1 = err_at(1e-2), e2 = err_at(5e-3), e3 = err_at(2.5e-3);
    const double order12 = std::log2(e1 / e2);
    const double order23 = std::log2(e2 / e3);
    CHECK(order12 > 0.7);
    CHECK(order12 < 1.3);
    CHECK(order23 > 0.7);
    CHECK(order23 < 1.3);
}

TEST_CASE("discrete baseline step trains and respects the time floor") {
    VelocityNet teacher = random_net(18);
    TrainState state = TrainState::from_net(teacher);
    CcdConfig cfg;
    cfg.total_iters = 10;
    cfg.warmup_h = 5;
    auto batch = toy_batch(22, 4);
    Rng rng(19);
    const double delta_t = 0.05;
    CcdBatchTrace trace = dcd_train_step(teacher, state, cfg, batch, rng, delta_t);
    CHECK(state.iters == 1);
    CHECK(trace.t >= delta_t);
    CHECK(std::isfinite(trace.loss));
    CHECK_THROWS_AS(dcd_train_step(teacher, state, cfg, batch, rng, 0.0), std::invalid_argument);
}

TEST_CASE("average-velocity identity matches the r=1 self-tangent") {
    VelocityNet teacher = random_net(20);
    VelocityNet student = random_net(21);
    Rng rng(22);
    for (int probe = 0; probe < 5; ++probe) {
        Tensor x = rng.normal_tensor({6});
        Tensor cond = rng.normal_tensor({2});
        const double t = rng.uniform(0.05, 0.95);
        Tensor lhs = meanflow_identity_target(teacher, student, x, t, cond);
        Tensor f = net_forward(student, x, t, cond);
        Tensor g = ccd_tangent(teacher, student, x, t, cond, 1.0);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(std::abs(lhs[i] - (f[i] + g[i])) < 1e-10);
        }
    }
}

TEST_CASE("config validation bounds") {
    CcdConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.ema_mu = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.ema_mu = 0.95;
    cfg.warmup_h = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
