#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowlab/dist_align.hpp"
#include "support/oracles.hpp"

using namespace flowlab;

namespace {

constexpr int kDim = 2;
constexpr int kFrames = 3;
constexpr int kFeat = 4;

NetConfig net_cfg() {
    NetConfig cfg;
    cfg.dim_in = kFrames * kDim;
    cfg.dim_cond = kDim;
    cfg.width = 12;
    cfg.n_blocks = 2;
    return cfg;
}

VelocityNet random_net(std::uint64_t seed) {
    Rng rng(seed);
    VelocityNet net = VelocityNet::init(net_cfg(), rng);
    for (double& v : net.output_layer.w.data) v = rng.uniform(-0.3, 0.3);
    return net;
}

DiscriminatorHeads random_heads(std::uint64_t seed) {
    Rng rng(seed);
    return DiscriminatorHeads::init(kDim, kFeat, 8, rng);
}

std::vector<ToySample> toy_batch(std::uint64_t seed, int n) {
    DatasetSpec spec;
    spec.kind = DatasetKind::gaussian;
    spec.frames = kFrames;
    spec.dim = kDim;
    spec.means = {{0.4, -0.2}};
    spec.scales = {0.7};
    spec.seed = seed;
    return make_dataset(spec, n);
}

// All-zero heads emit logit 0 from every head; a bias on the final layer
// shifts every logit to exactly that constant.
DiscriminatorHeads constant_heads(double spatial_logit, double temporal_logit) {
    DiscriminatorHeads h = DiscriminatorHeads::zeros_like(random_heads(1));
    h.spatial.fc2.b[0] = spatial_logit;
    h.temporal.fc2.b[0] = temporal_logit;
    return h;
}

}  // namespace

TEST_CASE("frozen features are deterministic per seed") {
    FeatureNet a = FeatureNet::init(kDim, 8, kFeat, 42);
    FeatureNet b = FeatureNet::init(kDim, 8, kFeat, 42);
    FeatureNet c = FeatureNet::init(kDim, 8, kFeat, 43);
    CHECK(a.param_hash() == b.param_hash());
    CHECK(a.param_hash() != c.param_hash());
    CHECK(a.feature_dim() == kFeat);
}

TEST_CASE("feature backprop to the input matches finite differences") {
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 7);
    Rng rng(3);
    Tensor frame = rng.normal_tensor({kDim});
    Tensor upstream = rng.normal_tensor({kFeat});
    Tensor g = f.backward_input(frame, upstream);
    const double h = 1e-6;
    for (int d = 0; d < kDim; ++d) {
        Tensor fp = frame, fm = frame;
        fp[d] += h;
        fm[d] -= h;
        const double lp = dot(f.forward(fp), upstream);
        const double lm = dot(f.forward(fm), upstream);
        CHECK(g[d] == doctest::Approx((lp - lm) / (2.0 * h)).epsilon(1e-5));
    }
}

TEST_CASE("logit layout: one spatial per frame, one temporal per adjacent pair") {
    DiscriminatorHeads heads = random_heads(5);
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 9);
    Rng rng(6);
    Tensor frames = rng.normal_tensor({kFrames, kDim});
    Tensor cond = rng.normal_tensor({kDim});
    auto logits = disc_logits(heads, f, frames, cond);
    CHECK(logits.size() == 2 * kFrames - 1);

    Tensor one_frame = rng.normal_tensor({1, kDim});
    CHECK_THROWS_AS(disc_logits(heads, f, one_frame, cond), std::invalid_argument);
}

TEST_CASE("hinge values hit the exact table entries") {
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 11);
    auto batch = toy_batch(31, 1);
    std::vector<DaBatchItem> d_batch{{batch[0].frames, batch[0].frames, batch[0].cond}};
    const double n_heads = 2.0 * kFrames - 1.0;

    // Logit 0 on both arms: max(0,1-0) + max(0,1+0) = 2 per head, exactly.
    DiscriminatorHeads zero = constant_heads(0.0, 0.0);
    DiscriminatorHeads grads = DiscriminatorHeads::zeros_like(zero);
    CHECK(d_loss(zero, f, d_batch, grads) == 2.0 * n_heads);

    // Logit 3 on both arms: 0 + 4 = 4 per head, exactly.
    DiscriminatorHeads three = constant_heads(3.0, 3.0);
    grads = DiscriminatorHeads::zeros_like(three);
    CHECK(d_loss(three, f, d_batch, grads) == 4.0 * n_heads);

    // Generator hinge at logit 3: max(0, 1-3) = 0 per head, exactly.
    VelocityNet student = random_net(13);
    Rng rng(14);
    GAdvItem item;
    item.x_t = rng.normal_tensor({kFrames * kDim});
    item.cond = rng.normal_tensor({kDim});
    item.t = 0.5;
    VelocityNet vgrads = VelocityNet::zeros(student.cfg);
    CHECK(g_adv_loss(student, three, f, {item}, vgrads) == 0.0);
    for (auto& [n, t] : named_params(vgrads)) {
        for (double v : t->data) CHECK(v == 0.0);
    }
    // And at logit -1: max(0, 1+1) = 2 per head, exactly.
    DiscriminatorHeads neg = constant_heads(-1.0, -1.0);
    CHECK(g_adv_loss(student, neg, f, {item}, vgrads) == 2.0 * n_heads);
}

TEST_CASE("generator adversarial gradients match finite differences") {
    VelocityNet student = random_net(17);
    DiscriminatorHeads heads = random_heads(18);
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 19);
    Rng rng(20);
    std::vector<GAdvItem> batch;
    for (int b = 0; b < 3; ++b) {
        GAdvItem item;
        item.x_t = rng.normal_tensor({kFrames * kDim});
        item.cond = rng.normal_tensor({kDim});
        item.t = rng.uniform(0.2, 0.9);
        batch.push_back(std::move(item));
    }
    VelocityNet analytic = VelocityNet::zeros(student.cfg);
    const double loss = g_adv_loss(student, heads, f, batch, analytic);
    CHECK(std::isfinite(loss));
    VelocityNet fd = testing::fd_param_grad(student, [&](const VelocityNet& net) {
        VelocityNet scratch = VelocityNet::zeros(net.cfg);
        return g_adv_loss(net, heads, f, batch, scratch);
    });
    CHECK(testing::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("discriminator gradients match finite differences") {
    DiscriminatorHeads heads = random_heads(21);
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 22);
    auto data = toy_batch(23, 2);
    Rng rng(24);
    std::vector<DaBatchItem> batch;
    for (const auto& s : data) {
        batch.push_back({s.frames, rng.normal_tensor({kFrames, kDim}), s.cond});
    }
    DiscriminatorHeads analytic = DiscriminatorHeads::zeros_like(heads);
    d_loss(heads, f, batch, analytic);

    const double h = 1e-6;
    auto fd_check = [&](Tensor& param, const Tensor& grad) {
        for (std::size_t i = 0; i < std::min<std::size_t>(param.numel(), 6); ++i) {
            const double orig = param[i];
            DiscriminatorHeads scratch = DiscriminatorHeads::zeros_like(heads);
            param[i] = orig + h;
            const double lp = d_loss(heads, f, batch, scratch);
            param[i] = orig - h;
            scratch = DiscriminatorHeads::zeros_like(heads);
            const double lm = d_loss(heads, f, batch, scratch);
            param[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            CHECK(std::abs(grad[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
        }
    };
    fd_check(heads.spatial.fc1.w, analytic.spatial.fc1.w);
    fd_check(heads.temporal.fc1.w, analytic.temporal.fc1.w);
    fd_check(heads.cond_proj.w, analytic.cond_proj.w);
}

TEST_CASE("below the warmup horizon the da step is bitwise the distillation step") {
    VelocityNet teacher = random_net(25);
    TrainState a = TrainState::from_net(teacher);
    TrainState b = a;
    CcdConfig ccd_cfg;
    ccd_cfg.total_iters = 10;
    ccd_cfg.warmup_h = 5;
    DaConfig da_cfg;
    da_cfg.n_warmup = 100;  // gate stays closed for this test
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 26);
    Rng hr(27);
    DiscState disc = DiscState::from_heads(DiscriminatorHeads::init(kDim, kFeat, 8, hr));
    auto batch = toy_batch(28, 4);

    Rng rng_a(29), rng_b(29);
    ccd_train_step(teacher, a, ccd_cfg, batch, rng_a);
    da_train_step(teacher, b, disc, f, ccd_cfg, da_cfg, batch, rng_b);

    auto pa = named_params(a.theta);
    auto pb = named_params(b.theta);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].second->data == pb[i].second->data);
    }
    // RNG streams consumed identically.
    CHECK(rng_a.next_u64() == rng_b.next_u64());
}

TEST_CASE("past the warmup horizon both players actually update") {
    VelocityNet teacher = random_net(30);
    TrainState state = TrainState::from_net(teacher);
    CcdConfig ccd_cfg;
    ccd_cfg.total_iters = 10;
    ccd_cfg.warmup_h = 5;
    DaConfig da_cfg;
    da_cfg.n_warmup = 0;
    FeatureNet f = FeatureNet::init(kDim, 8, kFeat, 31);
    Rng hr(32);
    DiscState disc = DiscState::from_heads(DiscriminatorHeads::init(kDim, kFeat, 8, hr));
    const double head_before = disc.heads.spatial.fc1.w[0];
    const double theta_before = state.theta.input_embed.w[0];
    auto batch = toy_batch(33, 4);
    Rng rng(34);
    DaTrace trace = da_train_step(teacher, state, disc, f, ccd_cfg, da_cfg, batch, rng);
    CHECK(trace.active);
    CHECK(disc.adam_step == 1);
    CHECK(disc.heads.spatial.fc1.w[0] != head_before);
    CHECK(state.theta.input_embed.w[0] != theta_before);
    CHECK(std::isfinite(trace.d_loss));
    CHECK(std::isfinite(trace.g_adv_loss));
    CHECK(std::isfinite(trace.distill_loss));
}

TEST_CASE("config validation") {
    DaConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lambda_adv = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
