#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "flowlab/checkpoint.hpp"

using namespace flowlab;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("container round-trips awkward doubles bit-exactly") {
    Tensor t({2, 3});
    t.data = {0.0,
              -0.0,
              std::numeric_limits<double>::denorm_min(),
              std::numeric_limits<double>::max(),
              -1.0 / 3.0,
              1e-300};
    nlohmann::json meta;
    meta["label"] = "probe";
    meta["count"] = 6;
    const std::string path = tmp_path("flowlab_container_test.ckpt");
    save_container(path, {{"probe", t}}, meta);

    nlohmann::json meta2;
    auto arrays = load_container(path, &meta2);
    REQUIRE(arrays.size() == 1);
    CHECK(arrays[0].name == "probe");
    CHECK(arrays[0].tensor.shape == t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        // Bit comparison: distinguishes -0.0 from 0.0.
        CHECK(std::memcmp(&arrays[0].tensor.data[i], &t.data[i], 8) == 0);
    }
    CHECK(meta2["label"] == "probe");
    CHECK(meta2["count"] == 6);
    std::remove(path.c_str());
}

TEST_CASE("re-saving identical arrays produces byte-identical files") {
    Rng rng(3);
    Tensor t = rng.normal_tensor({5, 7});
    const std::string p1 = tmp_path("flowlab_bytes_a.ckpt");
    const std::string p2 = tmp_path("flowlab_bytes_b.ckpt");
    save_container(p1, {{"w", t}});
    save_container(p2, {{"w", t}});
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("net save/load preserves config and parameters") {
    NetConfig cfg;
    cfg.dim_in = 8;
    cfg.dim_cond = 2;
    cfg.width = 10;
    cfg.n_blocks = 3;
    Rng rng(5);
    VelocityNet net = VelocityNet::init(cfg, rng);
    const std::string path = tmp_path("flowlab_net_test.ckpt");
    save_net(path, net);
    VelocityNet back = load_net(path);
    CHECK(back.cfg == cfg);
    auto a = named_params(net);
    auto b = named_params(back);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].second->data == b[i].second->data);
    }
    std::remove(path.c_str());
}

TEST_CASE("train state save/load preserves moments and counters") {
    NetConfig cfg;
    cfg.dim_in = 6;
    cfg.dim_cond = 3;
    cfg.width = 8;
    cfg.n_blocks = 2;
    Rng rng(9);
    TrainState state = TrainState::from_net(VelocityNet::init(cfg, rng));
    state.adam_m.output_layer.w[0] = 0.25;
    state.adam_v.output_layer.w[0] = 0.125;
    state.adam_step = 42;
    state.iters = 17;
    const std::string path = tmp_path("flowlab_state_test.ckpt");
    save_train_state(path, state);
    TrainState back = load_train_state(path);
    CHECK(back.adam_step == 42);
    CHECK(back.iters == 17);
    CHECK(back.adam_m.output_layer.w[0] == 0.25);
    CHECK(back.adam_v.output_layer.w[0] == 0.125);
    CHECK(back.theta.input_embed.w.data == state.theta.input_embed.w.data);
    CHECK(back.theta_ema.input_embed.w.data == state.theta_ema.input_embed.w.data);
    std::remove(path.c_str());
}

TEST_CASE("loading a missing or corrupt file fails loudly") {
    CHECK_THROWS_AS(load_container(tmp_path("flowlab_does_not_exist.ckpt")), std::runtime_error);
    const std::string path = tmp_path("flowlab_corrupt.ckpt");
    std::ofstream os(path, std::ios::binary);
    os << "not a container";
    os.close();
    CHECK_THROWS_AS(load_container(path), std::runtime_error);
    std::remove(path.c_str());
}
