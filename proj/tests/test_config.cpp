#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "flowlab/config.hpp"

using namespace flowlab;

TEST_CASE("defaults validate and expose the documented constants") {
    ExperimentConfig cfg = default_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.ccd.warmup_h == 1000);
    CHECK(cfg.ccd.ema_mu == 0.95);
    CHECK(cfg.ccd.norm_c == 0.1);
    CHECK(cfg.da.lambda_adv == 0.01);
    CHECK(cfg.da.n_warmup == 1000);
    CHECK(cfg.ta.beta == 2500.0);
    CHECK(cfg.ta.lambda_rf == 2.0);
    CHECK(cfg.ta.steps_w == 8);
    CHECK(cfg.ta.steps_l == 4);
    CHECK(cfg.ta2.steps_w == 4);
    CHECK(cfg.ta2.steps_l == 2);
    CHECK(cfg.ccd.sampler.kind == TimestepKind::logit_normal);
    CHECK(cfg.ccd.sampler.p_mean == -0.6);
    CHECK(cfg.ccd.sampler.p_std == 1.4);
    CHECK(cfg.eval.steps_list == std::vector<int>{1, 2, 4, 8});
}

TEST_CASE("sectioned key-value text parses into the config") {
    const std::string text = R"(
# comment line
[run]
seed = 9
output_dir = "runs/exp1"

[dataset]
kind = "gaussian_mixture"
frames = 4
dim = 2
means = [[1.0, 0.0], [-1.0, 0.5]]
scales = [0.3, 0.5]
weights = [0.7, 0.3]
drift = [0.1, -0.1]

[ccd]
lr = 0.0005
total_iters = 123
sampler_kind = "uniform"

[ta2]
steps_w = 3
steps_l = 1
)";
    ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.seed == 9);
    CHECK(cfg.output_dir == "runs/exp1");
    CHECK(cfg.dataset.frames == 4);
    CHECK(cfg.dataset.means.size() == 2);
    CHECK(cfg.dataset.means[1] == std::vector<double>{-1.0, 0.5});
    CHECK(cfg.dataset.weights == std::vector<double>{0.7, 0.3});
    CHECK(cfg.ccd.lr == 0.0005);
    CHECK(cfg.ccd.total_iters == 123);
    CHECK(cfg.ccd.sampler.kind == TimestepKind::uniform);
    CHECK(cfg.ta2.steps_w == 3);
    CHECK(cfg.ta2.steps_l == 1);
    // Unset sections keep their defaults.
    CHECK(cfg.ta.beta == 2500.0);
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(parse_config_text("[ccd]\nlearning_rate = 0.1\n"),
                         doctest::Contains("ccd.learning_rate"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[nosuch]\nlr = 0.1\n"),
                         doctest::Contains("nosuch.lr"), ConfigError);
}

TEST_CASE("malformed lines and values fail with line context") {
    CHECK_THROWS_AS(parse_config_text("[ccd]\nlr 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[ccd]\nlr = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[dataset]\nmeans = [[1.0, 2.0]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[run\nseed = 1\n"), ConfigError);
}

TEST_CASE("version mismatches are config errors") {
    CHECK_THROWS_AS(parse_config_text("[run]\nversion = 99\n"), ConfigError);
}

TEST_CASE("semantic validation rejects inconsistent sections") {
    CHECK_THROWS_AS(parse_config_text("[ta]\nsteps_w = 2\nsteps_l = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[dataset]\nweights = [0.9, 0.9]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[eval]\nsteps_list = [4, 2, 1]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[ccd]\ndcd_delta_t = 1.5\n"), ConfigError);
}

TEST_CASE("environment variables override file values") {
    setenv("FLOWLAB_CCD_LR", "0.0625", 1);
    setenv("FLOWLAB_DA_N_WARMUP", "7", 1);
    ExperimentConfig cfg = parse_config_text("[ccd]\nlr = 0.001\n");
    unsetenv("FLOWLAB_CCD_LR");
    unsetenv("FLOWLAB_DA_N_WARMUP");
    CHECK(cfg.ccd.lr == 0.0625);
    CHECK(cfg.da.n_warmup == 7);
}

TEST_CASE("the printed schema round-trips to the defaults") {
    ExperimentConfig cfg = parse_config_text(config_schema_text());
    ExperimentConfig def = default_config();
    CHECK(cfg.seed == def.seed);
    CHECK(cfg.dataset.means == def.dataset.means);
    CHECK(cfg.dataset.weights == def.dataset.weights);
    CHECK(cfg.ccd.lr == def.ccd.lr);
    CHECK(cfg.ccd.sampler.p_mean == def.ccd.sampler.p_mean);
    CHECK(cfg.ta.beta == def.ta.beta);
    CHECK(cfg.ta2.steps_w == def.ta2.steps_w);
    CHECK(cfg.eval.steps_list == def.eval.steps_list);
    CHECK(cfg.teacher.iters == def.teacher.iters);
}

TEST_CASE("the derived network shape follows the dataset") {
    ExperimentConfig cfg = default_config();
    NetConfig net = cfg.net_config();
    CHECK(net.dim_in == cfg.dataset.frames * cfg.dataset.dim);
    CHECK(net.dim_cond == cfg.dataset.dim);
    CHECK(net.width == cfg.net.width);
    CHECK(net.n_blocks == cfg.net.n_blocks);
}

TEST_CASE("loading a missing config file is a config error") {
    CHECK_THROWS_AS(load_config("/nonexistent/flowlab.cfg"), ConfigError);
}
