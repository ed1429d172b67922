#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = FLOWLAB_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

struct TestRun {
    fs::path dir;
    std::string cfg_path;

    TestRun() {
        dir = fs::temp_directory_path() / ("flowlab_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        cfg_path = (dir / "exp.cfg").string();
        std::ofstream os(cfg_path);
        os << "[run]\n"
           << "seed = 5\n"
           << "output_dir = \"" << (dir / "out").string() << "\"\n"
           << "[dataset]\n"
           << "kind = \"gaussian_mixture\"\n"
           << "frames = 3\n"
           << "dim = 2\n"
           << "means = [[0.8, 0.0], [-0.8, 0.3]]\n"
           << "scales = [0.4, 0.4]\n"
           << "weights = [0.6, 0.4]\n"
           << "drift = [0.05, 0.0]\n"
           << "[net]\n"
           << "width = 12\n"
           << "[teacher]\n"
           << "iters = 60\n"
           << "[ccd]\n"
           << "total_iters = 30\n"
           << "warmup_h = 10\n"
           << "[da]\n"
           << "n_warmup = 10\n"
           << "[ta]\n"
           << "dataset_size = 16\n"
           << "iters = 5\n"
           << "batch_size = 4\n"
           << "steps_w = 4\n"
           << "steps_l = 2\n"
           << "[ta2]\n"
           << "dataset_size = 16\n"
           << "iters = 5\n"
           << "batch_size = 4\n"
           << "steps_w = 2\n"
           << "steps_l = 1\n"
           << "[eval]\n"
           << "steps_list = [1, 2]\n"
           << "n_samples = 32\n"
           << "n_real = 32\n"
           << "n_trajectories = 4\n";
    }
    ~TestRun() { fs::remove_all(dir); }

    std::string flags() const { return "--config " + cfg_path; }
    fs::path out() const { return dir / "out"; }
};

}  // namespace

TEST_CASE("schema prints and exits cleanly") { CHECK(run("schema") == 0); }

TEST_CASE("missing prerequisite checkpoints exit with code 3") {
    TestRun t;
    CHECK(run("distill-ccd " + t.flags()) == 3);
    CHECK(run("align-ta --round 1 " + t.flags()) == 3);
}

TEST_CASE("config errors exit with code 2") {
    TestRun t;
    std::ofstream os(t.cfg_path, std::ios::app);
    os << "[ccd]\nbogus_key = 1\n";
    os.close();
    CHECK(run("train-teacher " + t.flags()) == 2);
}

TEST_CASE("stage pipeline runs, refuses overwrites, and samples deterministically") {
    TestRun t;
    REQUIRE(run("train-teacher " + t.flags()) == 0);
    CHECK(fs::exists(t.out() / "teacher.ckpt"));
    CHECK(fs::exists(t.out() / "teacher_metrics.csv"));

    // Outputs are append-only without --force.
    CHECK(run("train-teacher " + t.flags()) == 2);
    CHECK(run("train-teacher --force " + t.flags()) == 0);

    REQUIRE(run("distill-ccd " + t.flags()) == 0);
    CHECK(fs::exists(t.out() / "ccd.ckpt"));

    const std::string s1 = (t.dir / "s1.ckpt").string();
    const std::string s2 = (t.dir / "s2.ckpt").string();
    REQUIRE(run("sample --steps 2 --n 4 --out-file " + s1 + " " + t.flags()) == 0);
    REQUIRE(run("sample --steps 2 --n 4 --out-file " + s2 + " " + t.flags()) == 0);
    const std::string b1 = slurp(s1), b2 = slurp(s2);
    CHECK(!b1.empty());
    CHECK(b1 == b2);

    // Identical reruns of a stage reproduce the checkpoint byte for byte.
    const std::string ccd_bytes = slurp((t.out() / "ccd.ckpt").string());
    REQUIRE(run("distill-ccd --force " + t.flags()) == 0);
    CHECK(slurp((t.out() / "ccd.ckpt").string()) == ccd_bytes);
}

TEST_CASE("plot-data export requires metrics and is idempotent") {
    TestRun t;
    CHECK(run("export-plotdata " + t.flags()) == 4);
    REQUIRE(run("train-teacher " + t.flags()) == 0);
    REQUIRE(run("export-plotdata " + t.flags()) == 0);
    const std::string once = slurp((t.out() / "plot_loss.csv").string());
    REQUIRE(run("export-plotdata " + t.flags()) == 0);
    CHECK(slurp((t.out() / "plot_loss.csv").string()) == once);
    CHECK(!once.empty());
}
