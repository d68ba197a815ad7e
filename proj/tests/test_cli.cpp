#include "driftless/io.hpp"
#include "driftless/version.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using namespace driftless;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(DRIFTLESS_EXE) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               ("driftless_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);

        const DlvGrid g = make_grid({0.95, 1.0, 1.05}, {20, 40, 60}, 0.5);
        const auto mk = synthetic_market(g, 1.0);
        VarSpec v{mk.params, g, mk.init_prev, mk.init};
        write_json(dir_ / "params.json", to_json(v));

        CostSpec c;
        c.gamma = {0.001};
        c.mode = CostMode::Marginal;
        write_json(dir_ / "cost.json", to_json(c));
        write_json(dir_ / "utility.json", to_json(Utility::exponential(1.0)));

        TrainConfig t;
        t.epochs = 40;
        t.batch_size = 500;
        t.hidden = {32, 32};
        write_json(dir_ / "train.json", to_json(t));
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string p(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, Version) {
    const auto r = run("--version");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.output.find(kVersion), std::string::npos);
}

TEST_F(Cli, SimulateMakeQVerifyPipeline) {
    auto r = run("--seed 11 simulate --params " + p("params.json") + " --paths 2000 --steps 5 --out " + p("bundle"));
    ASSERT_EQ(r.code, 0) << r.output;
    ASSERT_TRUE(fs::exists(dir_ / "bundle" / "run.json"));

    r = run("--seed 3 make-q --bundle " + p("bundle") + " --cost " + p("cost.json") + " --utility " +
            p("utility.json") + " --train " + p("train.json") + " --out " + p("q/weights.csv"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto w = read_weights_csv(dir_ / "q" / "weights.csv");
    ASSERT_EQ(w.size(), 2000u);
    for (double x : w) ASSERT_GT(x, 0.0);

    r = run("verify --bundle " + p("bundle") + " --weights " + p("q/weights.csv") + " --cost " + p("cost.json") +
            " --report " + p("q/drift.csv"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("drift: 0/"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "q" / "drift.csv"));

    const Json manifest = read_json(dir_ / "q" / "run.json");
    EXPECT_EQ(manifest["runs"].size(), 2u);  // make-q and verify both recorded
}

TEST_F(Cli, DemoConfigPipelinePasses) {
    const std::string cfg = DRIFTLESS_CONFIG_DIR;
    auto r = run("--seed 1 simulate --params " + cfg + "/params.json --paths 10000 --steps 10 --out " + p("bundle"));
    ASSERT_EQ(r.code, 0) << r.output;
    r = run("make-q --bundle " + p("bundle") + " --cost " + cfg + "/cost.json --utility " + cfg +
            "/utility.json --train " + cfg + "/train.json --out " + p("q/weights.csv"));
    ASSERT_EQ(r.code, 0) << r.output;

    r = run("verify --bundle " + p("bundle") + " --cost " + cfg + "/cost.json --report " + p("p/drift.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(r.output.find("drift: 0/"), std::string::npos) << r.output;  // uniform weights fail

    r = run("verify --bundle " + p("bundle") + " --weights " + p("q/weights.csv") + " --cost " + cfg +
            "/cost.json --report " + p("q/drift.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("drift: 0/"), std::string::npos) << r.output;
}

TEST_F(Cli, RerunsAreByteIdentical) {
    const std::string sim = "--seed 5 simulate --params " + p("params.json") + " --paths 200 --steps 3 --out ";
    ASSERT_EQ(run(sim + p("a")).code, 0);
    ASSERT_EQ(run(sim + p("b")).code, 0);
    EXPECT_EQ(sha256_file(dir_ / "a" / "paths.csv"), sha256_file(dir_ / "b" / "paths.csv"));

    TrainConfig t;
    t.epochs = 5;
    t.batch_size = 100;
    t.hidden = {8};
    write_json(dir_ / "small.json", to_json(t));
    const std::string mq = "make-q --bundle " + p("a") + " --cost " + p("cost.json") + " --utility " +
                           p("utility.json") + " --train " + p("small.json") + " --out ";
    ASSERT_EQ(run(mq + p("w1.csv")).code, 0);
    ASSERT_EQ(run(mq + p("w2.csv")).code, 0);
    EXPECT_EQ(read_text(dir_ / "w1.csv"), read_text(dir_ / "w2.csv"));
}

TEST_F(Cli, MissingWeightsNamesTheFile) {
    ASSERT_EQ(run("simulate --params " + p("params.json") + " --paths 20 --steps 2 --out " + p("bundle")).code, 0);
    const auto r = run("verify --bundle " + p("bundle") + " --weights " + p("nope.csv") + " --cost " +
                       p("cost.json") + " --report " + p("drift.csv"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("nope.csv"), std::string::npos) << r.output;
}

TEST_F(Cli, UnknownConfigKeyIsRejected) {
    write_text_atomic(dir_ / "bad_cost.json", R"({"gamma": [0.001], "mode": "marginal", "gama": 1})");
    ASSERT_EQ(run("simulate --params " + p("params.json") + " --paths 20 --steps 2 --out " + p("bundle")).code, 0);
    const auto r = run("verify --bundle " + p("bundle") + " --cost " + p("bad_cost.json") + " --report " +
                       p("drift.csv"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("gama"), std::string::npos) << r.output;
}

TEST_F(Cli, MissingSubcommandFails) { EXPECT_NE(run("").code, 0); }
