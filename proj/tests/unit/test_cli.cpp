#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "mgsim/csv.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using mgsim::test::read_file;
using mgsim::test::temp_dir;

namespace {

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + std::string(MGSIM_CLI) + "\" " + args +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

std::string out(const fs::path& dir) { return "--out-dir \"" + dir.string() + "\" "; }

}  // namespace

TEST(Cli, ValidateBundled) {
    EXPECT_EQ(run("validate"), 0);
    EXPECT_EQ(run("--topology \"" + (mgsim::test::data_dir() / "default_topology.json").string() + "\" validate"), 0);
}

TEST(Cli, InputErrorsExitOne) {
    const auto dir = temp_dir("cli_bad");
    {
        std::ofstream f(dir / "bad.json");
        f << "{\"buses\": [1, 1], \"branches\": [], \"converters\": [], \"loads\": []}";
    }
    EXPECT_EQ(run("--topology \"" + (dir / "bad.json").string() + "\" validate"), 1);
    EXPECT_EQ(run("--topology /nonexistent.json validate"), 1);
    EXPECT_EQ(run("--scenario /nonexistent validate"), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("equilibrium"), 1);
    EXPECT_EQ(run(out(dir) + "equilibrium --at 1e9"), 1);
    EXPECT_EQ(run(out(dir) + "scenario-convert --raw-dir \"" + (mgsim::test::sample_dir() / "raw").string() + "\""), 1);
}

TEST(Cli, EquilibriumOutputsAndDeterminism) {
    const auto a = temp_dir("cli_eq_a"), b = temp_dir("cli_eq_b");
    ASSERT_EQ(run(out(a) + "equilibrium --at 900 --debug-matrices"), 0);
    ASSERT_EQ(run(out(b) + "equilibrium --at 900"), 0);
    EXPECT_EQ(line_count(a / "equilibrium.csv"), 226u);
    EXPECT_EQ(read_file(a / "equilibrium.csv"), read_file(b / "equilibrium.csv"));
    EXPECT_TRUE(fs::exists(a / "M1.csv"));
    EXPECT_TRUE(fs::exists(a / "K.csv"));
    EXPECT_FALSE(fs::exists(b / "M2.csv"));
    const auto manifest = read_file(a / "manifest.json");
    EXPECT_NE(manifest.find("sha256"), std::string::npos);
    EXPECT_NE(manifest.find("setpoints_qu.csv"), std::string::npos);
}

TEST(Cli, Eig) {
    const auto dir = temp_dir("cli_eig");
    ASSERT_EQ(run(out(dir) + "eig --at 0"), 0);
    EXPECT_EQ(line_count(dir / "eig.csv"), 226u);
    EXPECT_TRUE(fs::exists(dir / "spectrum.svg"));
    EXPECT_NE(read_file(dir / "spectrum.svg").find("<svg"), std::string::npos);
}

TEST(Cli, TransientFiles) {
    const auto dir = temp_dir("cli_tr");
    ASSERT_EQ(run(out(dir) + "transient --from 0 --step-to 900 --horizon 0.05 --samples 10"), 0);
    const auto t = mgsim::csv::read(dir / "trajectory.csv");
    EXPECT_EQ(t.rows.size(), 11u);
    EXPECT_EQ(t.header.size(), 1u + 225 + 64);
    EXPECT_EQ(t.header[1], "G1.delta");
    for (const char* f : {"diagnostics.csv", "frequency.svg", "power_p.svg", "voltage.svg", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Cli, NumericalFailureExitsTwo) {
    const auto dir = temp_dir("cli_num");
    EXPECT_EQ(run("--rtol 1e-16 --atol 1e-300 " + out(dir) + "transient --from 0 --step-to 900 --horizon 0.01"), 2);
}

TEST(Cli, EmptySweep) {
    const auto dir = temp_dir("cli_sweep_empty");
    ASSERT_EQ(run(out(dir) + "sweep --from 100 --to 200"), 0);
    EXPECT_EQ(line_count(dir / "sweep.csv"), 1u);
}

TEST(Cli, SweepIndependentOfThreadCount) {
    const auto a = temp_dir("cli_sweep_1"), b = temp_dir("cli_sweep_3");
    const std::string args = "sweep --from 0 --to 89100";
    ASSERT_EQ(run(out(a) + args, "MGSIM_THREADS=1"), 0);
    ASSERT_EQ(run(out(b) + args, "MGSIM_THREADS=3"), 0);
    EXPECT_EQ(line_count(a / "sweep.csv"), 101u);
    EXPECT_EQ(read_file(a / "sweep.csv"), read_file(b / "sweep.csv"));
    EXPECT_EQ(run(out(a) + args, "MGSIM_THREADS=0"), 1);
    EXPECT_EQ(run(out(a) + args, "MGSIM_THREADS=lots"), 1);
}

TEST(Cli, ScenarioConvert) {
    const auto dir = temp_dir("cli_convert");
    ASSERT_EQ(run("--v-nominal 12660 " + out(dir) + "scenario-convert --raw-dir \"" +
                  (mgsim::test::sample_dir() / "raw").string() + "\""),
              0);
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"})
        EXPECT_EQ(read_file(dir / f), read_file(mgsim::test::sample_dir() / f)) << f;
    EXPECT_EQ(run("--scenario \"" + dir.string() + "\" validate"), 0);
    EXPECT_EQ(run("--v-nominal 12660 " + out(dir) + "scenario-convert --xi-sign sideways --raw-dir \"" +
                  (mgsim::test::sample_dir() / "raw").string() + "\""),
              1);
}
