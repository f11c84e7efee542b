#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "qtomo/config.hpp"
#include "qtomo/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = QTOMO_CLI_PATH;
const fs::path kConfigs = QTOMO_CONFIG_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qtomo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + kCli.string() + "' " + args +
                            " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, InvalidInputExitsTwo) {
  write("zero.cfg", "state = mixed\nrepetitions = 0\n");
  EXPECT_EQ(run("run --config zero.cfg"), 2);
  write("lam.cfg", "lambda = 0.9\n");
  EXPECT_EQ(run("run --config lam.cfg"), 2);
  EXPECT_EQ(run("run --config missing.cfg"), 2);
  write("empty.csv", "");
  EXPECT_EQ(run("fit empty.csv"), 2);
  EXPECT_EQ(run("reproduce fig6"), 2);
  EXPECT_EQ(run("predict --meas sic --lambda 0 --protocol static"), 2);
  EXPECT_EQ(run("predict --lambda 0.7"), 2);
  EXPECT_EQ(run("predict --n 100"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("oracle --meas sic --n 500"), 2);
  EXPECT_FALSE(read("stderr.txt").empty());
}

TEST_F(Cli, RunIsDeterministic) {
  write("s.cfg",
        "measurement = mub\nstate = rho2_pure\nlambda = 0.002\nn_grid = 100, 1000\n"
        "repetitions = 20\nseed = 5\n");
  ASSERT_EQ(run("run -c s.cfg -o a.csv -j 1"), 0);
  ASSERT_EQ(run("run -c s.cfg -o b.csv -j 3"), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  ASSERT_EQ(run("run -c s.cfg -o c.csv --seed 6"), 0);
  EXPECT_NE(read("a.csv"), read("c.csv"));
  std::istringstream in(read("a.csv"));
  EXPECT_EQ(qtomo::io::read_sweep_csv(in)[0].rows.size(), 6u);
}

TEST_F(Cli, RunJsonAndOverlay) {
  write("s.cfg", "state = mixed\nprotocols = static\nn_grid = 100, 200, 400\nrepetitions = 10\noverlay = true\n");
  ASSERT_EQ(run("run -c s.cfg -o out.json --format json"), 0);
  const auto j = qtomo::io::json::parse(read("out.json"));
  EXPECT_EQ(j.at("rows").size(), 3u);
  EXPECT_TRUE(fs::exists(dir_ / "out.static.theory.csv"));
}

TEST_F(Cli, FitRecoversSyntheticLaw) {
  std::ostringstream os;
  os << qtomo::io::kSweepHeader << '\n';
  for (int n : {100, 1000, 10000, 100000})
    os << "known,sic,synthetic," << n << ',' << qtomo::io::fmt(2.0 / n) << ",0,100,0\n";
  write("syn.csv", os.str());
  ASSERT_EQ(run("fit syn.csv -o fits.csv"), 0);
  std::istringstream in(read("fits.csv"));
  const auto fits = qtomo::io::read_fit_csv(in);
  ASSERT_EQ(fits.size(), 1u);
  EXPECT_NEAR(fits[0].fit.alpha, -1.0, 1e-9);
  EXPECT_NEAR(fits[0].fit.c, 2.0, 1e-7);
}

TEST_F(Cli, ShippedConfigRuns) {
  ASSERT_EQ(run("run -c '" + (kConfigs / "fig2a.cfg").string() + "' --reps 2 -o fig2a.csv"), 0);
  std::istringstream in(read("fig2a.csv"));
  EXPECT_EQ(qtomo::io::read_sweep_csv(in)[0].rows.size(), 36u);
  EXPECT_TRUE(fs::exists(dir_ / "fig2a.known.theory.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "fig2a.static.theory.csv"));
}

TEST_F(Cli, EveryShippedConfigParses) {
  int count = 0;
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".cfg") continue;
    ++count;
    EXPECT_NO_THROW(qtomo::load_config(e.path().string())) << e.path();
  }
  EXPECT_GE(count, 10);
}

TEST_F(Cli, ReproduceWritesArtifacts) {
  ASSERT_EQ(run("reproduce fig3b --reps 3 --outdir out -j 2"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out/fig3b.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out/fig3b.fits.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out/fig3b.gp"));
  EXPECT_TRUE(fs::exists(dir_ / "out/fig3b.mixed.static.theory.csv"));
  EXPECT_NE(read("stdout.txt").find("alpha"), std::string::npos);
}

TEST_F(Cli, PredictAndOracle) {
  ASSERT_EQ(run("predict --meas sic --lambda 0.0002 --protocol known --n 100:100"), 0);
  std::istringstream in(read("stdout.txt"));
  const auto rows = qtomo::io::read_prediction_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].prediction.infidelity, 0.0052, 1e-15);
  ASSERT_EQ(run("oracle --meas sic --protocol static --bloch 0 0 0 --n 4"), 0);
  const auto j = qtomo::io::json::parse(read("stdout.txt"));
  EXPECT_GT(j.at("expected_infidelity").get<double>(), 0.0);
}
