#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "rssiloc/rssiloc.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("RSSILOC_CLI");
  return p ? p : "rssiloc";
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + cli() + "' " + args + " >cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rssiloc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string log() const { return slurp(dir_ / "cli.log"); }

  fs::path dir_;
};

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " ");
  if (pos == std::string::npos) return -1.0;
  return std::stod(text.substr(pos + key.size() + 1));
}

}  // namespace

TEST_F(Cli, SimulateWritesDatasetAndIsReproducible) {
  ASSERT_EQ(run_cli("simulate --seed 7 --out a", dir_), 0) << log();
  ASSERT_EQ(run_cli("simulate --seed 7 --jobs 3 --out b", dir_), 0) << log();
  std::size_t csv = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 12u);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "scenario.json"));
  for (int k = 0; k < 6; ++k) {
    const auto m = rssiloc::run_measurements_name(k);
    EXPECT_EQ(slurp(dir_ / "a" / m), slurp(dir_ / "b" / m)) << m;
  }
  ASSERT_EQ(run_cli("simulate --seed 8 --out c", dir_), 0);
  EXPECT_NE(slurp(dir_ / "a" / "run0_measurements.csv"), slurp(dir_ / "c" / "run0_measurements.csv"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("simulate --out /proc/rssiloc_forbidden", dir_), 2);
  EXPECT_EQ(run_cli("localize --measurements missing.csv", dir_), 2);
  EXPECT_EQ(run_cli("", dir_), 2);
  EXPECT_EQ(run_cli("simulate --bogus", dir_), 2);
  EXPECT_EQ(run_cli("--help", dir_), 0);
  std::ofstream(dir_ / "bad.json") << R"({"tick_interval_s": -1})";
  EXPECT_EQ(run_cli("simulate --scenario bad.json --out x", dir_), 1);
}

TEST_F(Cli, LocalizeDirectionalBeatsOmniOffCenter) {
  ASSERT_EQ(run_cli("simulate --preset offcenter --seed 3 --out ds", dir_), 0) << log();
  const std::string base = "localize --preset offcenter --measurements ds/run0_measurements.csv --truth ds/run0_truth.csv";
  ASSERT_EQ(run_cli(base + " --pattern directional --out dir.csv", dir_), 0) << log();
  const double directional = value_after(log(), "position_rmse_m");
  ASSERT_EQ(run_cli(base + " --pattern omni --out omni.csv", dir_), 0) << log();
  const double omni = value_after(log(), "position_rmse_m");
  EXPECT_GT(directional, 0.0);
  EXPECT_LT(directional, omni);
  const auto est = rssiloc::load_estimates(dir_ / "dir.csv");
  EXPECT_FALSE(est.empty());
  EXPECT_TRUE(fs::exists(dir_ / "dir.csv.manifest.json"));
}

TEST_F(Cli, EvaluateRestrictedGridIsJobIndependent) {
  ASSERT_EQ(run_cli("simulate --seed 2 --out ds", dir_), 0) << log();
  const std::string grid = "evaluate --dataset ds --classifier knn --scaler standard --features pos --memory 1,4";
  ASSERT_EQ(run_cli(grid + " --jobs 1 --out e1", dir_), 0) << log();
  ASSERT_EQ(run_cli(grid + " --jobs 4 --out e4", dir_), 0) << log();
  const auto csv = slurp(dir_ / "e1" / "sweep.csv");
  EXPECT_EQ(csv, slurp(dir_ / "e4" / "sweep.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(dir_ / "e1" / "sweep.json"));
  EXPECT_TRUE(fs::exists(dir_ / "e1" / "manifest.json"));
}

TEST_F(Cli, TrainThenPredict) {
  ASSERT_EQ(run_cli("simulate --seed 4 --out ds", dir_), 0) << log();
  ASSERT_EQ(run_cli("train --dataset ds --runs 0,1,2 --classifier rf --n-trees 20 --memory 4 --out model.json", dir_),
            0)
      << log();
  ASSERT_EQ(run_cli("predict --model model.json --scenario ds/scenario.json --measurements ds/run3_measurements.csv "
                    "--truth ds/run3_truth.csv --out labels.csv",
                    dir_),
            0)
      << log();
  EXPECT_GT(value_after(log(), "accuracy"), 0.8);
  const auto lines = rssiloc::detail::read_lines(dir_ / "labels.csv");
  ASSERT_GT(lines.size(), 1u);
  EXPECT_EQ(lines[0], "tick,predicted,truth");
  EXPECT_EQ(run_cli("train --dataset ds --runs 0,9 --out m2.json", dir_), 1);
}
