#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "affsls/config.hpp"
#include "affsls/data_driven.hpp"
#include "json.hpp"

namespace affsls {
namespace {

namespace fs = std::filesystem;

const std::string kExample = std::string(AFFSLS_SOURCE_DIR) + "/configs/swing.example.json";

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("affsls_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun affsls(const std::string& args, const std::string& env = "") const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" AFFSLS_CLI "' " + args +
                            " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
  }

  fs::path write_config(const nlohmann::json& doc, const std::string& name = "cfg.json") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }

  static nlohmann::json example() { return nlohmann::json::parse(slurp(kExample)); }

  fs::path dir_;
};

TEST_F(CliTest, SimulateWritesLogsSummaryAndPlot) {
  const CliRun r = affsls("simulate --config '" + kExample + "' --out sim");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"traditional.csv", "sls.csv", "dd-sls.csv", "summary.json",
                        "trajectories.svg"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  }
  const auto summary = nlohmann::json::parse(slurp(dir_ / "sim" / "summary.json"));
  EXPECT_TRUE(summary["pass"].get<bool>());
  EXPECT_EQ(summary["runs"].size(), 3u);
  EXPECT_EQ(summary["comparisons"].size(), 2u);
  EXPECT_NE(r.out.find("traditional vs dd-sls"), std::string::npos);
}

TEST_F(CliTest, SimulateNoPlotAndEnvironmentOutputDirectory) {
  CliRun r = affsls("simulate --config '" + kExample + "' --no-plot", "AFFSLS_OUT_DIR=envout");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "envout" / "sls.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "envout" / "trajectories.svg"));
  // --out wins over the environment.
  r = affsls("simulate --config '" + kExample + "' --no-plot --out flag", "AFFSLS_OUT_DIR=envout2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "flag" / "sls.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "envout2"));
}

TEST_F(CliTest, SimulateIsDeterministic) {
  ASSERT_EQ(affsls("simulate --config '" + kExample + "' --no-plot --out a").code, 0);
  ASSERT_EQ(affsls("simulate --config '" + kExample + "' --no-plot --out b").code, 0);
  // solve_ms is wall time; every other column must match exactly.
  auto strip = [](const std::string& text) {
    std::stringstream in(text), out;
    for (std::string line; std::getline(in, line);) out << line.substr(0, line.rfind(',')) << '\n';
    return out.str();
  };
  for (const char* f : {"traditional.csv", "sls.csv", "dd-sls.csv"}) {
    EXPECT_EQ(strip(slurp(dir_ / "a" / f)), strip(slurp(dir_ / "b" / f))) << f;
  }
}

TEST_F(CliTest, ZeroHorizonIsAConfigError) {
  auto doc = example();
  doc["horizon"] = 0;
  const CliRun r = affsls("simulate --config '" + write_config(doc).string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("horizon"), std::string::npos) << r.err;
}

TEST_F(CliTest, NonExcitingDataFileNamesRequiredOrder) {
  const BenchmarkSpec swing = swing_config().benchmark.value();
  TrajectoryData d;
  VectorXd x = VectorXd::Zero(2);
  for (int k = 0; k < 60; ++k) {
    d.x_data.push_back(x);
    d.u_data.push_back(VectorXd::Constant(1, 0.1 * (k % 3)));
    x = swing.A * x + swing.B * d.u_data.back() + swing.s;
  }
  std::ofstream(dir_ / "flat.csv") << [&] {
    std::ostringstream ss;
    write_trajectory_csv(ss, d);
    return ss.str();
  }();
  auto doc = example();
  doc["controllers"] = {"dd-sls"};
  doc["data"] = {{"file", "flat.csv"}};
  const CliRun r = affsls("simulate --config '" + write_config(doc).string() + "' --out o");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("14"), std::string::npos) << r.err;
}

TEST_F(CliTest, CompareExitCodes) {
  ASSERT_EQ(affsls("simulate --config '" + kExample + "' --no-plot --out o").code, 0);
  EXPECT_EQ(affsls("compare o/traditional.csv o/traditional.csv").code, 0);
  EXPECT_EQ(affsls("compare o/traditional.csv o/dd-sls.csv --tol 1e-4").code, 0);
  const CliRun tight = affsls("compare o/traditional.csv o/dd-sls.csv --tol 1e-15");
  EXPECT_EQ(tight.code, 1) << tight.out;
  EXPECT_NE(tight.out.find("FAIL"), std::string::npos);

  auto doc = example();
  doc["sim_steps"] = 5;
  doc["controllers"] = {"traditional"};
  ASSERT_EQ(affsls("simulate --config '" + write_config(doc).string() + "' --no-plot --out s").code, 0);
  EXPECT_EQ(affsls("compare o/traditional.csv s/traditional.csv").code, 2);
  EXPECT_EQ(affsls("compare o/traditional.csv missing.csv").code, 2);
}

TEST_F(CliTest, ValidateReportsEveryProperty) {
  auto doc = example();
  doc["validate"] = {{"trials", 20}, {"disturbance_trials", 5}, {"dd_trials", 10}};
  const CliRun r = affsls("validate --config '" + write_config(doc).string() + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("response subspace equation"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, ValidateDetectsCorruptedHankel) {
  auto doc = example();
  doc["validate"] = {{"trials", 2}, {"disturbance_trials", 1}, {"dd_trials", 5},
                     {"corrupt_hankel", true}};
  const CliRun r = affsls("validate --config '" + write_config(doc).string() + "'");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("property violated: data-driven response membership"), std::string::npos)
      << r.err;
}

TEST_F(CliTest, ValidateRejectsZeroTrials) {
  auto doc = example();
  doc["validate"]["trials"] = 0;
  EXPECT_EQ(affsls("validate --config '" + write_config(doc).string() + "'").code, 2);
}

TEST_F(CliTest, GenerateDataIsReproducible) {
  const CliRun a = affsls("generate-data --config '" + kExample + "' --out a.csv");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("required excitation order 14"), std::string::npos) << a.out;
  ASSERT_EQ(affsls("generate-data --config '" + kExample + "' --out b.csv").code, 0);
  const std::string text = slurp(dir_ / "a.csv");
  EXPECT_EQ(text, slurp(dir_ / "b.csv"));
  std::istringstream in(text);
  const TrajectoryData d = read_trajectory_csv(in, "a.csv");
  EXPECT_EQ(d.length(), 60);
  ASSERT_EQ(affsls("generate-data --config '" + kExample + "' --out c.csv --seed 8").code, 0);
  EXPECT_NE(text, slurp(dir_ / "c.csv"));
}

TEST_F(CliTest, GenerateDataRejectsShortLength) {
  auto doc = example();
  doc["data"]["length"] = 10;
  const CliRun r = affsls("generate-data --config '" + write_config(doc).string() + "' --out d.csv");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("order 14"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "d.csv"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(affsls("").code, 2);
  EXPECT_EQ(affsls("frobnicate").code, 2);
  EXPECT_EQ(affsls("simulate").code, 2);
  EXPECT_EQ(affsls("simulate --config nowhere.json").code, 2);
  EXPECT_EQ(affsls("--help").code, 0);
}

}  // namespace
}  // namespace affsls
