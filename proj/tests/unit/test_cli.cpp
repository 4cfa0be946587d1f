#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ionheat/cli.hpp"

namespace ionheat {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ionheat_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, UnknownSubcommandExitsOne) {
  EXPECT_EQ(run({"bogus"}), 1);
  EXPECT_EQ(run({}), 1);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run({"--help"}), 0); }

TEST_F(CliTest, BadConfigKeyIsNamed) {
  EXPECT_EQ(run({"trap", "-o", dir_.string(), "--set", "trap.nope=1"}), 1);
  EXPECT_NE(err_.str().find("trap.nope"), std::string::npos);
  EXPECT_EQ(run({"trap", "-o", dir_.string(), "--set", "trap.rf_amplitude_v=abc"}), 1);
  EXPECT_NE(err_.str().find("trap.rf_amplitude_v"), std::string::npos);
  EXPECT_EQ(run({"trap", "-o", dir_.string(), "--config", (dir_ / "missing.cfg").string()}), 1);
}

TEST_F(CliTest, TrapReportsBundledAxialFrequency) {
  ASSERT_EQ(run({"trap", "-o", dir_.string()}), 0) << err_.str();
  std::ifstream csv(dir_ / "trap.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  std::istringstream hs(header), rs(row);
  std::string name, value;
  bool found = false;
  while (std::getline(hs, name, ',') && std::getline(rs, value, ',')) {
    if (name != "f_y_hz") continue;
    EXPECT_NEAR(std::stod(value), 1.29e6, 2e3);
    found = true;
  }
  EXPECT_TRUE(found);
}

TEST_F(CliTest, SynthThenFitRoundtrip) {
  ASSERT_EQ(run({"synth", "-o", dir_.string(), "--seed", "7"}), 0) << err_.str();
  ASSERT_EQ(run({"fit", "-o", dir_.string(), "--regime", "dc", "--data", (dir_ / "synth.csv").string()}), 0)
      << err_.str();
  EXPECT_NE(out_.str().find("D = "), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "fit.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "fit_report.txt"));
}

TEST_F(CliTest, SameSeedGivesIdenticalOutputs) {
  const auto a = dir_ / "a", b = dir_ / "b";
  for (const auto& d : {a, b}) {
    ASSERT_EQ(run({"synth", "-o", d.string(), "--seed", "3"}), 0);
    ASSERT_EQ(run({"oracle", "-o", d.string(), "--seed", "3", "--set", "oracle.n_realizations=8", "--set",
                   "oracle.duration_periods=120", "--set", "oracle.write_traces=true"}),
              0)
        << err_.str();
  }
  for (const auto* name : {"synth.csv", "synth_truth.txt", "oracle.csv", "oracle_traces.csv"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST_F(CliTest, WritesOnlyIntoOutDir) {
  const auto out = dir_ / "out";
  const auto cwd = fs::current_path();
  fs::current_path(dir_);
  const int code = run({"budget", "-o", out.string()});
  fs::current_path(cwd);
  ASSERT_EQ(code, 0) << err_.str();
  std::vector<std::string> top;
  for (const auto& e : fs::directory_iterator(dir_)) top.push_back(e.path().filename().string());
  EXPECT_EQ(top, std::vector<std::string>{"out"});
  EXPECT_TRUE(fs::exists(out / "budget.csv"));
  EXPECT_NE(out_.str().find("worst_case_coherent"), std::string::npos);
}

TEST_F(CliTest, OutDirFromEnvironment) {
  const auto out = dir_ / "env";
  ::setenv("IONHEAT_OUT_DIR", out.string().c_str(), 1);
  const int code = run({"chain"});
  ::unsetenv("IONHEAT_OUT_DIR");
  ASSERT_EQ(code, 0) << err_.str();
  EXPECT_TRUE(fs::exists(out / "chain.csv"));
}

TEST_F(CliTest, ReproduceSingleCriterion) {
  ASSERT_EQ(run({"reproduce", "-o", dir_.string(), "--only", "1"}), 0) << err_.str();
  EXPECT_NE(out_.str().find("criterion 1 PASS"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "reproduce.csv"));
}

}  // namespace
}  // namespace ionheat
