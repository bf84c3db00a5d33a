#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cotq/io.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;
};

/// Runs the CLI in `dir` with stderr merged into stdout.
CliRun cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" COTQ_CLI_PATH "' " + args + " 2>&1";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / (std::string("cotq_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(cli(dir_, "simulate spherical --n 400 --seed 3 --out data.csv").code, 0);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++count;
    if (slurp(e.path()) != slurp(b / e.path().filename())) return false;
  }
  return count == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{}));
}

TEST_F(Cli, SimulateIsReproducible) {
  EXPECT_EQ(cli(dir_, "simulate spherical --n 100 --seed 7 --out a.csv").code, 0);
  EXPECT_EQ(cli(dir_, "simulate spherical --n 100 --seed 7 --out b.csv").code, 0);
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
  EXPECT_EQ(cli(dir_, "simulate spherical --n 100 --seed 8 --out c.csv").code, 0);
  EXPECT_NE(slurp(dir_ / "a.csv"), slurp(dir_ / "c.csv"));
}

TEST_F(Cli, SimulateDefaultsToEnvironmentDirectory) {
  const CliRun r = cli(dir_, "simulate banana --n 10 --seed 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "cotq_out" / "simulate_banana_n10_seed1.csv"));
  ::setenv("COTQ_OUTPUT_DIR", (dir_ / "envdir").c_str(), 1);
  EXPECT_EQ(cli(dir_, "simulate spherical --n 10 --seed 2").code, 0);
  ::unsetenv("COTQ_OUTPUT_DIR");
  EXPECT_TRUE(fs::exists(dir_ / "envdir" / "simulate_spherical_n10_seed2.csv"));
}

TEST_F(Cli, OrderOutsideUnitIntervalIsUsageError) {
  const CliRun r = cli(dir_, "fit --data data.csv --x x --y y1,y2 --k 40 --taus 0.2,1.5");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("(0,1)"), std::string::npos) << r.output;
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(cli(dir_, "fit --no-such-flag").code, 1);
  EXPECT_EQ(cli(dir_, "").code, 1);
  EXPECT_EQ(cli(dir_, "--help").code, 0);
  EXPECT_EQ(cli(dir_, "simulate moon --n 10").code, 1);
  EXPECT_EQ(cli(dir_, "fit --data missing.csv --x x --y y1,y2 --k 40").code, 2);
  const CliRun col = cli(dir_, "fit --data data.csv --x x --y y1,yy --k 40");
  EXPECT_EQ(col.code, 2);
  EXPECT_NE(col.output.find("'yy'"), std::string::npos);
  EXPECT_EQ(cli(dir_, "fit --data data.csv --x x --y y1,y2 --k 4000").code, 1);
  EXPECT_EQ(cli(dir_, "validate --suite consistency --model banana").code, 1);
  EXPECT_EQ(cli(dir_, "validate --suite nothing").code, 1);
  std::ofstream(dir_ / "bad.csv") << "x,y1,y2\n0,1,2\n1,oops,3\n";
  const CliRun parse = cli(dir_, "fit --data bad.csv --x x --y y1,y2 --k 1");
  EXPECT_EQ(parse.code, 2);
  EXPECT_NE(parse.output.find("row 3"), std::string::npos);
}

TEST_F(Cli, FitIsDeterministicAcrossThreadCounts) {
  const std::string args = "fit --data data.csv --x x --y y1,y2 --k 80 --queries auto:4 --taus 0.3,0.7";
  ASSERT_EQ(cli(dir_, args + " --out one").code, 0);
  ASSERT_EQ(cli(dir_, args + " --out two --threads 4").code, 0);
  EXPECT_TRUE(same_tree(dir_ / "one", dir_ / "two"));
  EXPECT_TRUE(fs::exists(dir_ / "one" / "tubes.svg"));
  const auto recs = cotq::parse_results(slurp(dir_ / "one" / "results.json"));
  ASSERT_EQ(recs.size(), 8u);
  ASSERT_TRUE(recs[0].in_sample_mass);
}

TEST_F(Cli, FitReadsConfigFile) {
  std::ofstream(dir_ / "run.json") << R"({"dataset":"data.csv","x_columns":["x"],"y_columns":["y1","y2"],
    "weights":{"scheme":"gaussian","h":0.3},"grid":{"n_r":5,"n_s":16,"n_0":1},"taus":[0.5],"queries":[-0.5,0.5]})";
  ASSERT_EQ(cli(dir_, "fit --config run.json --out cfg").code, 0);
  const auto recs = cotq::parse_results(slurp(dir_ / "cfg" / "results.json"));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].query, std::vector<double>{0.5});
  EXPECT_EQ(recs[0].vertices.size(), 17u);
  // flags override the file
  ASSERT_EQ(cli(dir_, "fit --config run.json --taus 0.4,0.6 --out cfg2").code, 0);
  EXPECT_EQ(cotq::parse_results(slurp(dir_ / "cfg2" / "results.json")).size(), 4u);
}

TEST_F(Cli, ContoursPrintsJson) {
  const CliRun r = cli(dir_, "contours --data data.csv --x x --y y1,y2 --k 60 --at 0.25 --taus 0.5");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto recs = cotq::parse_results(r.output);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].query, std::vector<double>{0.25});
  EXPECT_EQ(recs[0].tau, 0.5);
  EXPECT_EQ(cli(dir_, "contours --data data.csv --x x --y y1,y2 --k 60 --at 0.25,1").code, 1);
}

TEST_F(Cli, ValidateCoverageWritesReport) {
  const std::string args = "validate --suite coverage --model spherical --n 600 --k 100 --mc 1000 --queries 0,1";
  const CliRun r = cli(dir_, args + " --out rep1");
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_EQ(cli(dir_, args + " --out rep2 --threads 2").code, 0);
  EXPECT_TRUE(same_tree(dir_ / "rep1", dir_ / "rep2"));
  const std::string csv = slurp(dir_ / "rep1" / "coverage.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,tau,coverage,mc,abs_error");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  const auto doc = cotq::Json::parse(slurp(dir_ / "rep1" / "coverage.json"));
  EXPECT_EQ(doc["schema"], "cotq/1");
  EXPECT_EQ(doc["entries"].size(), 6u);
  EXPECT_EQ(cli(dir_, "validate --suite coverage --mc 10").code, 1);
}

TEST_F(Cli, ValidateConsistencyWritesReport) {
  const CliRun r = cli(dir_, "validate --suite consistency --levels '200:50:4,12,1;800:100:6,16,1' --replicates 2 --out cons");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto doc = cotq::Json::parse(slurp(dir_ / "cons" / "consistency.json"));
  EXPECT_EQ(doc["median_error"].size(), 2u);
  EXPECT_EQ(doc["entries"].size(), 12u);
}

}  // namespace
