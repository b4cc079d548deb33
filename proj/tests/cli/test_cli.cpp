// Contract tests for the orthant command-line tool: exit codes, error JSON,
// output schemas and determinism. The binary path comes from ORTHANT_CLI.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "orthant/bench.hpp"
#include "orthant/matrix_io.hpp"
#include "orthant/normal.hpp"
#include "orthant/report.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int exit_code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(ORTHANT_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("orthant_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

void expect_error_schema(const Result& r, int exit_code) {
  EXPECT_EQ(r.exit_code, exit_code) << r.out;
  const json j = json::parse(r.out);
  ASSERT_TRUE(j.contains("error")) << r.out;
  EXPECT_TRUE(j["error"]["code"].is_string());
  EXPECT_TRUE(j["error"]["message"].is_string());
  EXPECT_EQ(j["error"]["exit_code"], exit_code);
  EXPECT_TRUE(j["version"].is_string());
}

TEST_F(Cli, OneDimensionalHalf) {
  const Result r = run("prob --dim 1 --mean 0 --var 1 -t 0 --method GMC");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json j = json::parse(r.out);
  for (const char* key : {"method", "p", "pi_t", "variance", "std_error", "q", "m_star",
                          "acceptance_rate", "time_s", "efficiency", "seed", "config", "version"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["method"], "GMC");
  EXPECT_NEAR(j["p"].get<double>(), 0.5, 4 * j["std_error"].get<double>() + 1e-12);
  EXPECT_DOUBLE_EQ(j["pi_t"].get<double>(), 1.0 - j["p"].get<double>());
  EXPECT_EQ(j["config"]["t"], 0.0);
}

TEST_F(Cli, IndependentTwentyDimensions) {
  orthant::io::write_csv(path("cov.csv"), Eigen::MatrixXd::Identity(20, 20));
  const double exact = 1.0 - std::pow(orthant::norm_cdf(2.0), 20);
  EXPECT_NEAR(exact, 0.3689, 1e-4);
  for (const char* method : {"GMC", "GanMC", "MC"}) {
    for (const char* extra : {"", "--q 5"}) {
      if (std::string(method) == "MC" && *extra) continue;
      const Result r = run("prob --cov " + path("cov.csv") + " -t 2 --seed 11 --method " + method + " " + extra);
      ASSERT_EQ(r.exit_code, 0) << r.out;
      const json j = json::parse(r.out);
      EXPECT_NEAR(j["p"].get<double>(), exact, 4 * j["std_error"].get<double>() + 1e-12)
          << method << " " << extra;
    }
  }
}

TEST_F(Cli, RerunsAreIdenticalApartFromTiming) {
  ASSERT_EQ(run("make-testcase --d 150 --seed 4 --out " + path("tc")).exit_code, 0);
  const std::string args = "prob --cov " + path("tc/cov.csv") + " --mean " + path("tc/mean.csv") +
                           " -t 5 --method GanMC --seed 7";
  const Result a = run(args), b = run(args);
  ASSERT_EQ(a.exit_code, 0) << a.out;
  ASSERT_EQ(b.exit_code, 0);
  EXPECT_EQ(orthant::report::strip_timing(json::parse(a.out)),
            orthant::report::strip_timing(json::parse(b.out)));
  const json j = json::parse(a.out);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["config"]["estimator"]["method"], "GanMC");
}

TEST_F(Cli, CsvFormat) {
  const Result r = run("prob --dim 4 --rho 0.2 -t 1 --format csv --seed 2");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  std::istringstream is(r.out);
  std::string provenance, header, row;
  std::getline(is, provenance);
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(provenance.rfind("# orthant ", 0), 0u);
  EXPECT_NE(provenance.find("seed=2"), std::string::npos);
  EXPECT_EQ(header, "method,p,pi_t,variance,std_error,q,m_star,acceptance_rate,time_s,efficiency,seed");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
}

TEST_F(Cli, ConfigurationErrorsExitOne) {
  expect_error_schema(run("prob --dim 3"), 1);                    // missing threshold
  expect_error_schema(run("prob --dim 3 --rho 2 -t 0"), 1);       // not positive definite
  expect_error_schema(run("prob --dim 3 -t 0 --active 0,7"), 1);  // index out of range
  expect_error_schema(run("prob --dim 3 -t 0 --method XYZ"), 1);
  expect_error_schema(run("conservative --grid 2x10"), 1);        // no observations
  EXPECT_EQ(json::parse(run("prob --dim 3").out)["error"]["code"], "InvalidArgument");
}

TEST_F(Cli, EstimatorErrorsExitTwo) {
  const Result r = run("prob --dim 10 -t -4 --q 5 --max-tries 100");
  expect_error_schema(r, 2);
  EXPECT_EQ(json::parse(r.out)["error"]["code"], "AcceptanceTooLow");
}

TEST_F(Cli, IoErrorsExitThree) {
  expect_error_schema(run("prob --cov " + path("missing.csv") + " -t 0"), 3);
  {
    std::ofstream f(path("bad.csv"));
    f << "1,2\n3,x\n";
  }
  expect_error_schema(run("prob --cov " + path("bad.csv") + " -t 0"), 3);
  expect_error_schema(run("prob --dim 2 -t 0 --out " + path("no/such/dir/out.json")), 3);
}

TEST_F(Cli, BenchMCsvRoundTrips) {
  const Result r = run("bench-m --dim 8 --rho 0.3 -t 1.5 --m-values 1,3 --replications 2 --outer 300 --seed 5 --out " +
                    path("m.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const std::string text = slurp(path("m.csv"));
  std::istringstream is(text);
  const auto records = orthant::bench::read_csv(is);
  // GMC, GanMC m=1, GanMC m=3 and GanMC-auto per replication.
  ASSERT_EQ(records.size(), 8u);
  EXPECT_EQ(records[0].method, "GMC");
  EXPECT_EQ(records[3].method, "GanMC-auto");

  std::ostringstream back;
  orthant::bench::write_csv(back, records);
  EXPECT_EQ(text.substr(text.find('\n') + 1), back.str());

  const std::string summary = slurp(path("m.summary.csv"));
  EXPECT_NE(summary.find("method,axis,axis_value,count,eff_q25,eff_median,eff_q75,estimate_median,ratio_to_baseline"),
            std::string::npos);
}

TEST_F(Cli, BenchDProducesOneRowPerMethodDimensionAndReplication) {
  const Result r = run("bench-d --d-values 20,40 --methods MC,GMC --replications 2 --input-dim 2 --theta 0.3,0.3 "
                    "--sigma2 1 --n-condition 5 -t 2 --budget-samples 2000 --out " + path("d.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  std::ifstream f(path("d.csv"));
  const auto records = orthant::bench::read_csv(f);
  ASSERT_EQ(records.size(), 8u);
  EXPECT_EQ(records.front().axis, "d");
  EXPECT_EQ(records.back().axis_value, 40.0);
}

TEST_F(Cli, MakeTestcaseIsByteStable) {
  const std::string common = " --d 120 --input-dim 3 --theta 0.5,0.5,1 --n-condition 10 --seed 9 --out ";
  ASSERT_EQ(run("make-testcase" + common + path("a")).exit_code, 0);
  ASSERT_EQ(run("make-testcase" + common + path("b")).exit_code, 0);
  for (const char* file : {"mean.csv", "cov.csv", "points.csv", "testcase.json"})
    EXPECT_EQ(slurp(dir_ / "a" / file), slurp(dir_ / "b" / file)) << file;

  ASSERT_EQ(run("make-testcase --d 120 --input-dim 3 --theta 0.5,0.5,1 --n-condition 10 --seed 10 --out " +
                path("c")).exit_code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "mean.csv"), slurp(dir_ / "c" / "mean.csv"));

  const Eigen::MatrixXd cov = orthant::io::read_matrix(dir_ / "a" / "cov.csv");
  ASSERT_EQ(cov.rows(), 120);
  EXPECT_LE((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(cov.diagonal().maxCoeff(), 8.0 + 1e-12);

  ASSERT_EQ(run("make-testcase --d 50 --cov-format bin --out " + path("bin")).exit_code, 0);
  EXPECT_EQ(orthant::io::read_matrix(dir_ / "bin" / "cov.bin").rows(), 50);
}

TEST_F(Cli, ConservativeSmallGrid) {
  const Result r = run("conservative --lhs 6 --grid 2x10 --seed 3 --mask " + path("mask.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["seed"], 3);
  const bool empty = j["empty"].get<bool>();
  if (!empty) EXPECT_GE(j["rho"].get<double>(), 0.95);
  EXPECT_TRUE(j.contains("trace"));

  std::istringstream mask(slurp(path("mask.csv")));
  std::string line;
  std::getline(mask, line);
  EXPECT_EQ(line.rfind("# orthant ", 0), 0u);
  std::getline(mask, line);
  EXPECT_EQ(line, "x1,x2,mean,sd,coverage,in_set");
  int rows = 0, in_set = 0;
  while (std::getline(mask, line)) {
    ++rows;
    in_set += line.back() == '1';
  }
  EXPECT_EQ(rows, 100);
  EXPECT_EQ(in_set, static_cast<int>(j["set"].size()));

  const Result again = run("conservative --lhs 6 --grid 2x10 --seed 3");
  EXPECT_EQ(orthant::report::strip_timing(json::parse(again.out)), orthant::report::strip_timing(j));
}

TEST_F(Cli, ConservativeFromObservationFile) {
  {
    std::ofstream f(path("obs.csv"));
    f << "0.1,0.2,0.5\n0.8,0.3,1.8\n0.4,0.9,-0.2\n0.6,0.6,0.9\n";
  }
  const Result r = run("conservative --obs " + path("obs.csv") + " --grid 2x8 --alpha 0.9 --format csv");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  EXPECT_NE(r.out.find("x1,x2,mean,sd,coverage,in_set"), std::string::npos);
  expect_error_schema(run("conservative --obs " + path("obs.csv") + " --grid 3x4"), 1);
}

TEST_F(Cli, HelpDocumentsSchemasAndExitCodes) {
  const Result r = run("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* text :
       {"Exit codes", "method,p,pi_t,variance,std_error,q,m_star,acceptance_rate,time_s,efficiency,seed",
        "method,axis,axis_value,replication,estimate,variance,time_s,efficiency,q,m_star,acceptance_rate,seed",
        "ratio_to_baseline", "x1,...,xk,mean,sd,coverage,in_set", "ORTHANT_LOG", "prob", "bench-m",
        "bench-d", "conservative", "make-testcase"})
    EXPECT_NE(r.out.find(text), std::string::npos) << text;
  EXPECT_EQ(run("--version").exit_code, 0);
}

}  // namespace
