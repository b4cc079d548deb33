#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthant/gauss.hpp"
#include "orthant/grf.hpp"
#include "orthant/orthant.hpp"

namespace orthant::bench {

/// One replication of one method at one point of the swept axis.
struct BenchRecord {
  std::string method;
  std::string axis;  ///< "m" or "d"
  double axis_value = 0.0;
  int replication = 0;
  double estimate = 0.0;
  double variance = 0.0;
  double time_s = 0.0;
  double efficiency = 0.0;  ///< 1 / (variance * time_s), inf when variance is 0
  int q = 0;
  int m_star = 1;
  double acceptance_rate = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

/// method,axis,axis_value,replication,estimate,variance,time_s,efficiency,q,m_star,acceptance_rate,seed
[[nodiscard]] std::string csv_header();
void write_csv(std::ostream& os, std::span<const BenchRecord> records);
/// Throws Error(Io) on a malformed header or row.
[[nodiscard]] std::vector<BenchRecord> read_csv(std::istream& is);

struct SummaryRow {
  std::string method;
  std::string axis;
  double axis_value = 0.0;
  int count = 0;
  double eff_q25 = 0.0;
  double eff_median = 0.0;
  double eff_q75 = 0.0;
  double estimate_median = 0.0;
  /// median efficiency / median efficiency of the baseline at the same axis value
  double ratio_to_baseline = 0.0;
};

/// Per (method, axis_value) efficiency quantiles, in first-appearance order.
[[nodiscard]] std::vector<SummaryRow> summarize(std::span<const BenchRecord> records,
                                                const std::string& baseline);
/// method,axis,axis_value,count,eff_q25,eff_median,eff_q75,estimate_median,ratio_to_baseline
void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows);

/// Sample quantile with linear interpolation between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double prob);

struct TestcaseParams {
  int input_dim = 6;
  int d = 1000;
  Kernel kernel = default_kernel();
  int n_condition = 60;
  std::uint64_t seed = 0;

  /// tensor Matern 5/2, theta = (0.5, 0.5, 1, 1, 0.5, 0.5), sigma2 = 8
  static Kernel default_kernel();
};

struct Testcase {
  GaussianSpec spec;
  Eigen::MatrixXd points;  ///< d x input_dim locations of the coordinates
};

/// Field discretised on the first d Sobol points of [0,1]^input_dim,
/// conditioned on n_condition standard normal values at a seeded uniform
/// design so that the mean is not constant.
[[nodiscard]] Testcase make_testcase(const TestcaseParams& params);

struct BenchMConfig {
  double t = 5.0;
  std::vector<int> m_values{1, 2, 3, 5, 10, 20};
  int replications = 20;
  long long n_outer = 10'000;
  /// Also run the planner (n0, m0 pilot) and record its m* as "GanMC-auto".
  bool include_auto = true;
  EstimatorConfig base;
  int jobs = 1;
  std::uint64_t seed = 0;
};

/// Efficiency against the number of inner samples m. The core p_q is
/// computed once and shared; rows are "GMC" (m = 1 plain MC with n_outer
/// anchors), "GanMC" for each fixed m and "GanMC-auto".
[[nodiscard]] std::vector<BenchRecord> bench_vs_m(const GaussianSpec& spec,
                                                  const BenchMConfig& config);

struct BenchDConfig {
  double t = 5.0;
  std::vector<int> d_values{100, 300, 1000};
  std::vector<Method> methods{Method::MC, Method::GMC, Method::GanMC};
  int replications = 15;
  TestcaseParams testcase;
  /// A set `spatial` matrix switches on distance-weighted selection with the
  /// testcase locations.
  EstimatorConfig base;
  int jobs = 1;
  std::uint64_t seed = 0;
};

/// Efficiency against the dimension on nested discretisations of one field.
[[nodiscard]] std::vector<BenchRecord> bench_vs_d(const BenchDConfig& config);

/// Runs body(r) for r in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& body);

}  // namespace orthant::bench
