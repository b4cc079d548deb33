#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "orthant/gauss.hpp"
#include "orthant/nested.hpp"
#include "orthant/rng.hpp"

namespace orthant {

/// Nested sampler for R_q = P(max X^{-q} > t | max X^q <= t):
/// W = X^q | X^q <= t by rejection, Z = X^{-q} | X^q = W, g = 1{max Z > t}.
class GaussianNestedSampler final : public NestedSampler {
 public:
  GaussianNestedSampler(const GaussianSpec& spec, std::span<const int> active, double t,
                        Rng outer, long long max_tries = kDefaultMaxTries);

  void setup() override;
  void draw_outer(Eigen::Index count) override;
  void clear() override;
  [[nodiscard]] Eigen::Index anchor_count() const override { return anchors_.cols(); }
  void prepare_inner(Eigen::Index begin, Eigen::Index end) override;
  void draw_inner(Eigen::Index begin, Eigen::Index end, std::span<Rng> rngs,
                  std::span<double> g) override;
  /// Flop counts with one normal deviate valued at kNormalFlops; c is
  /// divided by the observed acceptance rate.
  [[nodiscard]] std::optional<CostModel> analytic_costs() const override;
  [[nodiscard]] double acceptance_rate() const override;

  static constexpr double kNormalFlops = 20.0;

 private:
  const GaussianSpec& spec_;
  std::vector<int> active_;
  double t_;
  Rng outer_seed_;
  long long max_tries_;

  std::optional<TruncatedSampler> outer_;
  ConditionalGaussian cond_;
  Eigen::MatrixXd cond_lower_;
  Eigen::MatrixXd anchors_;  ///< q x window
  Eigen::MatrixXd means_;    ///< (d - q) x window
  Eigen::MatrixXd z_;
};

struct RemainderEstimate {
  double value = 0.0;
  double variance = 0.0;
  long long n_outer = 0;
  int m_inner = 1;
  double acceptance_rate = 1.0;
  double wall_time = 0.0;
  std::string method;  ///< "MC" or "anMC"
  bool budget_exhausted = false;
  /// Every coordinate is active; R_q = 0 exactly.
  bool empty_remainder = false;
};

[[nodiscard]] RemainderEstimate remainder_mc(const GaussianSpec& spec, std::span<const int> active,
                                             double t, long long n, const Stream& stream,
                                             long long max_tries = kDefaultMaxTries);

/// Plain MC running for `seconds` of wall time.
[[nodiscard]] RemainderEstimate remainder_mc_for(const GaussianSpec& spec,
                                                 std::span<const int> active, double t,
                                                 double seconds, const Stream& stream,
                                                 long long max_tries = kDefaultMaxTries);

struct AnmcOutcome {
  RemainderEstimate estimate;
  AnmcPlan plan;
  CostModel cost;
};

[[nodiscard]] AnmcOutcome remainder_anmc(const GaussianSpec& spec, std::span<const int> active,
                                         double t, const NestedConfig& config,
                                         const Stream& stream,
                                         long long max_tries = kDefaultMaxTries);

/// Timed pilot of the Gaussian remainder sampler.
[[nodiscard]] PilotStats calibrate_costs(const GaussianSpec& spec, std::span<const int> active,
                                         double t, int n0, int m0, const Stream& stream,
                                         long long max_tries = kDefaultMaxTries);

}  // namespace orthant
