#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "orthant/error.hpp"
#include "orthant/remainder.hpp"

namespace orthant {
namespace {

GaussianSpec standard(int d) {
  return GaussianSpec(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
}

NestedConfig analytic_config(double budget) {
  NestedConfig cfg;
  cfg.cost_source = CostSource::Analytic;
  cfg.budget = {SimBudget::Kind::EquivalentSamples, budget};
  return cfg;
}

TEST(RemainderMc, IndependentSingleInactive) {
  const GaussianSpec spec = standard(2);
  const int active[] = {0};
  const long long n = 10'000;
  const RemainderEstimate r = remainder_mc(spec, active, 0.0, n, Stream(1));
  EXPECT_NEAR(r.value, 0.5, 3 * std::sqrt(0.25 / n));
  EXPECT_EQ(r.n_outer, n);
  EXPECT_EQ(r.method, "MC");
  EXPECT_NEAR(r.acceptance_rate, 0.5, 0.02);
  EXPECT_NEAR(r.variance, r.value * (1 - r.value) / n, 1e-12);
}

TEST(RemainderMc, IndependentThreeDims) {
  const int active[] = {0, 1};
  const long long n = 10'000;
  const RemainderEstimate r = remainder_mc(standard(3), active, 1.0, n, Stream(2));
  const double truth = 1.0 - oracle::phi(1.0);
  EXPECT_NEAR(r.value, truth, 3 * std::sqrt(truth * (1 - truth) / n));
}

TEST(RemainderMc, ExchangeableIdentity) {
  // p = 1 - 1/5, p_q = 1 - 1/3, so R_q = (p - p_q) / (1 - p_q) = 0.4.
  const GaussianSpec spec(Eigen::VectorXd::Zero(4), gen::equicorrelated(4, 0.5));
  const int active[] = {0, 1};
  const long long n = 10'000;
  const RemainderEstimate r = remainder_mc(spec, active, 0.0, n, Stream(3));
  EXPECT_NEAR(r.value, 0.4, 3 * std::sqrt(0.24 / n));
}

TEST(RemainderAnmc, IndependentThreeDims) {
  const int active[] = {0, 1};
  const AnmcOutcome o = remainder_anmc(standard(3), active, 1.0, analytic_config(10'000), Stream(4));
  const double truth = 1.0 - oracle::phi(1.0);
  EXPECT_EQ(o.estimate.method, "anMC");
  EXPECT_NEAR(o.estimate.value, truth, 3 * std::sqrt(o.estimate.variance) + 1e-12);
  EXPECT_GE(o.plan.m_star, 1);
  EXPECT_EQ(o.estimate.m_inner, o.plan.m_star);
}

TEST(Remainder, EmptyWhenEverythingIsActive) {
  const int active[] = {2, 0, 1};
  const RemainderEstimate mc = remainder_mc(standard(3), active, 0.0, 10, Stream(1));
  EXPECT_TRUE(mc.empty_remainder);
  EXPECT_EQ(mc.value, 0.0);
  EXPECT_EQ(mc.variance, 0.0);
  const AnmcOutcome an = remainder_anmc(standard(3), active, 0.0, {}, Stream(1));
  EXPECT_TRUE(an.estimate.empty_remainder);
  EXPECT_THROW((void)calibrate_costs(standard(3), active, 0.0, 5, 5, Stream(1)), Error);
}

TEST(Remainder, RejectsBadActiveSets) {
  const int repeated[] = {0, 0};
  const int out_of_range[] = {3};
  EXPECT_THROW((void)remainder_mc(standard(3), repeated, 0.0, 10, Stream(1)), Error);
  EXPECT_THROW((void)remainder_mc(standard(3), out_of_range, 0.0, 10, Stream(1)), Error);
  EXPECT_THROW((void)remainder_mc(standard(3), std::span<const int>{}, 0.0, 10, Stream(1)), Error);
  const int ok[] = {0};
  EXPECT_THROW((void)remainder_mc(standard(3), ok, 0.0, 0, Stream(1)), Error);
}

TEST(Remainder, AcceptanceTooLowPropagates) {
  const int active[] = {0, 1, 2, 3};
  try {
    (void)remainder_mc(standard(6), active, -4.0, 100, Stream(1), 10'000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AcceptanceTooLow);
  }
}

TEST(Remainder, AnalyticCostsCountFlops) {
  const GaussianSpec spec = standard(5);
  const int active[] = {0, 1};
  GaussianNestedSampler s(spec, active, 10.0, Rng(1));
  s.setup();
  s.draw_outer(100);
  const CostModel c = *s.analytic_costs();
  const double q = 2, r = 3, k = GaussianNestedSampler::kNormalFlops + 1;
  EXPECT_DOUBLE_EQ(c.c0, q * q * q / 3 + r * q * q + r * r * r / 3);
  EXPECT_DOUBLE_EQ(c.c, (q * (q + 1) / 2 + k * q) / s.acceptance_rate());
  EXPECT_DOUBLE_EQ(c.alpha, r * q + r);
  EXPECT_DOUBLE_EQ(c.beta, r * (r + 1) / 2 + k * r);
}

TEST(Remainder, CalibrateCostsIsPositive) {
  auto g = gen::engine(3);
  const GaussianSpec spec(Eigen::VectorXd::Zero(12), gen::correlation(12, g));
  const int active[] = {0, 3, 5};
  const PilotStats p = calibrate_costs(spec, active, 1.0, 50, 10, Stream(5));
  EXPECT_GT(p.cost.c, 0.0);
  EXPECT_GT(p.cost.beta, 0.0);
  EXPECT_GE(p.cost.alpha, 0.0);
  EXPECT_EQ(p.E.size(), 50);
  EXPECT_GE(p.a_hat, p.b_hat);
}

TEST(Remainder, DeterministicPerSeed) {
  auto g = gen::engine(4);
  const GaussianSpec spec(Eigen::VectorXd::Zero(8), gen::correlation(8, g));
  const int active[] = {1, 4};
  const AnmcOutcome a = remainder_anmc(spec, active, 1.0, analytic_config(2000), Stream(9));
  const AnmcOutcome b = remainder_anmc(spec, active, 1.0, analytic_config(2000), Stream(9));
  EXPECT_EQ(a.estimate.value, b.estimate.value);
  EXPECT_EQ(a.estimate.variance, b.estimate.variance);
  EXPECT_EQ(a.plan.m_star, b.plan.m_star);
}

// With m* forced to 1 the nested estimator walks exactly the same draws as
// plain MC with n* anchors.
TEST(RemainderAnmc, SingleInnerDrawEqualsPlainMc) {
  for (std::uint64_t c = 0; c < 5; ++c) {
    auto g = gen::engine(900 + c);
    const int d = gen::integer(g, 3, 10);
    const GaussianSpec spec(gen::vector(d, g, -0.5, 0.5), gen::spd(d, g));
    const std::vector<int> active = gen::subset(d, gen::integer(g, 1, d - 1), g);
    NestedConfig cfg = analytic_config(gen::integer(g, 100, 3000));
    cfg.m_max = 1;
    const AnmcOutcome an = remainder_anmc(spec, active, 1.0, cfg, Stream(c));
    const RemainderEstimate mc = remainder_mc(spec, active, 1.0, an.plan.n_star, Stream(c));
    EXPECT_EQ(an.estimate.m_inner, 1);
    EXPECT_EQ(an.estimate.n_outer, mc.n_outer);
    EXPECT_EQ(an.estimate.value, mc.value) << "case " << c;
    EXPECT_EQ(an.estimate.variance, mc.variance) << "case " << c;
  }
}

// Small correlated specs: both remainder estimators are unbiased for the
// brute-force oracle over 200 replications.
TEST(RemainderProperty, UnbiasedOnSmallSpecs) {
  for (std::uint64_t c = 0; c < 3; ++c) {
    auto g = gen::engine(950 + c);
    const int d = gen::integer(g, 3, 6);
    const Eigen::MatrixXd cov = gen::spd(d, g, 0.3);
    const Eigen::VectorXd mean = gen::vector(d, g, -0.3, 0.3);
    std::vector<int> active = gen::subset(d, gen::integer(g, 1, d - 1), g);
    const double t = 1.0;
    const oracle::NestedMoments truth =
        oracle::brute_force_moments(mean, cov, active, t, 400'000, 77 + c);
    const GaussianSpec spec(mean, cov);
    double mc_sum = 0, an_sum = 0, mc_var = 0, an_var = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
      const RemainderEstimate mc = remainder_mc(spec, active, t, 300, Stream(c).sub(r));
      NestedConfig cfg = analytic_config(300);
      const AnmcOutcome an = remainder_anmc(spec, active, t, cfg, Stream(c).sub(r).named("an"));
      mc_sum += mc.value;
      an_sum += an.estimate.value;
      mc_var += mc.variance;
      an_var += an.estimate.variance;
    }
    const double oracle_se = std::sqrt(truth.A / truth.anchors);
    EXPECT_NEAR(mc_sum / reps, truth.R, 4 * std::hypot(std::sqrt(mc_var) / reps, oracle_se))
        << "case " << c;
    EXPECT_NEAR(an_sum / reps, truth.R, 4 * std::hypot(std::sqrt(an_var) / reps, oracle_se))
        << "case " << c;
  }
}

}  // namespace
}  // namespace orthant
