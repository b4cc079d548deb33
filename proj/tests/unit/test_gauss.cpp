#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "orthant/error.hpp"
#include "orthant/gauss.hpp"

namespace orthant {
namespace {

double recomposition_error(const CholeskyFactor& f, const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd target = cov;
  target.diagonal().array() += f.jitter_applied;
  return (f.lower * f.lower.transpose() - target).cwiseAbs().maxCoeff();
}

TEST(GaussianSpec, RejectsAsymmetricAndMismatched) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.5, 0.5 + 1e-6, 1.0;
  EXPECT_THROW(GaussianSpec(Eigen::VectorXd::Zero(2), cov), Error);
  EXPECT_THROW(GaussianSpec(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(2, 2)), Error);
  Eigen::MatrixXd nan_cov = Eigen::MatrixXd::Identity(2, 2);
  nan_cov(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(GaussianSpec(Eigen::VectorXd::Zero(2), nan_cov), Error);
}

TEST(GaussianSpec, RestrictKeepsOrder) {
  Eigen::MatrixXd cov(3, 3);
  cov << 1, 0.1, 0.2, 0.1, 2, 0.3, 0.2, 0.3, 3;
  Eigen::VectorXd mean(3);
  mean << 1, 2, 3;
  const GaussianSpec spec(mean, cov);
  const std::vector<int> idx{2, 0};
  const GaussianSpec sub = spec.restrict(idx);
  EXPECT_EQ(sub.mean()(0), 3.0);
  EXPECT_EQ(sub.cov()(0, 1), 0.2);
  EXPECT_EQ(sub.cov()(1, 1), 1.0);
}

TEST(Cholesky, IdentityIsItsOwnFactor) {
  const CholeskyFactor f = cholesky(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(f.jitter_applied, 0.0);
  EXPECT_TRUE(f.lower.isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(Cholesky, TwoByTwo) {
  Eigen::MatrixXd cov(2, 2);
  cov << 4, 2, 2, 3;
  const CholeskyFactor f = cholesky(cov);
  EXPECT_NEAR(f.lower(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(f.lower(1, 1), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(f.lower(0, 1), 0.0);
  EXPECT_LE(recomposition_error(f, cov), 1e-8 * 4.0);
}

TEST(Cholesky, RankOneNeedsJitter) {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Ones(2, 2);
  const CholeskyFactor f = cholesky(cov);
  EXPECT_GT(f.jitter_applied, 0.0);
  EXPECT_LE(recomposition_error(f, cov), 1e-8);
}

TEST(Cholesky, NegativeDefiniteFails) {
  try {
    (void)cholesky(-Eigen::MatrixXd::Identity(3, 3));
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(CholeskyProperty, RecomposesRandomMatrices) {
  for (std::uint64_t c = 0; c < 50; ++c) {
    auto g = gen::engine(c);
    const int d = gen::integer(g, 1, 40);
    // Small shifts make some cases nearly singular.
    const Eigen::MatrixXd cov = gen::spd(d, g, c % 5 == 0 ? 0.0 : 0.1);
    const CholeskyFactor f = cholesky(cov);
    EXPECT_LE(recomposition_error(f, cov), 1e-8 * cov.cwiseAbs().maxCoeff()) << "case " << c;
    EXPECT_TRUE(f.lower.isLowerTriangular()) << "case " << c;
  }
}

TEST(ConditionOn, DiagonalGivesZeroRegression) {
  Eigen::VectorXd var(4);
  var << 1, 2, 3, 4;
  const GaussianSpec spec(Eigen::VectorXd::Zero(4), var.asDiagonal().toDenseMatrix());
  const std::vector<int> active{3, 1};
  const ConditionalGaussian c = condition_on(spec, active);
  EXPECT_EQ(c.regression.cwiseAbs().maxCoeff(), 0.0);
  ASSERT_EQ(c.inactive, (std::vector<int>{0, 2}));
  EXPECT_EQ(c.cond_cov(0, 0), 1.0);
  EXPECT_EQ(c.cond_cov(1, 1), 3.0);
  EXPECT_EQ(c.cond_cov(0, 1), 0.0);
}

TEST(ConditionOn, BivariateScalarFormula) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1, 0.6, 0.6, 1;
  const GaussianSpec spec(Eigen::VectorXd::Zero(2), cov);
  const std::vector<int> active{0};
  const ConditionalGaussian c = condition_on(spec, active);
  EXPECT_NEAR(c.conditional_mean(Eigen::VectorXd::Ones(1))(0), 0.6, 1e-14);
  EXPECT_NEAR(c.cond_cov(0, 0), 0.64, 1e-14);
}

TEST(ConditionOn, MatchesSchurComplementOracle) {
  for (std::uint64_t k = 0; k < 20; ++k) {
    auto g = gen::engine(100 + k);
    const int d = k == 0 ? 5 : gen::integer(g, 2, 12);
    const int q = k == 0 ? 2 : gen::integer(g, 1, d - 1);
    const Eigen::MatrixXd cov = gen::spd(d, g);
    const GaussianSpec spec(gen::vector(d, g, -1, 1), cov);
    std::vector<int> active = gen::subset(d, q, g);
    const ConditionalGaussian c = condition_on(spec, active);
    const Eigen::MatrixXd oracle = oracle::schur_complement(cov, active);
    EXPECT_LE((c.cond_cov - oracle).cwiseAbs().maxCoeff(), 1e-8) << "case " << k;
    EXPECT_LE((c.cond_cov - c.cond_cov.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConditionOn, RejectsBadIndexSets) {
  const GaussianSpec spec(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW((void)condition_on(spec, std::vector<int>{}), Error);
  EXPECT_THROW((void)condition_on(spec, std::vector<int>{3}), Error);
  EXPECT_THROW((void)condition_on(spec, std::vector<int>{1, 1}), Error);
}

TEST(ConditionOn, SingularAnchor) {
  // The active block [[1, 2], [2, 1]] is indefinite; no jitter level repairs it.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3);
  cov(0, 1) = cov(1, 0) = 2.0;
  const GaussianSpec spec(Eigen::VectorXd::Zero(3), cov);
  try {
    (void)condition_on(spec, std::vector<int>{0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularAnchor);
  }
}

TEST(ConditionOn, ConditionalMeansMatchColumnwise) {
  auto g = gen::engine(7);
  const GaussianSpec spec(gen::vector(6, g, -1, 1), gen::spd(6, g));
  const std::vector<int> active{4, 0};
  const ConditionalGaussian c = condition_on(spec, active);
  Eigen::MatrixXd anchors(2, 3);
  anchors << 0.1, -2.0, 3.0, 1.0, 0.0, -0.5;
  const Eigen::MatrixXd block = c.conditional_means(anchors);
  for (int j = 0; j < 3; ++j)
    EXPECT_LE((block.col(j) - c.conditional_mean(anchors.col(j))).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SampleMvn, LawOfLargeNumbers) {
  Rng rng(11);
  const CholeskyFactor f = cholesky(Eigen::MatrixXd::Identity(1, 1));
  const int n = 100'000;
  const Eigen::MatrixXd x = sample_mvn(f, Eigen::VectorXd::Zero(1), n, rng);
  ASSERT_EQ(x.rows(), n);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / (n - 1);
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleMvn, ZeroCovarianceCollapsesToMean) {
  Rng rng(3);
  // A zero matrix takes the smallest jitter, 1e-12, so draws deviate by ~1e-6.
  const CholeskyFactor f = cholesky(Eigen::MatrixXd::Zero(2, 2));
  EXPECT_EQ(f.jitter_applied, 1e-12);
  Eigen::VectorXd mean(2);
  mean << 1.5, -2.0;
  const Eigen::MatrixXd x = sample_mvn(f, mean, 100, rng);
  for (int i = 0; i < 100; ++i) EXPECT_LE((x.row(i).transpose() - mean).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SampleMvn, DeterministicPerSeed) {
  auto g = gen::engine(1);
  const CholeskyFactor f = cholesky(gen::spd(4, g));
  Rng a(99), b(99);
  EXPECT_EQ(sample_mvn(f, Eigen::VectorXd::Zero(4), 50, a), sample_mvn(f, Eigen::VectorXd::Zero(4), 50, b));
}

TEST(Truncated, IndependentAcceptanceAndSupport) {
  const GaussianSpec spec(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  Rng rng(5);
  const int n = 10'000;
  const TruncatedDraws d = sample_truncated_below_t(spec, 0.0, n, rng);
  ASSERT_EQ(d.samples.rows(), n);
  EXPECT_LE(d.samples.maxCoeff(), 0.0);
  EXPECT_NEAR(d.acceptance_rate, static_cast<double>(n) / d.draws_used, 1e-15);
  const double se = std::sqrt(0.25 * 0.75 / d.draws_used);
  EXPECT_NEAR(d.acceptance_rate, 0.25, 3 * se);
}

TEST(Truncated, EquicorrelatedAcceptance) {
  const GaussianSpec spec(Eigen::VectorXd::Zero(3), gen::equicorrelated(3, 0.5));
  const double target = oracle::equicorrelated_cdf(3, 0.5, 0.0);
  ASSERT_NEAR(target, 0.25, 1e-12);
  Rng rng(17);
  const TruncatedDraws d = sample_truncated_below_t(spec, 0.0, 20'000, rng);
  const double se = std::sqrt(target * (1 - target) / d.draws_used);
  EXPECT_NEAR(d.acceptance_rate, target, 3 * se);
}

TEST(Truncated, RequestBatchingDoesNotChangeTheStream) {
  auto g = gen::engine(4);
  const GaussianSpec spec(Eigen::VectorXd::Zero(3), gen::spd(3, g));
  TruncatedSampler a(spec, 0.3, Rng(8));
  TruncatedSampler b(spec, 0.3, Rng(8));
  Eigen::MatrixXd split(3, 2100);
  split.leftCols(7) = a.draw(7);
  split.middleCols(7, 1500) = a.draw(1500);
  split.rightCols(593) = a.draw(593);
  EXPECT_EQ(split, b.draw(2100));
  EXPECT_EQ(a.candidates_consumed(), b.candidates_consumed());
}

// Small requests must not pay for a large block up front; the timed pilot
// relies on outer cost growing with the number of draws.
TEST(Truncated, SmallRequestsGenerateFewCandidates) {
  const GaussianSpec spec(Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
  TruncatedSampler s(spec, 3.0, Rng(2));
  (void)s.draw(10);
  EXPECT_LE(s.candidates_generated(), 2 * kRejectionBlockMin);
  (void)s.draw(40);
  EXPECT_LE(s.candidates_generated(), 100);
}

TEST(Truncated, TooLowAcceptanceThrows) {
  const GaussianSpec spec(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4));
  Rng rng(1);
  try {
    (void)sample_truncated_below_t(spec, -3.0, 10, rng, 5000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AcceptanceTooLow);
    EXPECT_NE(std::string(e.what()).find("acceptance"), std::string::npos);
  }
}

// Anchor plus conditional draw, no truncation, reproduces the joint law.
TEST(ConditioningConsistency, JointCovarianceRecovered) {
  auto g = gen::engine(21);
  const int d = 5;
  const Eigen::MatrixXd cov = gen::spd(d, g, 0.5);
  const GaussianSpec spec(Eigen::VectorXd::Zero(d), cov);
  const std::vector<int> active{1, 3};
  const ConditionalGaussian c = condition_on(spec, active);
  const CholeskyFactor fa = cholesky(spec.restrict(active).cov());
  const CholeskyFactor fc = cholesky(c.cond_cov);
  Rng rng(21);
  const int n = 200'000;
  const Eigen::MatrixXd anchors = sample_mvn(fa, Eigen::VectorXd::Zero(2), n, rng).transpose();
  const Eigen::MatrixXd z = sample_mvn(fc, Eigen::VectorXd::Zero(d - 2), n, rng).transpose();
  const Eigen::MatrixXd rest = c.conditional_means(anchors) + z;
  Eigen::MatrixXd x(d, n);
  for (int k = 0; k < 2; ++k) x.row(active[k]) = anchors.row(k);
  for (int k = 0; k < d - 2; ++k) x.row(c.inactive[k]) = rest.row(k);
  const Eigen::MatrixXd emp = x * x.transpose() / n;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      // 5% relative, plus a floor of ~4.5 sampling SEs for entries near zero.
      const double tol = 0.05 * std::abs(cov(i, j)) + 0.01 * std::sqrt(cov(i, i) * cov(j, j));
      EXPECT_NEAR(emp(i, j), cov(i, j), tol) << i << "," << j;
    }
}

}  // namespace
}  // namespace orthant
