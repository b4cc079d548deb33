#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "orthant/rng.hpp"

namespace orthant {

/// A d-dimensional Gaussian N(mean, cov). Validated on construction and
/// immutable afterwards.
class GaussianSpec {
 public:
  /// Throws InvalidArgument on shape mismatch, non-finite entries or an
  /// asymmetry larger than 1e-10 relative to max |cov_ij|.
  GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
  [[nodiscard]] const Eigen::MatrixXd& cov() const noexcept { return cov_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(mean_.size()); }

  /// Marginal over `indices`, in the given order.
  [[nodiscard]] GaussianSpec restrict(std::span<const int> indices) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  /// Absolute amount added to the diagonal before factorising.
  double jitter_applied = 0.0;
};

/// Lower Cholesky factor of `cov`. On failure retries with
/// eps * mean(diag(cov)) * I for eps in {1e-12, 1e-10, 1e-8, 1e-6} and throws
/// NotPositiveDefinite after the last.
[[nodiscard]] CholeskyFactor cholesky(const Eigen::MatrixXd& cov);

/// Law of the inactive coordinates X^{-q} given the active ones X^q = x.
///
/// The conditional covariance is independent of x; only the mean moves:
///   mean(x) = base_mean + regression * (x - anchor_mean).
struct ConditionalGaussian {
  std::vector<int> active;
  std::vector<int> inactive;
  Eigen::MatrixXd regression;  ///< (d-q) x q, cov(-q,q) cov(q)^{-1}
  Eigen::MatrixXd cond_cov;    ///< (d-q) x (d-q) Schur complement
  Eigen::VectorXd base_mean;   ///< mean of X^{-q}
  Eigen::VectorXd anchor_mean; ///< mean of X^q

  [[nodiscard]] Eigen::VectorXd conditional_mean(const Eigen::VectorXd& anchor) const;
  /// Column-wise conditional means for a q x n block of anchors.
  [[nodiscard]] Eigen::MatrixXd conditional_means(const Eigen::MatrixXd& anchors) const;
};

/// Throws InvalidArgument for an empty, out-of-range or repeated index set
/// and SingularAnchor if cov(active) cannot be factorised.
[[nodiscard]] ConditionalGaussian condition_on(const GaussianSpec& spec,
                                               std::span<const int> active);

/// n i.i.d. draws of N(mean, L L^T), one per row (n x d).
[[nodiscard]] Eigen::MatrixXd sample_mvn(const CholeskyFactor& factor,
                                         const Eigen::VectorXd& mean, int n, Rng& rng);

inline constexpr long long kDefaultMaxTries = 10'000'000;
/// Smallest and largest candidate block of the rejection sampler.
inline constexpr Eigen::Index kRejectionBlockMin = 16;
inline constexpr Eigen::Index kRejectionBlockMax = 1 << 14;

/// Crude rejection sampler for X | max(X) <= t.
///
/// Candidates are generated in blocks sized to the expected need, 1.1 times
/// the missing count over the running acceptance rate. A fixed large block
/// would charge a small request for many unused candidates and distort timed
/// costs. Surplus accepted draws are buffered, so the k-th accepted sample
/// depends only on the seed, never on how requests were batched.
class TruncatedSampler {
 public:
  TruncatedSampler(const GaussianSpec& spec, double t, Rng rng,
                   long long max_tries = kDefaultMaxTries);

  /// Next n accepted draws as the columns of a dim x n matrix. Throws
  /// AcceptanceTooLow if more than max_tries candidates are needed.
  Eigen::MatrixXd draw(Eigen::Index n);

  /// accepted draws returned / candidates consumed to produce them
  [[nodiscard]] double acceptance_rate() const noexcept;
  [[nodiscard]] long long candidates_consumed() const noexcept { return consumed_; }
  /// Candidates generated so far, including buffered ones not yet returned.
  [[nodiscard]] long long candidates_generated() const noexcept { return generated_; }
  [[nodiscard]] long long accepted() const noexcept { return returned_; }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(mean_.size()); }

 private:
  void refill(Eigen::Index block);

  CholeskyFactor factor_;
  Eigen::VectorXd mean_;
  double t_;
  Rng rng_;
  long long max_tries_;

  Eigen::MatrixXd buffer_;
  std::vector<long long> ordinal_;  // candidate ordinal (1-based) of each buffered draw
  Eigen::Index head_ = 0;
  long long generated_ = 0;
  long long accepted_ = 0;  // accepted among generated
  long long consumed_ = 0;
  long long returned_ = 0;
};

struct TruncatedDraws {
  Eigen::MatrixXd samples;  ///< n x q, every entry <= t
  double acceptance_rate = 0.0;
  long long draws_used = 0;
};

[[nodiscard]] TruncatedDraws sample_truncated_below_t(const GaussianSpec& spec, double t,
                                                      int n, Rng& rng,
                                                      long long max_tries = kDefaultMaxTries);

}  // namespace orthant
