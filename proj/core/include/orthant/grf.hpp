#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "orthant/gauss.hpp"
#include "orthant/orthant.hpp"
#include "orthant/rng.hpp"

namespace orthant {

enum class KernelKind {
  /// sigma2 * prod_i (1 + r_i + r_i^2 / 3) exp(-r_i), r_i = sqrt(5) |h_i| / theta_i
  Matern52Tensor,
  /// sigma2 * exp(-sum_i h_i^2 / (2 theta_i^2))
  Gaussian,
};

[[nodiscard]] std::string_view to_string(KernelKind k) noexcept;
[[nodiscard]] KernelKind kernel_kind_from_string(std::string_view name);

/// Stationary kernel with variance sigma2 and one range theta_i per input dimension.
struct Kernel {
  KernelKind kind = KernelKind::Matern52Tensor;
  double variance = 1.0;
  Eigen::VectorXd ranges;

  [[nodiscard]] int input_dim() const noexcept { return static_cast<int>(ranges.size()); }
};

/// Gram block k(X_i, Y_j) for points stored one per row.
[[nodiscard]] Eigen::MatrixXd kernel_eval(const Kernel& kernel, const Eigen::MatrixXd& X,
                                          const Eigen::MatrixXd& Y);

/// Prior mean: a constant, or explicit values at the design and grid points.
struct PriorMean {
  double constant = 0.0;
  std::optional<Eigen::VectorXd> at_design;
  std::optional<Eigen::VectorXd> at_grid;
};

/// Posterior of a Gaussian random field on a finite grid.
///
/// Covariances are produced on demand from the kernel and the whitened
/// cross-covariance W = L^{-1} K(design, grid), so a 10^4-point grid costs
/// O(k m) memory rather than O(m^2).
class GrfPosterior {
 public:
  /// Kriging update of the prior given observations at `design`.
  /// Throws DuplicateDesignPoints, NotPositiveDefinite.
  static GrfPosterior condition(const Kernel& kernel, const PriorMean& prior,
                                const Eigen::MatrixXd& design, const Eigen::VectorXd& observations,
                                const Eigen::MatrixXd& grid);

  /// A posterior given directly by its moments on the grid.
  static GrfPosterior from_moments(Eigen::MatrixXd grid, Eigen::VectorXd mean,
                                   Eigen::MatrixXd cov);

  [[nodiscard]] int size() const noexcept { return static_cast<int>(mean_.size()); }
  [[nodiscard]] const Eigen::MatrixXd& grid() const noexcept { return grid_; }
  [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
  /// Pointwise variances, negatives from round-off clipped to 0.
  [[nodiscard]] const Eigen::VectorXd& variance() const noexcept { return var_; }
  [[nodiscard]] Eigen::MatrixXd covariance_block(std::span<const int> idx) const;
  [[nodiscard]] Eigen::MatrixXd full_covariance() const;
  /// The joint law of the field at grid points `idx`.
  [[nodiscard]] GaussianSpec restrict(std::span<const int> idx) const;

 private:
  GrfPosterior() = default;

  Eigen::MatrixXd grid_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  std::optional<Kernel> kernel_;
  Eigen::MatrixXd whitened_;          ///< L^{-1} K(design, grid), k x m
  std::optional<Eigen::MatrixXd> cov_;  ///< set by from_moments
};

/// Tensor grid over [0,1]^dim with coordinates i / (n - 1) on each axis;
/// the first coordinate varies fastest.
[[nodiscard]] Eigen::MatrixXd uniform_grid(int dim, int n_per_axis);

/// Latin hypercube sample of k points in [0,1]^dim.
[[nodiscard]] Eigen::MatrixXd latin_hypercube(int k, int dim, Rng& rng);

/// P(xi(x_i) <= t) = Phi((t - mean_i) / sd_i); a zero-variance point has
/// coverage 1 if mean_i <= t and 0 otherwise.
[[nodiscard]] Eigen::VectorXd coverage_function(const GrfPosterior& post, double t);

struct VorobevFamily {
  Eigen::VectorXd coverage;
  /// Grid indices by decreasing coverage; ties keep the lower index first.
  std::vector<int> sorted_order;
  double cell_volume = 1.0;
  double expected_volume = 0.0;  ///< cell_volume * sum(coverage)
  double rho_v = 1.0;
  /// Vorob'ev expectation Q_{rho_v}: a prefix of sorted_order.
  std::vector<int> expectation;

  /// Number of points with coverage >= rho.
  [[nodiscard]] int quantile_size(double rho) const;
  /// Q_rho as a prefix of sorted_order.
  [[nodiscard]] std::vector<int> quantile(double rho) const;
};

[[nodiscard]] VorobevFamily vorobev(const Eigen::VectorXd& coverage, double cell_volume);

struct ConservativeConfig {
  double alpha = 0.95;
  /// Estimator used for each inclusion probability; defaults to GanMC with
  /// a 5 s remainder budget. A set `spatial` matrix only switches on
  /// distance-weighted selection; the grid locations are substituted.
  EstimatorConfig estimator = default_estimator();
  /// A set is accepted when P_hat - se_multiplier * SE >= alpha.
  double se_multiplier = 3.0;
  /// Points with variance <= this fraction of the largest variance are
  /// treated as deterministic and left out of the joint probability.
  double zero_variance_tol = 1e-10;

  static EstimatorConfig default_estimator();
};

struct DichotomyStep {
  int i_left = 0;
  int i_right = 0;
  int evaluated = 0;  ///< prefix size whose inclusion probability was estimated
  double prob = 0.0;
  double std_error = 0.0;
  bool accepted = false;
};

struct ConservativeResult {
  std::vector<int> set;  ///< grid indices, a prefix of the coverage ordering
  double rho = 1.0;      ///< smallest coverage inside the set
  double inclusion_prob = 1.0;
  double inclusion_se = 0.0;
  double alpha = 0.95;
  int i_top = 0;     ///< largest prefix whose coverage product is >= alpha
  int i_bottom = 0;  ///< number of points with coverage >= alpha
  std::vector<DichotomyStep> trace;
  bool empty = false;
  double wall_time = 0.0;
};

/// Largest Vorob'ev quantile whose joint inclusion probability in
/// {xi <= t} is at least alpha, found by bisection over prefix sizes.
[[nodiscard]] ConservativeResult conservative_estimate(const GrfPosterior& post, double t,
                                                       const ConservativeConfig& config,
                                                       std::uint64_t seed);

/// Inclusion probability P(xi(x) <= t for every x in prefix) and its SE.
struct InclusionProbability {
  double prob = 1.0;
  double std_error = 0.0;
};

[[nodiscard]] InclusionProbability inclusion_probability(const GrfPosterior& post, double t,
                                                         std::span<const int> points,
                                                         const ConservativeConfig& config,
                                                         std::uint64_t seed);

}  // namespace orthant
